"""Command-line entry point: ``thzwave {run,validate,list-experiments,print-kpi-table}``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from ..core import ConfigError, RandomStream, kmh_to_mps, max_doppler_hz
from ..kpi import complexity_report, e2e_latency_s, spectral_efficiency
from ..waveforms import Mapping, Scheme, WaveformParams
from .config import bundled_configs, load_config
from .experiments import draw_tdl
from .numerology import validate_numerology
from .runner import run_experiment


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thzwave", description="THz waveform link simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="TOML file or bundled fixture name")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory (default: $THZWAVE_OUTPUT_DIR/<name>)")
    r.add_argument("--workers", type=int)
    r.add_argument("--trials", type=int, help="override trials per point")

    v = sub.add_parser("validate", help="schema and numerology check")
    v.add_argument("--config", required=True)
    v.add_argument("--draws", type=int, default=200,
                   help="channel draws used to estimate delay spread")

    sub.add_parser("list-experiments", help="list bundled fixtures")

    k = sub.add_parser("print-kpi-table", help="SE, latency and complexity per scheme")
    k.add_argument("--m", type=int, default=256)
    k.add_argument("--ncp", type=int, default=48)
    k.add_argument("--n", type=int, default=32)
    k.add_argument("--overlap", type=int, default=4)
    k.add_argument("--mbar", type=int, nargs="+", default=[8, 64])
    k.add_argument("--fs", type=float, default=1e9, help="sample rate in Hz")
    return ap


def _cmd_run(a) -> int:
    cfg = load_config(a.config)
    if a.trials is not None:
        if a.trials < 1:
            raise ConfigError("trials: must be >= 1")
        cfg = cfg.with_overrides(trials=a.trials)
    man = run_experiment(cfg, a.out, a.workers, a.seed)
    print(f"output {man.output_dir}")
    print(man.text(), end="")
    return 0


def _channel_stats(cfg, p: WaveformParams, draws: int):
    ch = cfg.channel
    if ch.model == "awgn":
        tau_rms = tau_max = 0.0
    else:
        chans = [draw_tdl(cfg, p, RandomStream(cfg.seed, 0, (i,))) for i in range(draws)]
        tau_rms = float(np.mean([c.rms_delay_spread_s for c in chans]))
        tau_max = float(np.max([c.max_delay_s for c in chans]))
    if ch.tau_rms_s >= 0:
        tau_rms = ch.tau_rms_s
    v = max(ch.speeds_kmh, default=0.0)
    return tau_rms, tau_max, max_doppler_hz(kmh_to_mps(v), ch.carrier_hz)


def _cmd_validate(a) -> int:
    cfg = load_config(a.config)
    ok = True
    for s in cfg.schemes:
        p = s.params()
        tau_rms, tau_max, nu = _channel_stats(cfg, p, a.draws)
        rep = validate_numerology(p, tau_rms, tau_max, nu)
        print(f"[{s.name}]")
        print("\n".join(rep.lines()))
        ok &= rep.passed
    print("numerology: PASS" if ok else "numerology: FAIL")
    return 0 if ok else 1


def _cmd_list(a) -> int:
    for path in bundled_configs():
        try:
            cfg = load_config(path)
            print(f"{path.stem:10s} {cfg.kind:22s} {', '.join(s.name for s in cfg.schemes)}")
        except ConfigError as exc:
            print(f"{path.stem:10s} INVALID {exc}")
    return 0


def kpi_table_rows(m: int, ncp: int, n: int, overlap: int = 4, mbars=(8, 64),
                   fs: float = 1e9) -> list[tuple]:
    """(label, SE, latency_s, mults per symbol, mults per second) for every scheme."""
    cases = [("CP-OFDM", WaveformParams(Scheme.CP_OFDM, m, n, ncp, sample_rate_hz=fs)),
             ("SC-FDE", WaveformParams(Scheme.SC_FDE, m, n, ncp, sample_rate_hz=fs))]
    for mb in mbars:
        cases.append((f"DFT-s-OFDM(Mbar={mb})",
                      WaveformParams(Scheme.DFT_S_OFDM, m, n, ncp, mb, Mapping.LOCALIZED,
                                     sample_rate_hz=fs)))
    cases += [("OQAM/FBMC", WaveformParams(Scheme.OQAM_FBMC, m, n, overlap=overlap,
                                           sample_rate_hz=fs)),
              ("OTFS", WaveformParams(Scheme.OTFS, m, n, ncp, sample_rate_hz=fs))]
    rows = []
    for label, p in cases:
        c = complexity_report(p.scheme, p)
        rows.append((label, spectral_efficiency(p.scheme, p), e2e_latency_s(p.scheme, p),
                     c.per_symbol_real_mults, c.per_second_real_mults))
    return rows


def _cmd_kpi(a) -> int:
    rows = kpi_table_rows(a.m, a.ncp, a.n, a.overlap, a.mbar, a.fs)
    print(f"{'scheme':18s} {'SE':>10s} {'latency [s]':>14s} {'mults/symbol':>14s} "
          f"{'mults/s':>14s}")
    for r in rows:
        print(f"{r[0]:18s} {r[1]:10.6f} {r[2]:14.6e} {r[3]:14.2f} {r[4]:14.6e}")
    return 0


COMMANDS = {"run": _cmd_run, "validate": _cmd_validate, "list-experiments": _cmd_list,
            "print-kpi-table": _cmd_kpi}


def cli_main(argv=None) -> int:
    """Parse ``argv`` and dispatch; argparse exits with 2 on usage errors."""
    ap = _parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[a.command](a)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())
