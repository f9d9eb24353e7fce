"""Experiment kinds: series expansion, per-trial work units and CSV assembly."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..channels import (BeamSplitParams, ClusterRayParams, TdlChannel, beam_split_fir,
                        dd_from_mobility, generate_cluster_ray_tdl)
from ..core import ConfigError, QamConstellation, RandomStream, kmh_to_mps, max_doppler_hz
from ..impairments import PhnModel, PhnParams
from ..kpi import (ber_aggregate, complexity_report, db, e2e_latency_s, empirical_ccdf,
                   load_mask_csv, oob_check, papr_ccdf_theory, papr_max_otfs_db,
                   papr_quantile_db, papr_windows, psd_estimate, sidelobe_level_db,
                   spectral_efficiency)
from ..waveforms import Scheme, WaveformParams, apply_pulse_shaping, modulate
from .config import ExperimentConfig, SchemeConfig
from .links import CHANNEL, LtvLink, TivLink, run_link


@dataclass(frozen=True)
class Series:
    label: str
    scheme: SchemeConfig
    phn_model: str = ""
    sigma_g2: float = -1.0
    beam_split: bool = False
    speed_kmh: float = -1.0


def expand_series(cfg: ExperimentConfig) -> list[Series]:
    out = []
    for s in cfg.schemes:
        if cfg.kind == "ber_awgn_phn" and cfg.phase_noise is not None:
            pn = cfg.phase_noise
            sweep = pn.sigma_g2_values or [-1.0]
            for model, sg in itertools.product(pn.models, sweep):
                tag = f"{s.name} | phn={model}" + (f" sigma_g2={sg:g}" if sg >= 0 else "")
                out.append(Series(tag, s, phn_model=model, sigma_g2=sg))
        elif cfg.kind == "ber_beam_split":
            for on in cfg.channel.beam_split.enabled:
                out.append(Series(f"{s.name} | beam_split={'on' if on else 'off'}", s,
                                  beam_split=on))
        elif cfg.kind == "ber_doubly_selective":
            for v in cfg.channel.speeds_kmh:
                out.append(Series(f"{s.name} | {v:g} km/h", s, speed_kmh=v))
        else:
            out.append(Series(s.name, s))
    labels = [x.label for x in out]
    if len(set(labels)) != len(labels):
        raise ConfigError("series labels must be unique; set distinct scheme labels")
    return out


# --- channel construction ---------------------------------------------------------

def _cluster_params(cfg: ExperimentConfig) -> ClusterRayParams:
    c = cfg.channel.cluster_ray
    return ClusterRayParams(c.cluster_rate, c.ray_rate, c.cluster_decay, c.ray_decay,
                            c.absorption_coeff, c.distance_m)


def draw_tdl(cfg: ExperimentConfig, p: WaveformParams, stream: RandomStream) -> TdlChannel:
    ch = cfg.channel
    ts = 1.0 / p.sample_rate_hz
    if ch.model == "awgn":
        return TdlChannel(np.ones(1, complex), ts)
    k = {"los": np.inf, "multipath": None, "cluster_ray": ch.k_factor_db}[ch.model]
    return generate_cluster_ray_tdl(_cluster_params(cfg), ts, stream,
                                    n_taps=ch.n_taps or None, k_factor_db=k)


def beam_split_params(cfg: ExperimentConfig, p: WaveformParams) -> BeamSplitParams:
    b = cfg.channel.beam_split
    return BeamSplitParams(b.ae_count_tx, b.ae_count_rx, cfg.channel.carrier_hz,
                           p.sample_rate_hz, p.m_count, np.deg2rad(b.steer_angle_deg))


def build_link(cfg: ExperimentConfig, series: Series, p: WaveformParams, stream: RandomStream):
    tdl = draw_tdl(cfg, p, stream.child(0))
    if cfg.kind == "ber_doubly_selective":
        dd = dd_from_mobility(tdl, kmh_to_mps(series.speed_kmh), cfg.channel.carrier_hz,
                              p.m_count, p.n_count, p.delta_f_hz, stream.child(1))
        return LtvLink(dd, p.m_count, p.n_count)
    if series.beam_split:
        half = cfg.channel.beam_split.fir_half_len
        fir = beam_split_fir(beam_split_params(cfg, p), half)
        return TivLink(np.convolve(fir, tdl.taps), sync_delay=half)
    return TivLink(np.asarray(tdl.taps))


def check_feasible(cfg: ExperimentConfig):
    """Reject numerologies that break nu_max < delta_f before any trial runs."""
    if cfg.kind != "ber_doubly_selective":
        return
    for s in cfg.schemes:
        p = s.params()
        for v in cfg.channel.speeds_kmh:
            nu = max_doppler_hz(kmh_to_mps(v), cfg.channel.carrier_hz)
            if nu >= p.delta_f_hz:
                raise ConfigError(f"{s.name} at {v:g} km/h: nu_max={nu:.6g} Hz >= "
                                  f"delta_f={p.delta_f_hz:.6g} Hz violates "
                                  "nu_max < delta_f < 1/tau_max")


def _phn(cfg: ExperimentConfig, series: Series, p: WaveformParams):
    if not series.phn_model:
        return None
    pn = cfg.phase_noise
    params = PhnParams.from_dbc(pn.k0_dbc_hz, pn.f_cor_hz, p.sample_rate_hz,
                                PhnModel(series.phn_model))
    if series.sigma_g2 >= 0:
        # rescale both components so sigma_g^2 hits the requested value
        scale = series.sigma_g2 / params.sigma_g2
        params = PhnParams(params.k0 * scale, params.k2 * scale, params.bandwidth_hz,
                           params.model)
    return params


# --- BER --------------------------------------------------------------------------

def ber_tasks(cfg: ExperimentConfig):
    series = expand_series(cfg)
    snrs = cfg.snr.values()
    return [(si, qi, t) for si in range(len(series)) for qi in range(len(snrs))
            for t in range(cfg.trials)]


def ber_trial(cfg: ExperimentConfig, task) -> tuple[int, int]:
    si, qi, t = task
    series = expand_series(cfg)[si]
    snr = cfg.snr.values()[qi]
    stream = RandomStream.for_trial(cfg.seed, cfg.name, qi, t)
    p = series.scheme.params()
    link = build_link(cfg, series, p, stream.child(CHANNEL))
    pn = cfg.phase_noise
    c = run_link(p, link, QamConstellation(cfg.modulation_order), snr, stream,
                 cfg.snr.definition, series.scheme.equalizer, _phn(cfg, series, p),
                 pn.side if pn else "tx", bool(pn and pn.cpe_correction))
    return c.errors, c.bits


def ber_tables(cfg: ExperimentConfig, results) -> dict:
    from ..kpi import BerCounter
    series = expand_series(cfg)
    snrs = cfg.snr.values()
    acc = {}
    for (si, qi, _), (e, b) in zip(ber_tasks(cfg), results):
        acc.setdefault((si, qi), []).append(BerCounter(e, b))
    rows = []
    for si, s in enumerate(series):
        for qi, snr in enumerate(snrs):
            pt = ber_aggregate(snr, acc[(si, qi)])
            rows.append((s.label, snr, pt.ber, pt.ci_low, pt.ci_high, pt.bits, pt.errors))
    return {"ber.csv": (("series", "snr_db", "ber", "ci_low", "ci_high", "bits", "errors"),
                        rows)}


# --- PAPR -------------------------------------------------------------------------

def papr_tasks(cfg: ExperimentConfig):
    return [(si, t) for si in range(len(cfg.schemes)) for t in range(cfg.trials)]


def frame_paprs(s: SchemeConfig, const: QamConstellation, frames: int,
                stream: RandomStream) -> np.ndarray:
    """PAPR samples (linear) of ``frames`` independent frames.

    Windows: one useful block (CP excluded) for CP schemes, one payload for
    OTFS, one prototype length O*M in steady state for FBMC. For FBMC
    ``frames`` counts windows (hop M) rather than bursts.
    """
    p = s.params()
    g = stream.generator
    M, N, cp = p.m_count, p.n_count, p.cp_len
    rows = p.symbols_per_block

    def draw(n_cols):
        idx = g.integers(0, const.order, size=(rows, n_cols))
        return const.points[idx]

    if p.scheme is Scheme.OTFS:
        out = np.empty(frames)
        for f in range(frames):
            x = modulate(draw(N), p).samples
            out[f] = papr_windows(x, M * N, offset=cp, count=1)[0]
        return out
    if p.scheme is Scheme.OQAM_FBMC:
        # one frame gives many windows; draw frames until ``frames`` windows exist
        Lp = p.overlap * M
        per = (p.signal_length - 3 * Lp) // M + 1
        if per < 1:
            raise ConfigError("FBMC frame too short for a steady-state PAPR window")
        vals = []
        for _ in range(-(-frames // per)):
            x = modulate(draw(N), p).samples
            vals.append(papr_windows(x, Lp, offset=Lp, hop=M, count=per))
        return np.concatenate(vals)[:frames]
    big = p.replace(n_count=N * frames)
    x = modulate(draw(N * frames), big).samples
    if s.rolloff >= 0:
        os_ = s.pulse_oversample
        y = apply_pulse_shaping(x, s.rolloff, s.pulse_span, os_).samples
        delay = s.pulse_span * os_ // 2
        return papr_windows(y, M * os_, offset=delay + cp * os_, hop=(M + cp) * os_,
                            count=N * frames)
    return papr_windows(x, M, offset=cp, hop=M + cp, count=N * frames)


def papr_trial(cfg: ExperimentConfig, task) -> np.ndarray:
    si, t = task
    stream = RandomStream.for_trial(cfg.seed, cfg.name, si, t)
    return frame_paprs(cfg.schemes[si], QamConstellation(cfg.modulation_order),
                       cfg.papr.frames_per_trial, stream)


def papr_tables(cfg: ExperimentConfig, results) -> dict:
    thr = cfg.papr.thresholds()
    prob = cfg.papr.probability
    per = {}
    for (si, _), v in zip(papr_tasks(cfg), results):
        per.setdefault(si, []).append(v)
    ccdf_rows, summary = [], []
    for si, s in enumerate(cfg.schemes):
        v = np.concatenate(per[si])
        curve = empirical_ccdf(v, thr)
        ccdf_rows += [(s.name, a, b) for a, b in zip(curve.thresholds_db, curve.probabilities)]
        p = s.params()
        bound = papr_max_otfs_db(p.n_count) if p.scheme is Scheme.OTFS else float("nan")
        summary.append((s.name, v.size, papr_quantile_db(v, prob), float(db(v.max())), bound))
        if cfg.papr.theory and p.scheme in (Scheme.CP_OFDM, Scheme.OTFS) and s.rolloff < 0:
            th = papr_ccdf_theory(p.scheme, p.m_count, p.n_count, thr)
            ccdf_rows += [(f"theory {s.name}", a, b)
                          for a, b in zip(th.thresholds_db, th.probabilities)]
    return {
        "ccdf.csv": (("series", "threshold_db", "probability"), ccdf_rows),
        "papr_summary.csv": (("series", "observations", f"papr_db_at_p", "max_papr_db",
                              "otfs_bound_db"), summary),
    }


# --- PSD / OOB --------------------------------------------------------------------

def psd_tasks(cfg: ExperimentConfig):
    return [(si, t) for si in range(len(cfg.schemes)) for t in range(cfg.trials)]


def psd_trial(cfg: ExperimentConfig, task):
    """Per-user linear PSDs of one frame (users x bins) and the frequency axis."""
    si, t = task
    s = cfg.schemes[si]
    p = s.params()
    const = QamConstellation(cfg.modulation_order)
    stream = RandomStream.for_trial(cfg.seed, cfg.name, si, t)
    L = cfg.psd.oversample
    psds = []
    for u in range(cfg.psd.users):
        g = stream.child(u).generator
        d = const.points[g.integers(0, const.order, size=(p.symbols_per_block, p.n_count))]
        x = modulate(d, p, oversample=L)
        f, pdb = psd_estimate(x, cfg.psd.segment_len, cfg.psd.overlap_frac)
        psds.append(10 ** (pdb / 10))
    return f, np.array(psds)


def psd_tables(cfg: ExperimentConfig, results) -> dict:
    mask = load_mask_csv(cfg.resolve_path(cfg.psd.mask_file))
    per = {}
    for (si, _), (f, ps) in zip(psd_tasks(cfg), results):
        per.setdefault(si, []).append(ps)
    psd_rows, oob_rows, side_rows = [], [], []
    spacing = cfg.psd.user_spacing_hz
    for si, s in enumerate(cfg.schemes):
        p = s.params()
        avg = np.mean(per[si], axis=0)
        fs_total = p.sample_rate_hz * cfg.psd.oversample
        # composite spectrum of all users on one axis; users are independent so
        # their PSDs add after a frequency shift
        grid = np.arange(f.size) * (fs_total / f.size) - fs_total / 2
        comb = np.zeros_like(grid)
        for u in range(cfg.psd.users):
            shift = u * spacing
            comb += np.interp(grid, f + shift, avg[u], left=0.0, right=0.0)
            rep = oob_check(f, db(avg[u]), mask, 0.0)
            oob_rows.append((s.name, u, cfg.psd.first_carrier_hz + shift,
                             rep.worst_margin_db, rep.oob_margin_db, int(rep.passed),
                             rep.violating_freqs_hz.size))
        rf = cfg.psd.first_carrier_hz + grid
        psd_rows += [(s.name, a, b) for a, b in zip(rf, db(np.maximum(comb, 1e-300)))]
        off = p.sample_rate_hz / 2 + cfg.psd.sidelobe_offset_subcarriers * p.delta_f_hz
        side_rows.append((s.name, off, sidelobe_level_db(f, db(avg[0]), off)))
    return {
        "psd.csv": (("series", "freq_hz", "psd_db"), psd_rows),
        "oob.csv": (("series", "user", "center_hz", "worst_margin_db", "oob_margin_db",
                     "passed", "violating_bins"), oob_rows),
        "sidelobe.csv": (("series", "offset_hz", "level_dbr"), side_rows),
    }


# --- KPI tables -------------------------------------------------------------------

def _kpi_row(label, p: WaveformParams):
    c = complexity_report(p.scheme, p)
    return (label, spectral_efficiency(p.scheme, p), e2e_latency_s(p.scheme, p),
            c.per_symbol_real_mults, c.per_second_real_mults)


def kpi_tables(cfg: ExperimentConfig) -> dict:
    rows = []
    for s in cfg.schemes:
        r = _kpi_row(s.name, s.params())
        rows.append((r[0], r[1], r[2], r[4]))
    sweep = []
    for s in cfg.schemes:
        base = s.params()
        for m in cfg.kpi.m_values or [base.m_count]:
            for n in cfg.kpi.n_values or [base.n_count]:
                p = base.replace(m_count=m, n_count=n)
                r = _kpi_row(s.name, p)
                sweep.append((r[0], m, n, *r[1:]))
    return {
        "kpi.csv": (("scheme", "se", "latency_s", "mults_per_s"), rows),
        "kpi_sweep.csv": (("scheme", "m", "n", "se", "latency_s", "mults_per_symbol",
                           "mults_per_s"), sweep),
    }


KINDS = {
    "ber_awgn_phn": (ber_tasks, ber_trial, ber_tables),
    "ber_beam_split": (ber_tasks, ber_trial, ber_tables),
    "ber_doubly_selective": (ber_tasks, ber_trial, ber_tables),
    "papr_ccdf": (papr_tasks, papr_trial, papr_tables),
    "psd_oob": (psd_tasks, psd_trial, psd_tables),
}
