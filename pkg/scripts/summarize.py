#!/usr/bin/env python3
"""Condense the CSVs written by run_all.py into a short text report.

For BER runs it prints the SNR at which each series reaches a target BER;
for PAPR runs the quantile at the configured probability; for PSD runs the
sidelobe level and worst OOB margin.
"""
import argparse
import csv
import sys
from pathlib import Path

from thzwave.core import UndefinedInputError
from thzwave.kpi import BerPoint, snr_at_ber


def _rows(path: Path):
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(run: Path, target: float) -> list[str]:
    out = [f"[{run.name}]"]
    if (run / "ber.csv").exists():
        series = {}
        for r in _rows(run / "ber.csv"):
            series.setdefault(r["series"], []).append(BerPoint(
                float(r["snr_db"]), float(r["ber"]), float(r["ci_low"]),
                float(r["ci_high"]), int(r["bits"]), int(r["errors"])))
        for name, pts in series.items():
            try:
                s = f"{snr_at_ber(pts, target):6.2f} dB"
            except UndefinedInputError:
                s = "   not reached"
            out.append(f"  {name:42s} SNR@{target:g} {s}")
    if (run / "papr_summary.csv").exists():
        for r in _rows(run / "papr_summary.csv"):
            out.append(f"  {r['series']:42s} PAPR {float(r['papr_db_at_p']):6.2f} dB "
                       f"max {float(r['max_papr_db']):6.2f} dB")
    if (run / "sidelobe.csv").exists():
        margins = {}
        for r in _rows(run / "oob.csv"):
            margins[r["series"]] = min(margins.get(r["series"], 1e9),
                                       float(r["oob_margin_db"]))
        for r in _rows(run / "sidelobe.csv"):
            out.append(f"  {r['series']:42s} sidelobe {float(r['level_dbr']):7.1f} dBr "
                       f"OOB margin {margins[r['series']]:5.1f} dB")
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root", nargs="?", default="runs")
    ap.add_argument("--target-ber", type=float, default=1e-2)
    a = ap.parse_args(argv)
    runs = sorted(p for p in Path(a.root).iterdir() if (p / "manifest.txt").exists())
    if not runs:
        print(f"no runs under {a.root}", file=sys.stderr)
        return 1
    for run in runs:
        print("\n".join(summarize(run, a.target_ber)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
