#!/usr/bin/env python3
"""Run every bundled experiment and write CSVs plus manifests under one root.

    python3 scripts/run_all.py --out runs --workers 4
    python3 scripts/run_all.py --only fig8a fig9a --trials 2     # quick smoke run
"""
import argparse
import dataclasses
import sys
import time
from pathlib import Path

from thzwave.harness import load_config, run_experiment
from thzwave.harness.config import bundled_configs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--trials", type=int, default=None, help="cap trials per point")
    ap.add_argument("--only", nargs="*", default=None, help="fixture names to run")
    a = ap.parse_args(argv)

    root = Path(a.out)
    paths = [p for p in bundled_configs() if a.only is None or p.stem in a.only]
    if not paths:
        print("no matching fixtures", file=sys.stderr)
        return 1
    for path in paths:
        cfg = load_config(path)
        if a.trials is not None:
            cfg = dataclasses.replace(cfg, trials=min(cfg.trials, a.trials))
        t0 = time.perf_counter()
        man = run_experiment(cfg, root / cfg.name, a.workers)
        print(f"{cfg.name:8s} {time.perf_counter() - t0:8.1f} s  "
              f"{', '.join(sorted(man.checksums))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
