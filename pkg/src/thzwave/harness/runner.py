"""Run an experiment config end to end and write CSV artifacts plus a manifest."""
from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..kpi import write_csv
from . import experiments
from .config import ExperimentConfig

OUTPUT_ENV = "THZWAVE_OUTPUT_DIR"


def _version() -> str:
    from .. import __version__
    return __version__


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    seed: int
    checksums: dict
    wall_clock_s: float
    version: str
    output_dir: str = ""

    def text(self) -> str:
        lines = [f"experiment_config_sha256 {self.config_hash}",
                 f"seed {self.seed}",
                 f"version {self.version}",
                 f"wall_clock_s {self.wall_clock_s:.3f}"]
        lines += [f"sha256 {v} {k}" for k, v in sorted(self.checksums.items())]
        return "\n".join(lines) + "\n"


def default_output_dir(cfg: ExperimentConfig) -> Path:
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(OUTPUT_ENV, "results")) / cfg.name


def _call(args):
    fn, cfg, task = args
    return fn(cfg, task)


def map_trials(fn, cfg: ExperimentConfig, tasks, workers: int):
    """Evaluate ``fn(cfg, task)`` for each task; results come back in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(cfg, t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_call, [(fn, cfg, t) for t in tasks], chunksize=chunk))


def compute_tables(cfg: ExperimentConfig, workers: int | None = None) -> dict:
    """All output tables for ``cfg`` as {file name: (header, rows)}."""
    workers = cfg.workers if workers is None else workers
    if cfg.kind == "kpi_tables":
        return experiments.kpi_tables(cfg)
    experiments.check_feasible(cfg)
    tasks_fn, trial_fn, table_fn = experiments.KINDS[cfg.kind]
    tasks = tasks_fn(cfg)
    return table_fn(cfg, map_trials(trial_fn, cfg, tasks, workers))


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int | None = None,
                   seed: int | None = None) -> RunManifest:
    """Run ``cfg`` and write its CSVs and ``manifest.txt`` into ``out_dir``.

    Nothing is written unless every trial succeeded.
    """
    if seed is not None:
        cfg = cfg.with_overrides(seed=seed)
    t0 = time.perf_counter()
    tables = compute_tables(cfg, workers)
    out = Path(out_dir) if out_dir is not None else default_output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    sums = {}
    for name, (header, rows) in tables.items():
        path = out / name
        write_csv(path, header, rows)
        sums[name] = hashlib.sha256(path.read_bytes()).hexdigest()
    man = RunManifest(cfg.digest(), cfg.seed, sums, time.perf_counter() - t0, _version(),
                      str(out))
    (out / "manifest.txt").write_text(man.text())
    return man
