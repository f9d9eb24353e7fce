"""Experiment configuration: TOML files validated into frozen dataclasses."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..core import ConfigError
from ..waveforms import Mapping, Scheme, WaveformParams

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"

KINDS = ("ber_awgn_phn", "ber_beam_split", "ber_doubly_selective",
         "papr_ccdf", "psd_oob", "kpi_tables")


class SchemaError(ConfigError):
    """Config does not match the schema; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    m_count: int
    label: str = ""
    n_count: int = 1
    cp_len: int = 0
    spread_len: int = 0
    mapping: str = "localized"
    overlap: int = 4
    sample_rate_hz: float = 1e9
    rolloff: float = -1.0          # < 0: no pulse shaping
    pulse_oversample: int = 4
    pulse_span: int = 6
    equalizer: str = "MMSE"

    def params(self) -> WaveformParams:
        return WaveformParams(Scheme(self.scheme), self.m_count, self.n_count, self.cp_len,
                              self.spread_len or None, Mapping(self.mapping), self.overlap,
                              self.sample_rate_hz)

    @property
    def name(self) -> str:
        return self.label or self.scheme


@dataclass(frozen=True)
class SnrSweep:
    start_db: float
    stop_db: float
    step_db: float = 1.0
    definition: str = "es_n0"

    def values(self) -> list[float]:
        n = int(round((self.stop_db - self.start_db) / self.step_db)) + 1
        return [round(self.start_db + i * self.step_db, 10) for i in range(n)]


@dataclass(frozen=True)
class ClusterRayConfig:
    cluster_rate: float = 0.13
    ray_rate: float = 0.37
    cluster_decay: float = 3.12
    ray_decay: float = 0.91
    absorption_coeff: float = 0.0033
    distance_m: float = 3.0


@dataclass(frozen=True)
class BeamSplitConfig:
    enabled: list[bool] = field(default_factory=lambda: [False, True])
    ae_count_tx: int = 32
    ae_count_rx: int = 32
    steer_angle_deg: float = 30.0
    fir_half_len: int = 16


@dataclass(frozen=True)
class ChannelConfig:
    model: str = "awgn"            # awgn | los | multipath | cluster_ray
    k_factor_db: float = 10.0
    n_taps: int = 0                # 0: generator default
    carrier_hz: float = 0.3e12
    speeds_kmh: list[float] = field(default_factory=list)
    tau_rms_s: float = -1.0        # < 0: estimate from the generator
    cluster_ray: ClusterRayConfig = field(default_factory=ClusterRayConfig)
    beam_split: typing.Optional[BeamSplitConfig] = None


@dataclass(frozen=True)
class PhaseNoiseConfig:
    k0_dbc_hz: float = -110.0
    f_cor_hz: float = 1e6
    models: list[str] = field(default_factory=lambda: ["gaussian"])
    sigma_g2_values: list[float] = field(default_factory=list)
    side: str = "tx"
    cpe_correction: bool = False


@dataclass(frozen=True)
class PaprConfig:
    threshold_start_db: float = 0.0
    threshold_stop_db: float = 14.0
    threshold_step_db: float = 0.05
    frames_per_trial: int = 1000
    probability: float = 1e-3
    theory: bool = True

    def thresholds(self):
        n = int(round((self.threshold_stop_db - self.threshold_start_db)
                      / self.threshold_step_db)) + 1
        return [self.threshold_start_db + i * self.threshold_step_db for i in range(n)]


@dataclass(frozen=True)
class PsdConfig:
    mask_file: str = "mask_80215_3d_style.csv"
    oversample: int = 8
    segment_len: int = 4096
    overlap_frac: float = 0.5
    users: int = 2
    user_spacing_hz: float = 2.16e9
    first_carrier_hz: float = 305.64e9
    sidelobe_offset_subcarriers: float = 10.0


@dataclass(frozen=True)
class KpiConfig:
    m_values: list[int] = field(default_factory=list)
    n_values: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    name: str
    schemes: list[SchemeConfig]
    seed: int = 0
    trials: int = 1
    workers: int = 1
    modulation_order: int = 4
    output_dir: str = ""
    snr: typing.Optional[SnrSweep] = None
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    phase_noise: typing.Optional[PhaseNoiseConfig] = None
    papr: PaprConfig = field(default_factory=PaprConfig)
    psd: PsdConfig = field(default_factory=PsdConfig)
    kpi: KpiConfig = field(default_factory=KpiConfig)
    source: str = ""

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("source")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def resolve_path(self, name: str) -> Path:
        p = Path(name)
        if p.is_absolute() and p.exists():
            return p
        for base in ([Path(self.source).parent] if self.source else []) + [FIXTURE_DIR]:
            if (base / p).exists():
                return base / p
        raise ConfigError(f"file not found: {name}")


# --- generic dataclass builder -------------------------------------------------

_HINTS: dict[type, dict] = {}


def _hints(cls):
    if cls not in _HINTS:
        _HINTS[cls] = typing.get_type_hints(cls)
    return _HINTS[cls]


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return _coerce(args[0], value, path)
    if origin is list:
        (inner,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise SchemaError(path, f"expected a list, got {type(value).__name__}")
        return [_coerce(inner, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise SchemaError(path, f"expected a table, got {type(value).__name__}")
        return _build(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise SchemaError(path, "expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise SchemaError(path, f"expected a string, got {value!r}")
        return value
    raise SchemaError(path, f"unsupported type {tp}")


def _build(cls, data: dict, path: str = ""):
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name != "source"}
    hints = _hints(cls)
    kwargs = {}
    for key, value in data.items():
        kp = f"{path}.{key}" if path else key
        if key not in fields:
            raise SchemaError(kp, "unknown key")
        kwargs[key] = _coerce(hints[key], value, kp)
    for name, f in fields.items():
        if name not in kwargs and f.default is dataclasses.MISSING \
                and f.default_factory is dataclasses.MISSING:
            raise SchemaError(f"{path}.{name}" if path else name, "missing required key")
    return cls(**kwargs)


def _check_ranges(cfg: ExperimentConfig):
    if cfg.kind not in KINDS:
        raise SchemaError("kind", f"must be one of {', '.join(KINDS)}")
    if cfg.trials < 1:
        raise SchemaError("trials", "must be >= 1")
    if cfg.workers < 1:
        raise SchemaError("workers", "must be >= 1")
    if cfg.modulation_order not in (4, 16, 64):
        raise SchemaError("modulation_order", "must be 4, 16 or 64")
    if not cfg.schemes:
        raise SchemaError("schemes", "at least one scheme is required")
    for i, s in enumerate(cfg.schemes):
        p = f"schemes[{i}]"
        if s.scheme not in Scheme.__members__:
            raise SchemaError(f"{p}.scheme", f"must be one of {', '.join(Scheme.__members__)}")
        if s.mapping not in ("localized", "distributed"):
            raise SchemaError(f"{p}.mapping", "must be 'localized' or 'distributed'")
        if s.equalizer not in ("ZF", "MMSE"):
            raise SchemaError(f"{p}.equalizer", "must be 'ZF' or 'MMSE'")
        if s.rolloff > 1:
            raise SchemaError(f"{p}.rolloff", "must be <= 1")
        try:
            s.params()
        except ConfigError as exc:
            raise SchemaError(p, str(exc)) from None
    if cfg.kind.startswith("ber_"):
        if cfg.snr is None:
            raise SchemaError("snr", "BER experiments need an snr table")
        if cfg.snr.step_db <= 0 or cfg.snr.stop_db < cfg.snr.start_db:
            raise SchemaError("snr", "need step_db > 0 and stop_db >= start_db")
        if cfg.snr.definition not in ("es_n0", "eb_n0"):
            raise SchemaError("snr.definition", "must be 'es_n0' or 'eb_n0'")
    if cfg.channel.model not in ("awgn", "los", "multipath", "cluster_ray"):
        raise SchemaError("channel.model", "must be awgn, los, multipath or cluster_ray")
    if cfg.kind == "ber_doubly_selective" and not cfg.channel.speeds_kmh:
        raise SchemaError("channel.speeds_kmh", "doubly-selective runs need speeds")
    if cfg.kind == "ber_beam_split" and cfg.channel.beam_split is None:
        raise SchemaError("channel.beam_split", "beam-split runs need a beam_split table")
    if cfg.phase_noise is not None:
        for i, m in enumerate(cfg.phase_noise.models):
            if m not in ("gaussian", "wiener", "combined"):
                raise SchemaError(f"phase_noise.models[{i}]", "unknown phase-noise model")
        if cfg.phase_noise.side not in ("tx", "rx"):
            raise SchemaError("phase_noise.side", "must be 'tx' or 'rx'")
    if cfg.papr.frames_per_trial < 1:
        raise SchemaError("papr.frames_per_trial", "must be >= 1")
    if not 0 < cfg.papr.probability < 1:
        raise SchemaError("papr.probability", "must lie in (0, 1)")
    if cfg.psd.users < 1 or cfg.psd.oversample < 1:
        raise SchemaError("psd", "users and oversample must be >= 1")


def config_from_dict(data: dict, source: str = "") -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data)
    cfg = dataclasses.replace(cfg, source=source)
    _check_ranges(cfg)
    return cfg


def resolve_config_path(name) -> Path:
    """Accept a file path or the stem of a bundled fixture."""
    p = Path(name)
    if p.exists():
        return p
    for cand in (FIXTURE_DIR / p, FIXTURE_DIR / f"{p}.toml"):
        if cand.exists():
            return cand
    raise ConfigError(f"config not found: {name}")


def load_config(path) -> ExperimentConfig:
    p = resolve_config_path(path)
    try:
        with p.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError("", f"{p}: {exc}") from None
    return config_from_dict(data, str(p.resolve()))


def bundled_configs() -> list[Path]:
    return sorted(FIXTURE_DIR.glob("*.toml"))
