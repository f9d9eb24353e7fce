"""Shared domain types: signals, grids, lattices, QAM and random streams."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ThzWaveError(Exception):
    """Base class for library errors."""


class ConfigError(ThzWaveError, ValueError):
    """Invalid parameters or infeasible numerology."""


class InputShapeError(ThzWaveError, ValueError):
    """Array length or shape does not match what an operation expects."""


class SingularityError(ThzWaveError, np.linalg.LinAlgError):
    """A zero-forcing solve hit a (near) singular channel."""


class UndefinedInputError(ThzWaveError, ValueError):
    """Quantity undefined for the given input, e.g. PAPR of a zero window."""


class Domain(str, Enum):
    TF = "TF"
    DD = "DD"


@dataclass(frozen=True)
class ComplexSignal:
    """Complex baseband samples at ``sample_rate_hz``."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex).reshape(-1)
        if s.size < 1:
            raise InputShapeError("signal must contain at least one sample")
        if not np.all(np.isfinite(s)):
            raise InputShapeError("signal samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    @property
    def energy(self) -> float:
        return float(np.vdot(self.samples, self.samples).real)

    def with_samples(self, samples) -> "ComplexSignal":
        return ComplexSignal(samples, self.sample_rate_hz)


def as_samples(signal) -> np.ndarray:
    """Return the raw sample vector of a ComplexSignal or array-like."""
    if isinstance(signal, ComplexSignal):
        return signal.samples
    return np.asarray(signal, dtype=complex).reshape(-1)


def like(template, samples):
    """Wrap ``samples`` in the same container type as ``template``."""
    if isinstance(template, ComplexSignal):
        return template.with_samples(samples)
    return np.asarray(samples)


@dataclass(frozen=True)
class FrameGrid:
    """M x N symbol grid tagged with its domain (TF or DD)."""

    values: np.ndarray
    domain: Domain = Domain.TF

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.size == 0:
            raise InputShapeError(f"grid must be a non-empty 2-D array, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "domain", Domain(self.domain))

    @property
    def m_count(self) -> int:
        return self.values.shape[0]

    @property
    def n_count(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


def as_grid_values(grid, m=None, n=None) -> np.ndarray:
    v = grid.values if isinstance(grid, FrameGrid) else np.asarray(grid, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    if (m is not None and v.shape[0] != m) or (n is not None and v.shape[1] != n):
        raise InputShapeError(f"expected a {m}x{n} grid, got {v.shape[0]}x{v.shape[1]}")
    return v


def vectorize(grid) -> np.ndarray:
    """Column-stacking vec(.) of a grid."""
    return as_grid_values(grid).reshape(-1, order="F")


def devectorize(vector, m_count: int, n_count: int, domain=Domain.TF) -> FrameGrid:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    if v.size != m_count * n_count:
        raise InputShapeError(f"vector of length {v.size} cannot fill a {m_count}x{n_count} grid")
    return FrameGrid(v.reshape(m_count, n_count, order="F"), domain)


@dataclass(frozen=True)
class LatticeSpec:
    """Time-frequency lattice with spacing ``delta_f_hz`` and period ``symbol_period_s``."""

    delta_f_hz: float
    symbol_period_s: float
    m_count: int
    n_count: int

    def __post_init__(self):
        if self.delta_f_hz <= 0 or self.symbol_period_s <= 0:
            raise ConfigError("lattice spacings must be positive")
        if self.m_count < 1 or self.n_count < 1:
            raise ConfigError("lattice dimensions must be >= 1")

    @property
    def frame_duration_s(self) -> float:
        return self.n_count * self.symbol_period_s

    @property
    def delay_resolution_s(self) -> float:
        return 1.0 / (self.m_count * self.delta_f_hz)

    @property
    def doppler_resolution_hz(self) -> float:
        return 1.0 / (self.n_count * self.symbol_period_s)

    @property
    def bandwidth_hz(self) -> float:
        return self.m_count * self.delta_f_hz


def max_doppler_hz(speed_mps: float, carrier_hz: float) -> float:
    """Maximum Doppler shift ``v * f_c / c``."""
    return speed_mps * carrier_hz / SPEED_OF_LIGHT


def kmh_to_mps(speed_kmh: float) -> float:
    return speed_kmh / 3.6


# --- QAM ---------------------------------------------------------------------

def _gray_levels(bits_per_axis: int) -> np.ndarray:
    # PAM amplitude for each axis label, label 0 -> most positive level
    L = 1 << bits_per_axis
    levels = np.empty(L)
    for i in range(L):
        levels[i ^ (i >> 1)] = (L - 1) - 2 * i
    return levels


@dataclass(frozen=True)
class QamConstellation:
    """Square Gray-mapped QAM with unit average energy.

    Symbol index ``k`` carries bits ``k`` in MSB-first order; the first half
    of the bits selects the in-phase level and the second half the
    quadrature level. Bit 0 maps to the positive half-plane on both axes.
    """

    order: int
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.order not in (4, 16, 64):
            raise ConfigError(f"unsupported QAM order {self.order}; use 4, 16 or 64")
        object.__setattr__(self, "points", _qam_points(self.order))

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def bit_table(self) -> np.ndarray:
        k = self.bits_per_symbol
        idx = np.arange(self.order)
        return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)


@lru_cache(maxsize=None)
def _qam_points(order: int) -> np.ndarray:
    k = int(np.log2(order))
    h = k // 2
    lev = _gray_levels(h)
    idx = np.arange(order)
    pts = lev[idx >> h] + 1j * lev[idx & ((1 << h) - 1)]
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    return pts


def qam_modulate(bits, constellation: QamConstellation) -> np.ndarray:
    b = np.asarray(bits, dtype=np.uint8).reshape(-1)
    k = constellation.bits_per_symbol
    if b.size % k:
        raise InputShapeError(f"{b.size} bits is not a multiple of {k} bits per symbol")
    idx = b.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1))
    return constellation.points[idx]


def qam_indices(symbols, constellation: QamConstellation, chunk: int = 1 << 16) -> np.ndarray:
    """Minimum-distance decisions; ties go to the lowest constellation index."""
    s = np.asarray(symbols, dtype=complex).reshape(-1)
    pts = constellation.points
    out = np.empty(s.size, dtype=np.int64)
    for start in range(0, s.size, chunk):
        blk = s[start:start + chunk]
        d = np.abs(blk[:, None] - pts[None, :]) ** 2
        out[start:start + chunk] = np.argmin(d, axis=1)
    return out


def qam_demodulate(symbols, constellation: QamConstellation) -> np.ndarray:
    idx = qam_indices(symbols, constellation)
    return constellation.bit_table[idx].reshape(-1)


def random_bits(stream: "RandomStream", count: int) -> np.ndarray:
    return stream.generator.integers(0, 2, size=count, dtype=np.uint8)


# --- random streams -----------------------------------------------------------

def stable_hash(*parts) -> int:
    """63-bit hash of the repr of ``parts``, stable across processes."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(h, "big") >> 1


class RandomStream:
    """Seeded generator identified by ``(seed, stream_id)``.

    Children spawned with :meth:`child` are independent sub-streams and are
    themselves reproducible from the parent identity.
    """

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self._path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    @classmethod
    def for_trial(cls, seed: int, *keys) -> "RandomStream":
        return cls(seed, stable_hash(*keys))

    def child(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, (*self._path, int(index)))

    def complex_normal(self, size, variance: float = 1.0) -> np.ndarray:
        g = self.generator
        return np.sqrt(variance / 2) * (g.standard_normal(size) + 1j * g.standard_normal(size))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"
