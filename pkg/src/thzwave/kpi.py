"""Key performance indicators: PAPR, PSD/OOB, SE, latency, complexity, BER."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy.stats import norm

from .core import ConfigError, UndefinedInputError, as_samples
from .waveforms import Scheme, WaveformParams


def db(x):
    return 10 * np.log10(x)


# --- PAPR --------------------------------------------------------------------

def papr(signal, observation_len: int | None = None, offset: int = 0) -> float:
    """max|x|^2 / mean|x|^2 over ``observation_len`` samples from ``offset`` (linear)."""
    x = as_samples(signal)
    n = x.size - offset if observation_len is None else observation_len
    if n < 1 or offset + n > x.size:
        raise ConfigError(f"window of {n} samples at {offset} exceeds signal length {x.size}")
    p = np.abs(x[offset:offset + n]) ** 2
    mean = p.mean()
    if mean == 0:
        raise UndefinedInputError("PAPR of an all-zero window is undefined")
    return float(p.max() / mean)


def papr_windows(signal, window: int, offset: int = 0, hop: int | None = None,
                 count: int | None = None) -> np.ndarray:
    """PAPR (linear) of consecutive windows, vectorized."""
    x = as_samples(signal)
    hop = window if hop is None else hop
    avail = (x.size - offset - window) // hop + 1
    count = avail if count is None else count
    if count < 1 or count > avail:
        raise ConfigError(f"cannot fit {count} windows of {window} samples")
    idx = offset + np.arange(count)[:, None] * hop + np.arange(window)[None, :]
    p = np.abs(x[idx]) ** 2
    mean = p.mean(axis=1)
    if np.any(mean == 0):
        raise UndefinedInputError("PAPR of an all-zero window is undefined")
    return p.max(axis=1) / mean


@dataclass(frozen=True)
class CcdfCurve:
    thresholds_db: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds_db, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        if t.shape != p.shape:
            raise ConfigError("thresholds and probabilities must match")
        if np.any(np.diff(t) < 0):
            raise ConfigError("thresholds must be sorted")
        object.__setattr__(self, "thresholds_db", t)
        object.__setattr__(self, "probabilities", p)

    def threshold_at(self, probability: float) -> float:
        """Threshold (dB) where the curve crosses ``probability``, log-linear interpolation."""
        p = self.probabilities
        lp = np.log10(np.maximum(p, 1e-300))
        target = np.log10(probability)
        above = np.flatnonzero(p >= probability)
        if above.size == 0 or above[-1] == p.size - 1:
            raise UndefinedInputError(f"curve does not cross P={probability:g}")
        i = above[-1]
        if p[i + 1] == 0:
            # step to zero: crossing lies at the next threshold
            return float(self.thresholds_db[i + 1])
        f = (lp[i] - target) / (lp[i] - lp[i + 1])
        return float(self.thresholds_db[i] + f * (self.thresholds_db[i + 1] - self.thresholds_db[i]))


def empirical_ccdf(papr_values, thresholds_db) -> CcdfCurve:
    """P(PAPR > threshold) from linear PAPR samples."""
    v = np.sort(db(np.asarray(papr_values, dtype=float)))
    t = np.asarray(thresholds_db, dtype=float)
    prob = 1 - np.searchsorted(v, t, side="right") / v.size
    return CcdfCurve(t, prob)


def papr_quantile_db(papr_values, probability: float) -> float:
    """Threshold exceeded with the given probability (empirical quantile)."""
    return float(db(np.quantile(np.asarray(papr_values, dtype=float), 1 - probability)))


def papr_ccdf_theory(scheme, m_count: int, n_count: int, thresholds_db) -> CcdfCurve:
    """1 - (1 - exp(-gamma))^K with K = M (CP-OFDM) or M N (OTFS)."""
    scheme = Scheme(scheme)
    if scheme is Scheme.CP_OFDM:
        k = m_count
    elif scheme is Scheme.OTFS:
        k = m_count * n_count
    else:
        raise ConfigError(f"no closed form for {scheme.value}")
    t = np.asarray(thresholds_db, dtype=float)
    gamma = 10 ** (t / 10)
    return CcdfCurve(t, -np.expm1(k * np.log1p(-np.exp(-gamma))))


def papr_max_otfs_db(n_count: int) -> float:
    if n_count < 1:
        raise ConfigError("N must be >= 1")
    return float(db(n_count))


# --- PSD and spectral masks ---------------------------------------------------

def psd_estimate(signal, segment_len: int, overlap_frac: float = 0.5,
                 sample_rate_hz: float | None = None):
    """Two-sided Welch PSD (Hann window), frequencies ascending.

    Returns ``(freqs_hz, psd_db)`` with the density in dB per Hz; the density
    integrates to the mean signal power.
    """
    x = as_samples(signal)
    fs = sample_rate_hz if sample_rate_hz is not None else getattr(signal, "sample_rate_hz", 1.0)
    if segment_len < 2 or segment_len > x.size:
        raise ConfigError(f"segment_len={segment_len} must lie in [2, {x.size}]")
    if not 0 <= overlap_frac < 1:
        raise ConfigError("overlap_frac must lie in [0, 1)")
    f, p = sps.welch(x, fs=fs, window="hann", nperseg=segment_len,
                     noverlap=int(segment_len * overlap_frac), detrend=False,
                     return_onesided=False, scaling="density")
    f, p = np.fft.fftshift(f), np.fft.fftshift(p)
    return f, db(np.maximum(p, 1e-300))


@dataclass(frozen=True)
class SpectralMask:
    """Piecewise-linear mask: (offset from centre in Hz, level in dBr)."""

    offsets_hz: np.ndarray
    levels_dbr: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        o = np.asarray(self.offsets_hz, dtype=float)
        lv = np.asarray(self.levels_dbr, dtype=float)
        if o.shape != lv.shape or o.size < 2:
            raise ConfigError("a mask needs at least two matching breakpoints")
        if np.any(np.diff(o) <= 0):
            raise ConfigError("mask offsets must be strictly increasing")
        object.__setattr__(self, "offsets_hz", o)
        object.__setattr__(self, "levels_dbr", lv)

    @classmethod
    def from_breakpoints(cls, breakpoints, symmetric=True):
        o, lv = zip(*breakpoints)
        return cls(np.array(o), np.array(lv), symmetric)

    def span(self):
        if self.symmetric:
            return -self.offsets_hz[-1], self.offsets_hz[-1]
        return self.offsets_hz[0], self.offsets_hz[-1]

    def level_at(self, offset_hz) -> np.ndarray:
        off = np.asarray(offset_hz, dtype=float)
        if self.symmetric:
            off = np.abs(off)
        return np.interp(off, self.offsets_hz, self.levels_dbr)


def load_mask_csv(path, symmetric: bool = True) -> SpectralMask:
    with Path(path).open() as fh:
        rows = [r for r in csv.DictReader(fh)]
    return SpectralMask.from_breakpoints(
        [(float(r["offset_hz"]), float(r["level_dbr"])) for r in rows], symmetric)


@dataclass(frozen=True)
class OobReport:
    worst_margin_db: float
    violating_freqs_hz: np.ndarray
    passed: bool
    oob_margin_db: float = float("nan")   # worst margin where the mask is below 0 dBr


def oob_check(freqs_hz, psd_db, mask: SpectralMask, center_hz: float = 0.0,
              reference_db: float | None = None) -> OobReport:
    """Compare a PSD, relative to its peak (or ``reference_db``), with a mask.

    Every PSD bin must lie inside the mask's span around ``center_hz``.
    """
    f = np.asarray(freqs_hz, dtype=float)
    p = np.asarray(psd_db, dtype=float)
    off = f - center_hz
    lo, hi = mask.span()
    tol = 1e-9 * max(abs(lo), abs(hi))
    if off.min() < lo - tol or off.max() > hi + tol:
        raise ConfigError(f"PSD spans offsets [{off.min():.6g}, {off.max():.6g}] Hz, "
                          f"mask covers [{lo:.6g}, {hi:.6g}] Hz")
    ref = p.max() if reference_db is None else reference_db
    level = mask.level_at(off)
    margin = level - (p - ref)
    bad = margin < 0
    oob = margin[level < 0]
    return OobReport(float(margin.min()), f[bad], bool(not bad.any()),
                     float(oob.min()) if oob.size else float("nan"))


def sidelobe_level_db(freqs_hz, psd_db, offset_hz: float) -> float:
    """PSD (dB relative to peak) at ``offset_hz``, interpolated, taking the
    worse of the two sides."""
    f = np.asarray(freqs_hz)
    p = np.asarray(psd_db) - np.max(psd_db)
    return float(max(np.interp(offset_hz, f, p), np.interp(-offset_hz, f, p)))


# --- SE / latency / complexity -------------------------------------------------

def spectral_efficiency(scheme, p: WaveformParams) -> float:
    scheme = Scheme(scheme)
    M, N, ncp = p.m_count, p.n_count, p.cp_len
    if scheme in (Scheme.CP_OFDM, Scheme.SC_FDE):
        return M / (M + ncp)
    if scheme is Scheme.DFT_S_OFDM:
        return p.spread_len / (M + ncp)
    if scheme is Scheme.OQAM_FBMC:
        return N / (N + p.overlap - 0.5)
    return M / (M + ncp / N)


def e2e_latency_s(scheme, p: WaveformParams) -> float:
    scheme = Scheme(scheme)
    M, N, ncp, fs = p.m_count, p.n_count, p.cp_len, p.sample_rate_hz
    if fs <= 0:
        raise ConfigError("sample rate must be positive")
    if scheme in (Scheme.CP_OFDM, Scheme.SC_FDE, Scheme.DFT_S_OFDM):
        return N * (M + ncp) / fs
    if scheme is Scheme.OQAM_FBMC:
        return M * (N + p.overlap - 0.5) / fs
    return (N * M + ncp) / fs


def _pow2(n: int, name: str):
    if n < 1 or n & (n - 1):
        raise ConfigError(f"{name}={n} must be a power of two for the split-radix count")


def fft_real_mults(m: int) -> float:
    """Real multiplications of an m-point split-radix FFT: m(log2 m - 3) + 4."""
    _pow2(m, "FFT size")
    return float(m * (np.log2(m) - 3) + 4)


@dataclass(frozen=True)
class ComplexityReport:
    per_symbol_real_mults: float
    per_second_real_mults: float


def complexity_report(scheme, p: WaveformParams) -> ComplexityReport:
    scheme = Scheme(scheme)
    M, N, ncp, fs = p.m_count, p.n_count, p.cp_len, p.sample_rate_hz
    if scheme is Scheme.OTFS:
        _pow2(N, "N")
        c = fft_real_mults(N) + 4 * (N + ncp / M)
        return ComplexityReport(c, M * c / (N * M + ncp) * fs)
    _pow2(M, "M")
    if scheme in (Scheme.CP_OFDM, Scheme.SC_FDE):
        c = fft_real_mults(M) + 4 * (M + ncp)
        return ComplexityReport(c, c / (M + ncp) * fs)
    if scheme is Scheme.DFT_S_OFDM:
        _pow2(p.spread_len, "M_bar")
        c = fft_real_mults(M) + fft_real_mults(p.spread_len) + 4 * (M + ncp)
        return ComplexityReport(c, c / (M + ncp) * fs)
    c = 2 * fft_real_mults(M) + 4 * p.overlap * M + 4 * M
    return ComplexityReport(c, N * c / (M * (N + p.overlap - 0.5)) * fs)


# --- BER aggregation -------------------------------------------------------------

Z95 = float(norm.ppf(0.975))


@dataclass(frozen=True)
class BerCounter:
    """Mergeable (errors, bits) tally."""

    errors: int = 0
    bits: int = 0

    def __add__(self, other: "BerCounter") -> "BerCounter":
        return BerCounter(self.errors + other.errors, self.bits + other.bits)


def wilson_interval(errors: int, bits: int, z: float = Z95):
    if bits <= 0:
        raise ConfigError("cannot form an interval from zero bits")
    p = errors / bits
    den = 1 + z * z / bits
    mid = (p + z * z / (2 * bits)) / den
    half = z * np.sqrt(p * (1 - p) / bits + z * z / (4 * bits * bits)) / den
    lo = 0.0 if errors == 0 else max(0.0, mid - half)
    hi = 1.0 if errors == bits else min(1.0, mid + half)
    return float(lo), float(hi)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    ber: float
    ci_low: float
    ci_high: float
    bits: int
    errors: int

    def overlaps(self, other: "BerPoint") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def ber_aggregate(snr_db: float, counters) -> BerPoint:
    """Pool counters of one SNR point and attach a Wilson 95% interval."""
    counters = list(counters)
    if not counters:
        raise ConfigError("need at least one trial per SNR point")
    total = sum(counters, BerCounter())
    lo, hi = wilson_interval(total.errors, total.bits)
    return BerPoint(float(snr_db), total.errors / total.bits, lo, hi, total.bits, total.errors)


def snr_at_ber(points, target: float) -> float:
    """SNR where a BER curve crosses ``target`` (log-BER linear interpolation)."""
    pts = sorted(points, key=lambda b: b.snr_db)
    for a, b in zip(pts, pts[1:]):
        if a.ber >= target > b.ber:
            if b.ber == 0:
                return b.snr_db
            la, lb = np.log10(a.ber), np.log10(b.ber)
            return float(a.snr_db + (la - np.log10(target)) / (la - lb) * (b.snr_db - a.snr_db))
    raise UndefinedInputError(f"BER curve never crosses {target:g}")


def qam4_awgn_ber(ebn0_db) -> np.ndarray:
    """Gray 4-QAM bit error probability Q(sqrt(2 Eb/N0))."""
    return norm.sf(np.sqrt(2 * 10 ** (np.asarray(ebn0_db, dtype=float) / 10)))


# --- CSV writers -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
