"""Modulator and demodulator chains for the five waveforms.

All DFTs are unitary. Time-domain outputs of the multicarrier schemes carry
unit average power per sample for unit-energy symbols (DFT-s-OFDM carries
M_bar/M since only M_bar subcarriers are active).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (ComplexSignal, ConfigError, Domain, FrameGrid, InputShapeError,
                   LatticeSpec, as_grid_values, as_samples)


class Scheme(str, Enum):
    CP_OFDM = "CP_OFDM"
    SC_FDE = "SC_FDE"
    DFT_S_OFDM = "DFT_S_OFDM"
    OQAM_FBMC = "OQAM_FBMC"
    OTFS = "OTFS"


class Mapping(str, Enum):
    LOCALIZED = "localized"
    DISTRIBUTED = "distributed"


CP_SCHEMES = (Scheme.CP_OFDM, Scheme.SC_FDE, Scheme.DFT_S_OFDM)


@dataclass(frozen=True)
class WaveformParams:
    """Numerology of one waveform instance.

    Parameters
    ----------
    scheme : Scheme
    m_count : int
        Subcarriers (or block length) M.
    n_count : int
        Symbols per frame N.
    cp_len : int
        CP samples; per symbol for CP schemes, once per frame for OTFS.
    spread_len : int, optional
        DFT-spreading size M_bar (DFT-s-OFDM only).
    mapping : Mapping
        Subcarrier mapping for DFT-s-OFDM.
    overlap : int
        FBMC overlap factor O.
    sample_rate_hz : float
        Nyquist sample rate, equal to the occupied bandwidth B.
    """

    scheme: Scheme
    m_count: int
    n_count: int = 1
    cp_len: int = 0
    spread_len: int | None = None
    mapping: Mapping = Mapping.LOCALIZED
    overlap: int = 4
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "mapping", Mapping(self.mapping))
        M, N = self.m_count, self.n_count
        if M < 1 or N < 1:
            raise ConfigError("m_count and n_count must be >= 1")
        if self.cp_len < 0:
            raise ConfigError("cp_len must be >= 0")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.scheme in CP_SCHEMES and self.cp_len >= M:
            raise ConfigError(f"cp_len={self.cp_len} must be smaller than M={M}")
        if self.scheme is Scheme.OTFS and self.cp_len >= M * N:
            raise ConfigError("OTFS cp_len must be smaller than the frame length M*N")
        if self.scheme is Scheme.DFT_S_OFDM:
            Mb = self.spread_len
            if Mb is None or not 1 <= Mb <= M:
                raise ConfigError(f"spread_len must satisfy 1 <= M_bar <= M, got {Mb}")
            if self.mapping is Mapping.DISTRIBUTED and M % Mb:
                raise ConfigError("distributed mapping requires M divisible by M_bar")
        if self.scheme is Scheme.OQAM_FBMC:
            if self.overlap not in PHYDYAS_PSI:
                raise ConfigError(f"unsupported overlap factor O={self.overlap}")
            if M % 2:
                raise ConfigError("OQAM staggering requires an even M")

    @property
    def bandwidth_hz(self) -> float:
        return self.sample_rate_hz

    @property
    def delta_f_hz(self) -> float:
        return self.sample_rate_hz / self.m_count

    @property
    def useful_period_s(self) -> float:
        return self.m_count / self.sample_rate_hz

    @property
    def symbols_per_block(self) -> int:
        """Data symbols carried by one block (column)."""
        if self.scheme is Scheme.DFT_S_OFDM:
            return self.spread_len
        return self.m_count

    @property
    def symbol_period_s(self) -> float:
        if self.scheme in CP_SCHEMES:
            return (self.m_count + self.cp_len) / self.sample_rate_hz
        if self.scheme is Scheme.OQAM_FBMC:
            return self.useful_period_s / 2
        return self.useful_period_s

    def lattice(self) -> LatticeSpec:
        return LatticeSpec(self.delta_f_hz, self.symbol_period_s, self.m_count, self.n_count)

    @property
    def signal_length(self) -> int:
        M, N = self.m_count, self.n_count
        if self.scheme in CP_SCHEMES:
            return N * (M + self.cp_len)
        if self.scheme is Scheme.OTFS:
            return M * N + self.cp_len
        return self.overlap * M + (2 * N - 1) * M // 2

    def replace(self, **changes) -> "WaveformParams":
        from dataclasses import replace
        return replace(self, **changes)


def _unitary_dft(x, axis=0):
    return np.fft.fft(x, axis=axis, norm="ortho")


def _unitary_idft(x, axis=0):
    return np.fft.ifft(x, axis=axis, norm="ortho")


def _signed_bins(M: int, oversample: int) -> np.ndarray:
    # FFT bin of each subcarrier once the band is centred in an L*M transform
    m = np.arange(M)
    return np.where(m < (M + 1) // 2, m, oversample * M - (M - m))


def _tf_synthesis(X: np.ndarray, cp_len: int, oversample: int = 1,
                  per_block_cp: bool = True) -> np.ndarray:
    """Rectangular-pulse multicarrier synthesis of a TF grid, column-major output."""
    M, N = X.shape
    L = int(oversample)
    if L < 1:
        raise ConfigError("oversample must be >= 1")
    if L == 1:
        blocks = _unitary_idft(X)
    else:
        Xb = np.zeros((L * M, N), dtype=complex)
        Xb[_signed_bins(M, L)] = X
        blocks = np.fft.ifft(Xb, axis=0) * (L * np.sqrt(M))
    ncp = cp_len * L
    if per_block_cp:
        if ncp:
            blocks = np.vstack([blocks[-ncp:], blocks])
        return blocks.reshape(-1, order="F")
    x = blocks.reshape(-1, order="F")
    return np.concatenate([x[x.size - ncp:], x]) if ncp else x


def _cp_blocks(signal, p: WaveformParams) -> np.ndarray:
    x = as_samples(signal)
    if x.size != p.signal_length:
        raise InputShapeError(f"expected {p.signal_length} samples, got {x.size}")
    M, N, ncp = p.m_count, p.n_count, p.cp_len
    return x.reshape(M + ncp, N, order="F")[ncp:]


def _block_symbols(symbols, rows: int, n_count: int) -> np.ndarray:
    d = as_grid_values(symbols)
    if d.shape[0] != rows:
        raise InputShapeError(f"expected {rows} symbols per block, got {d.shape[0]}")
    if d.shape[1] != n_count:
        raise InputShapeError(f"expected {n_count} blocks, got {d.shape[1]}")
    return d


def _check(p: WaveformParams, *schemes):
    if p.scheme not in schemes:
        raise ConfigError(f"params are for {p.scheme.value}, expected one of "
                          f"{[s.value for s in schemes]}")


# --- CP-OFDM -----------------------------------------------------------------

def ofdm_modulate(grid, p: WaveformParams, oversample: int = 1) -> ComplexSignal:
    """CP-OFDM: unitary IDFT per column, then a CP of ``cp_len`` samples."""
    _check(p, Scheme.CP_OFDM)
    X = as_grid_values(grid, p.m_count, p.n_count)
    x = _tf_synthesis(X, p.cp_len, oversample)
    return ComplexSignal(x, p.sample_rate_hz * oversample)


def ofdm_demodulate(signal, p: WaveformParams) -> FrameGrid:
    """Drop each CP and take the unitary DFT of the useful part."""
    return FrameGrid(_unitary_dft(_cp_blocks(signal, p)), Domain.TF)


# --- SC-FDE ------------------------------------------------------------------

def scfde_modulate(symbols, p: WaveformParams, oversample: int = 1) -> ComplexSignal:
    """CP-prefixed raw symbol blocks; ``symbols`` is M values or an M x N array.

    With ``oversample > 1`` each block is trigonometrically interpolated,
    which is the band-limited view of the same block.
    """
    _check(p, Scheme.SC_FDE)
    d = _block_symbols(symbols, p.m_count, p.n_count)
    if oversample == 1:
        blocks = np.vstack([d[p.m_count - p.cp_len:], d]) if p.cp_len else d
        x = blocks.reshape(-1, order="F")
    else:
        x = _tf_synthesis(_unitary_dft(d), p.cp_len, oversample)
    return ComplexSignal(x, p.sample_rate_hz * oversample)


def scfde_demodulate(signal, p: WaveformParams) -> FrameGrid:
    """Frequency-domain blocks ready for one-tap equalization."""
    return FrameGrid(_unitary_dft(_cp_blocks(signal, p)), Domain.TF)


def scfde_despread(freq_blocks) -> np.ndarray:
    """Back to time-domain symbols after equalization."""
    return _unitary_idft(as_grid_values(freq_blocks))


# --- DFT-s-OFDM --------------------------------------------------------------

def dfts_active_subcarriers(p: WaveformParams) -> np.ndarray:
    M, Mb = p.m_count, p.spread_len
    if p.mapping is Mapping.LOCALIZED:
        return np.arange(Mb)
    return np.arange(Mb) * (M // Mb)


def dfts_ofdm_modulate(symbols, p: WaveformParams, oversample: int = 1) -> ComplexSignal:
    """M_bar-point DFT spreading, subcarrier mapping, M-point IDFT and CP."""
    _check(p, Scheme.DFT_S_OFDM)
    d = _block_symbols(symbols, p.spread_len, p.n_count)
    X = np.zeros((p.m_count, p.n_count), dtype=complex)
    X[dfts_active_subcarriers(p)] = _unitary_dft(d)
    x = _tf_synthesis(X, p.cp_len, oversample)
    return ComplexSignal(x, p.sample_rate_hz * oversample)


def dfts_ofdm_demodulate(signal, p: WaveformParams) -> FrameGrid:
    """Active-subcarrier values (M_bar x N), still spread."""
    Y = _unitary_dft(_cp_blocks(signal, p))
    return FrameGrid(Y[dfts_active_subcarriers(p)], Domain.TF)


def dfts_despread(active) -> np.ndarray:
    return _unitary_idft(as_grid_values(active))


# --- OQAM/FBMC ---------------------------------------------------------------

# frequency samples of the PHYDYAS prototype for each overlap factor
PHYDYAS_PSI = {
    2: (1.0, np.sqrt(2) / 2),
    3: (1.0, 0.911438, 0.411438),
    4: (1.0, 0.97195983, np.sqrt(2) / 2, 0.23514695),
}


@dataclass(frozen=True)
class PrototypeFilter:
    coefficients: np.ndarray
    overlap: int

    @property
    def length(self) -> int:
        return self.coefficients.size

    @property
    def unit_energy(self) -> np.ndarray:
        c = self.coefficients
        return c / np.linalg.norm(c)


def _prototype_samples(O: int, M: int, oversample: int = 1) -> np.ndarray:
    psi = PHYDYAS_PSI[O]
    Lp = O * M
    t = np.arange(Lp * oversample) / oversample
    g = np.ones_like(t)
    for o in range(1, O):
        g += 2 * (-1) ** o * psi[o] * np.cos(2 * np.pi * o * (t + 1) / Lp)
    return g


def fbmc_prototype(O: int, M: int) -> PrototypeFilter:
    """PHYDYAS prototype of length O*M, scaled to a unit peak.

    The response is symmetric about ``i = O*M/2 - 1`` where it peaks.
    """
    if O not in PHYDYAS_PSI:
        raise ConfigError(f"unsupported overlap factor O={O}; use 2, 3 or 4")
    g = _prototype_samples(O, M)
    peak = 1 + 2 * sum(PHYDYAS_PSI[O][1:])
    g = g / peak
    g.setflags(write=False)
    return PrototypeFilter(g, O)


def oqam_split(grid) -> np.ndarray:
    """Complex M x N QAM grid -> real M x 2N OQAM grid.

    Even subcarriers send the real part first, odd subcarriers the
    imaginary part first.
    """
    d = as_grid_values(grid)
    M, N = d.shape
    a = np.empty((M, 2 * N))
    even = (np.arange(M) % 2 == 0)[:, None]
    a[:, 0::2] = np.where(even, d.real, d.imag)
    a[:, 1::2] = np.where(even, d.imag, d.real)
    return a


def oqam_combine(a) -> np.ndarray:
    """Inverse of :func:`oqam_split`."""
    a = np.asarray(a, dtype=float)
    M = a.shape[0]
    even = (np.arange(M) % 2 == 0)[:, None]
    first, second = a[:, 0::2], a[:, 1::2]
    return np.where(even, first + 1j * second, second + 1j * first)


def _fbmc_phase(M: int, n_half: int, center: int, oversample: int = 1) -> np.ndarray:
    m = np.arange(M)[:, None]
    n = np.arange(n_half)[None, :]
    ms = np.where(np.arange(M) < (M + 1) // 2, np.arange(M), np.arange(M) - M)[:, None]
    if oversample == 1:
        ms = m
    return np.exp(0.5j * np.pi * (m + n)) * np.exp(-2j * np.pi * ms * center / M)


def fbmc_modulate(grid, p: WaveformParams, oversample: int = 1) -> ComplexSignal:
    """Polyphase OQAM synthesis filter bank.

    Each half-symbol is an M-point IFFT, periodically extended to the
    prototype length, windowed by the prototype and overlap-added with a hop
    of M/2 samples.
    """
    _check(p, Scheme.OQAM_FBMC)
    d = as_grid_values(grid, p.m_count, p.n_count)
    M, O, L = p.m_count, p.overlap, int(oversample)
    a = oqam_split(d)
    n_half = a.shape[1]
    g = _prototype_samples(O, M, L)
    g = g / np.sqrt(np.sum(g ** 2) / L)
    center = O * M // 2 - 1
    coeff = a * _fbmc_phase(M, n_half, center, L)
    if L == 1:
        s = np.fft.ifft(coeff, axis=0) * M
    else:
        big = np.zeros((L * M, n_half), dtype=complex)
        big[_signed_bins(M, L)] = coeff
        s = np.fft.ifft(big, axis=0) * (L * M)
    blocks = np.tile(s, (O, 1)) * g[:, None]
    hop = M * L // 2
    # Lp spans 2*O hops: add each hop-sized slice of every block in one shot
    out = np.zeros((n_half - 1 + 2 * O, hop), dtype=complex)
    parts = blocks.reshape(2 * O, hop, n_half)
    for j in range(2 * O):
        out[j:j + n_half] += parts[j].T
    return ComplexSignal(out.reshape(-1), p.sample_rate_hz * L)


def fbmc_analysis(signal, p: WaveformParams) -> np.ndarray:
    """Matched-filter outputs (complex, M x 2N) after phase compensation.

    The real part carries the OQAM symbols; the imaginary part holds the
    intrinsic interference.
    """
    _check(p, Scheme.OQAM_FBMC)
    x = as_samples(signal)
    if x.size != p.signal_length:
        raise InputShapeError(f"expected {p.signal_length} samples, got {x.size}")
    M, O = p.m_count, p.overlap
    n_half = 2 * p.n_count
    g = _prototype_samples(O, M)
    g = g / np.linalg.norm(g)
    idx = np.arange(O * M)[:, None] + np.arange(n_half)[None, :] * (M // 2)
    fold = (x[idx] * g[:, None]).reshape(O, M, n_half).sum(axis=0)
    y = np.fft.fft(fold, axis=0)
    return y * np.conj(_fbmc_phase(M, n_half, O * M // 2 - 1))


def fbmc_demodulate(signal, p: WaveformParams) -> FrameGrid:
    """Matched filter, real part, then recombination of the staggered halves."""
    return FrameGrid(oqam_combine(fbmc_analysis(signal, p).real), Domain.TF)


# --- OTFS --------------------------------------------------------------------

def otfs_modulate(grid, p: WaveformParams, oversample: int = 1) -> ComplexSignal:
    """ISFFT + Heisenberg with rectangular pulses: x = vec(D_DD F_N^H) plus one CP."""
    _check(p, Scheme.OTFS)
    D = as_grid_values(grid, p.m_count, p.n_count)
    X = _unitary_idft(D, axis=1)
    if oversample == 1:
        x = X.reshape(-1, order="F")
        if p.cp_len:
            x = np.concatenate([x[x.size - p.cp_len:], x])
    else:
        x = _tf_synthesis(_unitary_dft(X), p.cp_len, oversample, per_block_cp=False)
    return ComplexSignal(x, p.sample_rate_hz * oversample)


def otfs_payload(signal, p: WaveformParams) -> np.ndarray:
    x = as_samples(signal)
    if x.size != p.signal_length:
        raise InputShapeError(f"expected {p.signal_length} samples, got {x.size}")
    return x[p.cp_len:]


def otfs_demodulate(signal, p: WaveformParams) -> FrameGrid:
    """Drop the CP, reshape column-major and right-multiply by F_N."""
    Y = otfs_payload(signal, p).reshape(p.m_count, p.n_count, order="F")
    return FrameGrid(_unitary_dft(Y, axis=1), Domain.DD)


# --- generic dispatch --------------------------------------------------------

def modulate(data, p: WaveformParams, oversample: int = 1) -> ComplexSignal:
    """Dispatch on ``p.scheme``; ``data`` is symbols_per_block x N."""
    fn = {
        Scheme.CP_OFDM: ofdm_modulate,
        Scheme.SC_FDE: scfde_modulate,
        Scheme.DFT_S_OFDM: dfts_ofdm_modulate,
        Scheme.OQAM_FBMC: fbmc_modulate,
        Scheme.OTFS: otfs_modulate,
    }[p.scheme]
    return fn(data, p, oversample=oversample)


# --- pulse shaping -----------------------------------------------------------

def rc_kernel(t, rolloff: float) -> np.ndarray:
    """Raised-cosine impulse response at normalized times ``t = t/T``.

    The removable singularity at ``|t| = 1/(2 alpha)`` takes the analytic
    limit ``(pi/4) sinc(1/(2 alpha))``.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ConfigError(f"roll-off must lie in [0, 1], got {rolloff}")
    t = np.asarray(t, dtype=float)
    a = rolloff
    out = np.empty_like(t)
    if a == 0:
        out[...] = np.sinc(t)
        return out
    sing = np.isclose(np.abs(t), 1 / (2 * a), rtol=0, atol=1e-12)
    tt = t[~sing]
    out[~sing] = np.cos(np.pi * a * tt) * np.sinc(tt) / (1 - (2 * a * tt) ** 2)
    out[sing] = np.pi / 4 * np.sinc(1 / (2 * a))
    return out


def rc_taps(rolloff: float, span_symbols: int = 6, oversample: int = 4) -> np.ndarray:
    """Unit-energy RC taps covering ``span_symbols`` symbol periods."""
    half = span_symbols * oversample // 2
    h = rc_kernel(np.arange(-half, half + 1) / oversample, rolloff)
    return h / np.linalg.norm(h)


def apply_pulse_shaping(signal, rolloff: float, span_symbols: int = 6,
                        oversample: int = 4) -> ComplexSignal:
    """Zero-insert upsampling followed by RC filtering (full convolution)."""
    if oversample < 1:
        raise ConfigError("oversample must be >= 1")
    x = as_samples(signal)
    up = np.zeros(x.size * oversample, dtype=complex)
    up[::oversample] = x
    y = np.convolve(up, rc_taps(rolloff, span_symbols, oversample))
    fs = signal.sample_rate_hz if isinstance(signal, ComplexSignal) else 1.0
    return ComplexSignal(y, fs * oversample)
