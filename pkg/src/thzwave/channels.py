"""Channel generators and application operators.

Covers AWGN, cluster/ray tapped delay lines, integer delay-Doppler
channels, and a per-subcarrier ULA gain that models beam split.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import (SPEED_OF_LIGHT, ConfigError, InputShapeError, RandomStream,
                   as_samples, like, max_doppler_hz)


# --- AWGN --------------------------------------------------------------------

def awgn_add(signal, noise_power: float, stream: RandomStream):
    """Add circular complex Gaussian noise of variance ``noise_power`` per sample."""
    if noise_power < 0:
        raise ConfigError("noise power must be non-negative")
    x = as_samples(signal)
    if noise_power == 0:
        return like(signal, x.copy())
    return like(signal, x + stream.complex_normal(x.size, noise_power))


# --- tapped delay line -------------------------------------------------------

@dataclass(frozen=True)
class TdlChannel:
    taps: np.ndarray
    tap_spacing_s: float

    def __post_init__(self):
        h = np.asarray(self.taps, dtype=complex).reshape(-1)
        if h.size < 1 or not np.all(np.isfinite(h)):
            raise ConfigError("a TDL needs at least one finite tap")
        if self.tap_spacing_s <= 0:
            raise ConfigError("tap spacing must be positive")
        h.setflags(write=False)
        object.__setattr__(self, "taps", h)

    @property
    def length(self) -> int:
        return self.taps.size

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))

    @property
    def rms_delay_spread_s(self) -> float:
        p = np.abs(self.taps) ** 2
        tau = np.arange(self.length) * self.tap_spacing_s
        mean = np.sum(p * tau) / p.sum()
        return float(np.sqrt(np.sum(p * (tau - mean) ** 2) / p.sum()))

    @property
    def max_delay_s(self) -> float:
        nz = np.flatnonzero(self.taps)
        return float(nz[-1] * self.tap_spacing_s) if nz.size else 0.0


@dataclass(frozen=True)
class ClusterRayParams:
    """Double-exponential cluster/ray profile. Rates in 1/ns, decays in ns."""

    cluster_rate: float = 0.13
    ray_rate: float = 0.37
    cluster_decay: float = 3.12
    ray_decay: float = 0.91
    absorption_coeff: float = 0.0033
    distance_m: float = 3.0

    def __post_init__(self):
        for name in ("cluster_rate", "ray_rate", "cluster_decay", "ray_decay"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.absorption_coeff < 0 or self.distance_m <= 0:
            raise ConfigError("absorption must be >= 0 and distance > 0")


def path_gain(params: ClusterRayParams, carrier_hz: float) -> float:
    """Scalar power gain from spreading and molecular absorption, exp(-k d)/d^2 shaped."""
    d = params.distance_m
    spreading = (SPEED_OF_LIGHT / (4 * np.pi * carrier_hz * d)) ** 2
    return float(spreading * np.exp(-params.absorption_coeff * d))


def generate_cluster_ray_tdl(params: ClusterRayParams, ts: float, stream: RandomStream,
                             n_taps: int | None = None,
                             k_factor_db: float | None = 10.0) -> TdlChannel:
    """Draw one cluster/ray channel quantized to the ``ts`` grid.

    Parameters
    ----------
    n_taps : int, optional
        Keep delays below ``n_taps * ts``. Defaults to five cluster decay
        constants plus five ray decay constants.
    k_factor_db : float or None
        Power ratio of a deterministic delay-0 LoS tap to the multipath.
        ``None`` gives multipath only, ``inf`` a single LoS tap.

    Returns
    -------
    TdlChannel with unit total power.
    """
    if ts <= 0:
        raise ConfigError("ts must be positive")
    ts_ns = ts * 1e9
    if n_taps is None:
        n_taps = int(np.ceil(5 * (params.cluster_decay + params.ray_decay) / ts_ns)) + 1
    horizon = n_taps * ts_ns
    g = stream.generator
    h = np.zeros(n_taps, dtype=complex)
    los_only = k_factor_db is not None and np.isinf(k_factor_db) and k_factor_db > 0
    if not los_only:
        delays, powers = [], []
        tc = 0.0
        while tc < horizon:
            tr = 0.0
            while tc + tr < horizon:
                delays.append(tc + tr)
                powers.append(np.exp(-tc / params.cluster_decay - tr / params.ray_decay))
                tr += g.exponential(1 / params.ray_rate)
            tc += g.exponential(1 / params.cluster_rate)
        powers = np.asarray(powers)
        gains = np.sqrt(powers / 2) * (g.standard_normal(powers.size)
                                       + 1j * g.standard_normal(powers.size))
        idx = np.floor(np.asarray(delays) / ts_ns + 0.5).astype(int)
        keep = idx < n_taps
        np.add.at(h, idx[keep], gains[keep])
        h /= np.linalg.norm(h)
    los_phase = np.exp(2j * np.pi * g.random())
    if los_only:
        h[:] = 0
        h[0] = los_phase
    elif k_factor_db is not None:
        K = 10 ** (k_factor_db / 10)
        h *= np.sqrt(1 / (K + 1))
        h[0] += np.sqrt(K / (K + 1)) * los_phase
        h /= np.linalg.norm(h)
    nz = np.flatnonzero(h)
    return TdlChannel(h[:nz[-1] + 1], ts)


def tdl_apply(signal, ch: TdlChannel):
    """Linear convolution with the taps."""
    x = as_samples(signal)
    return like(signal, np.convolve(x, ch.taps))


def tdl_frequency_response(ch, m_count: int) -> np.ndarray:
    """M-point DFT of the zero-padded taps (eigenvalues of the circulant)."""
    h = ch.taps if isinstance(ch, TdlChannel) else np.asarray(ch, dtype=complex)
    if h.size > m_count:
        raise ConfigError(f"{h.size} taps do not fit in an {m_count}-point DFT")
    return np.fft.fft(h, m_count)


# --- delay-Doppler -----------------------------------------------------------

@dataclass(frozen=True)
class DdChannel:
    """Paths ``(gain, delay_idx, doppler_idx)``, sorted with duplicates merged."""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray

    @classmethod
    def from_paths(cls, paths) -> "DdChannel":
        merged: dict[tuple[int, int], complex] = {}
        for h, l, k in paths:
            if int(l) < 0:
                raise ConfigError("delay index must be >= 0")
            key = (int(l), int(k))
            merged[key] = merged.get(key, 0) + complex(h)
        keys = sorted(merged)
        g = np.array([merged[k] for k in keys], dtype=complex)
        l = np.array([k[0] for k in keys], dtype=int)
        k = np.array([k[1] for k in keys], dtype=int)
        return cls(g, l, k)

    @property
    def paths(self):
        return list(zip(self.gains, self.delays, self.dopplers))

    @property
    def path_count(self) -> int:
        return self.gains.size

    def check_lattice(self, m_count: int, n_count: int):
        if np.any(self.delays >= m_count) or np.any(np.abs(self.dopplers) >= n_count):
            raise ConfigError(f"path indices outside the {m_count}x{n_count} DD lattice")


def dd_apply(payload, ch: DdChannel, m_count: int, n_count: int) -> np.ndarray:
    """y[u] = sum_i h_i exp(j2pi k_i (u - l_i)/MN) x[(u - l_i) mod MN]."""
    x = np.asarray(payload, dtype=complex).reshape(-1)
    MN = m_count * n_count
    if x.size != MN:
        raise InputShapeError(f"payload must have {MN} samples, got {x.size}")
    ch.check_lattice(m_count, n_count)
    u = np.arange(MN)
    y = np.zeros(MN, dtype=complex)
    for h, l, k in ch.paths:
        y += h * np.exp(2j * np.pi * k * (u - l) / MN) * np.roll(x, l)
    return y


def dd_build_matrix(ch: DdChannel, m_count: int, n_count: int) -> sp.csr_matrix:
    """Sparse H_DD = sum_i h_i Pi^l_i Delta^k_i (call ``.toarray()`` for dense)."""
    ch.check_lattice(m_count, n_count)
    MN = m_count * n_count
    u = np.arange(MN)
    rows, cols, vals = [], [], []
    for h, l, k in ch.paths:
        rows.append(u)
        cols.append((u - l) % MN)
        vals.append(h * np.exp(2j * np.pi * k * (u - l) / MN))
    if not rows:
        return sp.csr_matrix((MN, MN), dtype=complex)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(MN, MN))


class DdEffectiveChannel:
    """DD-domain effective channel (F_N kron I) H_DD (F_N^H kron I).

    Kept in factored form: the time-domain sparse H_DD plus the unitary
    SFFT on either side. :meth:`to_sparse` builds the DD-domain matrix
    directly from per-path closed forms.
    """

    def __init__(self, ch: DdChannel, m_count: int, n_count: int):
        ch.check_lattice(m_count, n_count)
        self.channel = ch
        self.m_count = m_count
        self.n_count = n_count
        self.h_time = dd_build_matrix(ch, m_count, n_count)

    @property
    def shape(self):
        MN = self.m_count * self.n_count
        return (MN, MN)

    def to_time(self, y_dd) -> np.ndarray:
        M, N = self.m_count, self.n_count
        Y = np.asarray(y_dd, dtype=complex).reshape(M, N, order="F")
        return np.fft.ifft(Y, axis=1, norm="ortho").reshape(-1, order="F")

    def to_dd(self, x_t) -> np.ndarray:
        M, N = self.m_count, self.n_count
        X = np.asarray(x_t, dtype=complex).reshape(M, N, order="F")
        return np.fft.fft(X, axis=1, norm="ortho").reshape(-1, order="F")

    def matvec(self, x_dd) -> np.ndarray:
        return self.to_dd(self.h_time @ self.to_time(x_dd))

    def __matmul__(self, x):
        return self.matvec(x)

    @property
    def is_time_invariant(self) -> bool:
        return bool(np.all(self.channel.dopplers == 0))

    def to_sparse(self) -> sp.csr_matrix:
        M, N = self.m_count, self.n_count
        MN = M * N
        a = np.repeat(np.arange(M)[:, None], N, axis=1)
        kk = np.repeat(np.arange(N)[None, :], M, axis=0)
        row = (a + kk * M).reshape(-1, order="F")
        a = a.reshape(-1, order="F")
        kk = kk.reshape(-1, order="F")
        rows, cols, vals = [], [], []
        for h, l, k in self.channel.paths:
            q = (kk - k) % N
            wrap = a < l
            src = (a - l) % M
            phase = np.exp(2j * np.pi * k * (a - l) / MN)
            phase = np.where(wrap, phase * np.exp(-2j * np.pi * q / N), phase)
            rows.append(row)
            cols.append(src + q * M)
            vals.append(h * phase)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(MN, MN))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def dd_effective_channel(ch: DdChannel, m_count: int, n_count: int) -> DdEffectiveChannel:
    return DdEffectiveChannel(ch, m_count, n_count)


def dd_from_mobility(tdl: TdlChannel, speed_mps: float, carrier_hz: float, m_count: int,
                     n_count: int, delta_f_hz: float, stream: RandomStream) -> DdChannel:
    """Attach an integer Doppler index to each non-zero tap.

    ``k_i = round(N T nu_max cos(theta_i))`` with ``theta_i`` uniform and
    ``T = 1/delta_f``; the tap spacing must equal ``1/(M delta_f)``.
    """
    if speed_mps < 0:
        raise ConfigError("speed must be non-negative")
    nu_max = max_doppler_hz(speed_mps, carrier_hz)
    if nu_max >= delta_f_hz:
        raise ConfigError(f"nu_max={nu_max:.6g} Hz >= delta_f={delta_f_hz:.6g} Hz violates "
                          "nu_max < delta_f < 1/tau_max")
    if tdl.max_delay_s > 0 and delta_f_hz >= 1 / tdl.max_delay_s:
        raise ConfigError(f"delta_f={delta_f_hz:.6g} Hz >= 1/tau_max violates "
                          "nu_max < delta_f < 1/tau_max")
    if not np.isclose(tdl.tap_spacing_s * m_count * delta_f_hz, 1.0):
        raise ConfigError("TDL tap spacing must equal the delay resolution 1/(M delta_f)")
    l = np.flatnonzero(tdl.taps)
    theta = stream.generator.uniform(-np.pi, np.pi, l.size)
    k = np.rint(n_count / delta_f_hz * nu_max * np.cos(theta)).astype(int)
    return DdChannel.from_paths(zip(tdl.taps[l], l, k))


def ltv_apply(signal, ch: DdChannel, m_count: int, n_count: int, origin: int = 0):
    """Linear time-variant channel over a whole signal (CP included).

    ``y[u] = sum_i h_i exp(j2pi k_i (u - origin - l_i)/MN) x[u - l_i]``;
    output length is input length + max delay. With ``origin`` at the start
    of an OTFS payload this reproduces :func:`dd_apply` after CP removal.
    """
    x = as_samples(signal)
    MN = m_count * n_count
    lmax = int(ch.delays.max()) if ch.path_count else 0
    u = np.arange(x.size + lmax)
    y = np.zeros(u.size, dtype=complex)
    for h, l, k in ch.paths:
        seg = np.zeros(u.size, dtype=complex)
        seg[l:l + x.size] = x
        y += h * np.exp(2j * np.pi * k * (u - origin - l) / MN) * seg
    return like(signal, y)


# --- beam split --------------------------------------------------------------

@dataclass(frozen=True)
class BeamSplitParams:
    ae_count_tx: int = 32
    ae_count_rx: int = 32
    f_c_hz: float = 325e9
    bw_hz: float = 50e9
    subcarriers: int = 256
    steer_angle_rad: float = np.pi / 6
    distance_m: float = 3.0

    def __post_init__(self):
        if self.ae_count_tx < 1 or self.ae_count_rx < 1:
            raise ConfigError("antenna counts must be positive")
        if not abs(self.steer_angle_rad) < np.pi / 2:
            raise ConfigError("steering angle must lie strictly inside (-pi/2, pi/2)")

    def subcarrier_frequencies(self) -> np.ndarray:
        """Absolute frequency of each subcarrier, ascending, f_c at index M/2."""
        M = self.subcarriers
        return self.f_c_hz + (np.arange(M) - M // 2) * self.bw_hz / M


def _element_delays(q: int, theta: float, f_c: float) -> np.ndarray:
    # half-wavelength ULA at f_c, centred on the array phase reference
    pos = np.arange(q) - (q - 1) / 2
    return pos * np.sin(theta) / (2 * f_c)


def array_gain(q: int, theta: float, freqs_hz, f_c: float) -> np.ndarray:
    """|a(theta, f)^H w(theta, f_c)|^2 / Q^2 for a Q-element ULA."""
    tau = _element_delays(q, theta, f_c)
    f = np.asarray(freqs_hz, dtype=float)
    af = np.exp(2j * np.pi * np.outer(f - f_c, tau)).sum(axis=1) / q
    return np.abs(af) ** 2


def beam_split_gain(params: BeamSplitParams) -> np.ndarray:
    """Combined Tx and Rx power gain per subcarrier in ascending frequency order."""
    f = params.subcarrier_frequencies()
    th = params.steer_angle_rad
    return (array_gain(params.ae_count_tx, th, f, params.f_c_hz)
            * array_gain(params.ae_count_rx, th, f, params.f_c_hz))


def beam_split_fir(params: BeamSplitParams, half_len: int = 16) -> np.ndarray:
    """Causal FIR equivalent of the Tx/Rx array responses at rate ``bw_hz``.

    Each element pair contributes a band-limited fractional delay; the sum is
    truncated to ``2 half_len + 1`` taps and delayed by ``half_len`` samples.
    Its DTFT over the band matches the complex array factor product, whose
    squared magnitude is :func:`beam_split_gain`.
    """
    ts = 1 / params.bw_hz
    th = params.steer_angle_rad
    tt = _element_delays(params.ae_count_tx, th, params.f_c_hz)
    tr = _element_delays(params.ae_count_rx, th, params.f_c_hz)
    shifts = (tt[:, None] + tr[None, :]).reshape(-1) / ts
    n = np.arange(-half_len, half_len + 1)
    h = np.sinc(n[:, None] + shifts[None, :]).sum(axis=1)
    return (h / (params.ae_count_tx * params.ae_count_rx)).astype(complex)


# --- CSV import/export -------------------------------------------------------

def save_tdl_csv(ch: TdlChannel, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tap_index", "tap_spacing_s", "re", "im"])
        for i, h in enumerate(ch.taps):
            w.writerow([i, repr(float(ch.tap_spacing_s)), repr(float(h.real)),
                        repr(float(h.imag))])


def load_tdl_csv(path) -> TdlChannel:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path}: no taps")
    h = np.zeros(max(int(r["tap_index"]) for r in rows) + 1, dtype=complex)
    for r in rows:
        h[int(r["tap_index"])] = float(r["re"]) + 1j * float(r["im"])
    return TdlChannel(h, float(rows[0]["tap_spacing_s"]))


def save_dd_csv(ch: DdChannel, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delay_idx", "doppler_idx", "re", "im"])
        for h, l, k in ch.paths:
            w.writerow([int(l), int(k), repr(float(h.real)), repr(float(h.imag))])


def load_dd_csv(path) -> DdChannel:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return DdChannel.from_paths(
        (float(r["re"]) + 1j * float(r["im"]), int(r["delay_idx"]), int(r["doppler_idx"]))
        for r in rows)
