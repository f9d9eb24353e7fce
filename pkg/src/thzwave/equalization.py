"""Linear ZF and MMSE equalizers."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .channels import DdEffectiveChannel
from .core import ConfigError, InputShapeError, SingularityError

ZF_FLOOR = 1e-12


class EqualizerKind(str, Enum):
    ZF = "ZF"
    MMSE = "MMSE"


@dataclass(frozen=True)
class EqualizerSpec:
    kind: EqualizerKind = EqualizerKind.MMSE
    noise_power: float = 0.0
    signal_power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", EqualizerKind(self.kind))
        if self.noise_power < 0:
            raise ConfigError("noise_power must be >= 0")
        if self.signal_power <= 0:
            raise ConfigError("signal_power must be > 0")

    @property
    def regularization(self) -> float:
        if self.kind is EqualizerKind.ZF:
            return 0.0
        return self.noise_power / self.signal_power


def single_tap_equalize(freq_symbols, freq_response, spec: EqualizerSpec) -> np.ndarray:
    """Per-bin ZF ``y/h`` or MMSE ``conj(h) y / (|h|^2 + sigma^2/P)``.

    ``freq_response`` broadcasts against ``freq_symbols`` (e.g. M values
    against an M x N grid).
    """
    y = np.asarray(freq_symbols, dtype=complex)
    h = np.asarray(freq_response, dtype=complex)
    if h.ndim == 1 and y.ndim == 2:
        h = h[:, None]
    if spec.kind is EqualizerKind.ZF:
        bad = np.abs(h) < ZF_FLOOR
        if np.any(bad):
            bins = np.argwhere(bad)
            raise SingularityError(f"ZF: |h| < {ZF_FLOOR:g} at bin(s) {bins[:8].tolist()}")
        return y / h
    return np.conj(h) * y / (np.abs(h) ** 2 + spec.regularization)


def matrix_equalize(y, H, spec: EqualizerSpec) -> np.ndarray:
    """Solve the ZF (least-squares) or MMSE normal equations by factorization."""
    y = np.asarray(y, dtype=complex).reshape(-1)
    if sp.issparse(H):
        return _sparse_equalize(y, H.tocsc(), spec)
    H = np.asarray(H, dtype=complex)
    if H.shape[0] != y.size:
        raise InputShapeError(f"H has {H.shape[0]} rows but y has {y.size} entries")
    if spec.kind is EqualizerKind.ZF:
        Q, R = np.linalg.qr(H)
        d = np.abs(np.diag(R))
        if d.size < H.shape[1] or d.min() <= ZF_FLOOR * max(d.max(), 1.0):
            raise SingularityError("ZF: channel matrix is rank deficient")
        return sla.solve_triangular(R, Q.conj().T @ y)
    A = H.conj().T @ H + spec.regularization * np.eye(H.shape[1])
    try:
        c = sla.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise SingularityError("MMSE: normal matrix not positive definite") from exc
    return sla.cho_solve(c, H.conj().T @ y)


def _sparse_equalize(y, H, spec: EqualizerSpec) -> np.ndarray:
    n = H.shape[1]
    if spec.kind is EqualizerKind.ZF and H.shape[0] == n:
        A, b = H, y
    else:
        A = (H.conj().T @ H + spec.regularization * sp.identity(n, format="csc")).tocsc()
        b = H.conj().T @ y
    try:
        lu = spla.splu(A.astype(complex))
    except RuntimeError as exc:
        raise SingularityError("channel matrix is singular") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularityError("channel matrix is singular")
    return x


def otfs_equalize(y_dd, H_eff, spec: EqualizerSpec) -> np.ndarray:
    """Equalize a column-major DD vector.

    For a :class:`DdEffectiveChannel` the solve runs in the time domain:
    the SFFT is unitary, so the ZF/MMSE solution for H_eff equals the SFFT of
    the solution for the sparse time-domain H_DD. Time-invariant channels are
    circulant and solved with an MN-point FFT. Dense or sparse matrices fall
    back to :func:`matrix_equalize`.
    """
    if not isinstance(H_eff, DdEffectiveChannel):
        return matrix_equalize(y_dd, H_eff, spec)
    y_t = H_eff.to_time(y_dd)
    if H_eff.is_time_invariant:
        MN = y_t.size
        taps = np.zeros(MN, dtype=complex)
        np.add.at(taps, H_eff.channel.delays, H_eff.channel.gains)
        lam = np.fft.fft(taps)
        x_t = np.fft.ifft(single_tap_equalize(np.fft.fft(y_t), lam, spec))
    else:
        x_t = _sparse_equalize(y_t, H_eff.h_time.tocsc(), spec)
    return H_eff.to_dd(x_t)
