"""Oscillator phase noise: Wiener, white Gaussian and combined models."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ConfigError, InputShapeError, RandomStream, as_samples, like


class PhnModel(str, Enum):
    GAUSSIAN = "gaussian"
    WIENER = "wiener"
    COMBINED = "combined"


@dataclass(frozen=True)
class PhnParams:
    """Phase-noise levels.

    ``k0`` is the linear floor level and ``k2`` the level of the 1/f^2
    region; both are tied to the sample period ``T = 1/bandwidth_hz``.
    """

    k0: float
    k2: float
    bandwidth_hz: float
    model: PhnModel = PhnModel.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "model", PhnModel(self.model))
        if self.k0 < 0 or self.k2 < 0:
            raise ConfigError("k0 and k2 must be non-negative")
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth must be positive")

    @classmethod
    def from_dbc(cls, k0_dbc_hz: float, f_cor_hz: float, bandwidth_hz: float,
                 model=PhnModel.GAUSSIAN) -> "PhnParams":
        """Build from a floor in dBc/Hz and a corner frequency (k2 = f_cor * k0)."""
        k0 = 10 ** (k0_dbc_hz / 10)
        return cls(k0, f_cor_hz * k0, bandwidth_hz, model)

    @property
    def sample_period_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def corner_hz(self) -> float:
        return self.k2 / self.k0 if self.k0 > 0 else float("inf")

    @property
    def sigma_w2(self) -> float:
        return 4 * np.pi ** 2 * self.k2 * self.sample_period_s

    @property
    def sigma_g2(self) -> float:
        return self.k0 / self.sample_period_s


def phn_model_ok_gaussian(n_count: int, f_cor_hz: float, bandwidth_hz: float) -> bool:
    """True when ``N (f_cor/B)^2 <= ln 2 / (2 pi)``, i.e. the white model suffices."""
    if bandwidth_hz <= 0:
        raise ConfigError("bandwidth must be positive")
    return bool(n_count * (f_cor_hz / bandwidth_hz) ** 2 <= np.log(2) / (2 * np.pi))


def wiener_phase(sigma_w2: float, length: int, stream: RandomStream) -> np.ndarray:
    # random walk starting from phi[-1] = 0
    return np.cumsum(np.sqrt(sigma_w2) * stream.generator.standard_normal(length))


def gaussian_phase(sigma_g2: float, length: int, stream: RandomStream) -> np.ndarray:
    return np.sqrt(sigma_g2) * stream.generator.standard_normal(length)


def phn_generate(params: PhnParams, length: int, stream: RandomStream) -> np.ndarray:
    """Phase sequence in radians.

    The Wiener part always draws from ``stream.child(0)`` and the Gaussian
    part from ``stream.child(1)``, so the combined model is exactly the sum
    of the two single-model outputs for the same stream.
    """
    if length < 1:
        raise InputShapeError("length must be >= 1")
    phi = np.zeros(length)
    if params.model in (PhnModel.WIENER, PhnModel.COMBINED):
        phi += wiener_phase(params.sigma_w2, length, stream.child(0))
    if params.model in (PhnModel.GAUSSIAN, PhnModel.COMBINED):
        phi += gaussian_phase(params.sigma_g2, length, stream.child(1))
    return phi


def phn_apply(signal, phase, side: str = "tx"):
    """Rotate each sample by ``exp(j phase[u])``.

    ``side`` only documents where the rotation sits in the chain: Tx before
    the channel, Rx after it.
    """
    if side not in ("tx", "rx"):
        raise ConfigError("side must be 'tx' or 'rx'")
    x = as_samples(signal)
    ph = np.asarray(phase, dtype=float).reshape(-1)
    if ph.size != x.size:
        raise InputShapeError(f"phase length {ph.size} != signal length {x.size}")
    return like(signal, x * np.exp(1j * ph))


def remove_common_phase_error(signal, phase, block_len: int, offset: int = 0):
    """Derotate each block by the angle of its mean phasor (genie CPE removal).

    Blocks start at ``offset`` and are ``block_len`` samples long; samples
    outside whole blocks are left untouched.
    """
    x = as_samples(signal).copy()
    ph = np.asarray(phase, dtype=float).reshape(-1)
    if block_len < 1:
        raise ConfigError("block_len must be >= 1")
    for start in range(offset, min(x.size, ph.size) - block_len + 1, block_len):
        sl = slice(start, start + block_len)
        x[sl] *= np.exp(-1j * np.angle(np.mean(np.exp(1j * ph[sl]))))
    return like(signal, x)
