"""Per-trial link chain: bits -> waveform -> PHN -> channel -> noise -> equalizer -> bits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channels import (DdChannel, dd_effective_channel, ltv_apply, tdl_frequency_response)
from ..core import (QamConstellation, RandomStream, qam_demodulate, qam_modulate, random_bits,
                    vectorize)
from ..equalization import EqualizerSpec, otfs_equalize, single_tap_equalize
from ..impairments import PhnParams, phn_apply, phn_generate, remove_common_phase_error
from ..kpi import BerCounter
from ..waveforms import (Scheme, WaveformParams, dfts_active_subcarriers, dfts_despread,
                         dfts_ofdm_demodulate, fbmc_analysis, modulate, ofdm_demodulate,
                         oqam_combine, otfs_demodulate, scfde_demodulate, scfde_despread)

# sub-stream indices inside one trial
DATA, CHANNEL, PHASE, NOISE = 0, 1, 2, 3


@dataclass(frozen=True)
class TivLink:
    """Time-invariant FIR channel; ``sync_delay`` samples are skipped by
    CP-free receivers (perfect timing)."""

    taps: np.ndarray
    sync_delay: int = 0

    def apply(self, x, p: WaveformParams):
        return np.convolve(x, self.taps)

    def receive_window(self, y, p: WaveformParams, n: int):
        d = self.sync_delay if p.scheme is Scheme.OQAM_FBMC else 0
        return y[d:d + n]

    def freq_response(self, p: WaveformParams):
        M = p.m_count
        d = self.sync_delay if p.scheme is Scheme.OQAM_FBMC else 0
        if d == 0:
            return tdl_frequency_response(self.taps, M)
        n = np.arange(self.taps.size) - d
        return np.exp(-2j * np.pi * np.outer(np.arange(M), n) / M) @ self.taps

    def dd_channel(self):
        l = np.flatnonzero(self.taps)
        return DdChannel.from_paths(zip(self.taps[l], l, np.zeros(l.size, int)))


@dataclass(frozen=True)
class LtvLink:
    """Integer delay-Doppler channel applied over the whole frame."""

    channel: DdChannel
    m_grid: int
    n_grid: int

    def origin(self, p: WaveformParams) -> int:
        return p.cp_len if p.scheme is Scheme.OTFS else 0

    def apply(self, x, p: WaveformParams):
        return ltv_apply(x, self.channel, self.m_grid, self.n_grid, self.origin(p))

    def receive_window(self, y, p, n):
        return y[:n]

    def block_response(self, p: WaveformParams) -> np.ndarray:
        """Per-block channel (M x blocks) averaged over each block's useful part."""
        M, MN = p.m_count, self.m_grid * self.n_grid
        m = np.arange(M)[:, None]
        if p.scheme is Scheme.OQAM_FBMC:
            n_blk = 2 * p.n_count
            centers = np.arange(n_blk) * (M // 2) + p.overlap * M // 2
            u = centers[None, :]
        else:
            n_blk = p.n_count
            starts = np.arange(n_blk) * (M + p.cp_len) + p.cp_len
            u = starts[None, :] + np.arange(M)[:, None]
        H = np.zeros((M, n_blk), dtype=complex)
        for h, l, k in self.channel.paths:
            ph = np.exp(2j * np.pi * k * (u - self.origin(p) - l) / MN).mean(axis=0)
            H += h * np.exp(-2j * np.pi * m * l / M) * ph[None, :]
        return H


def noise_power(snr_db: float, definition: str, bits_per_symbol: int) -> float:
    snr = 10 ** (snr_db / 10)
    if definition == "eb_n0":
        snr *= bits_per_symbol
    return 1.0 / snr


def run_link(p: WaveformParams, link, const: QamConstellation, snr_db: float,
             stream: RandomStream, definition: str = "es_n0", equalizer: str = "MMSE",
             phn: PhnParams | None = None, phn_side: str = "tx",
             cpe_correction: bool = False) -> BerCounter:
    """Simulate one frame and count bit errors."""
    k = const.bits_per_symbol
    rows, N = p.symbols_per_block, p.n_count
    bits = random_bits(stream.child(DATA), rows * N * k)
    d = qam_modulate(bits, const).reshape(rows, N, order="F")
    x = modulate(d, p).samples
    phase = None
    if phn is not None:
        phase = phn_generate(phn, x.size, stream.child(PHASE))
        if phn_side == "tx":
            x = phn_apply(x, phase, "tx")
    y = link.apply(x, p)
    n = x.size
    y = link.receive_window(y, p, n)
    if phn is not None and phn_side == "rx":
        y = phn_apply(y, phase[:y.size], "rx")
    s2 = noise_power(snr_db, definition, k)
    y = y + stream.child(NOISE).complex_normal(y.size, s2)
    if cpe_correction and phase is not None and p.scheme is not Scheme.OQAM_FBMC:
        blk = p.m_count + p.cp_len if p.scheme is not Scheme.OTFS else p.m_count
        off = 0 if p.scheme is not Scheme.OTFS else p.cp_len
        y = remove_common_phase_error(y, phase, blk, off)
    spec = EqualizerSpec(equalizer, s2, 1.0)
    d_hat = receive(y, p, link, spec)
    bits_hat = qam_demodulate(d_hat.reshape(-1, order="F"), const)
    return BerCounter(int(np.count_nonzero(bits_hat != bits)), int(bits.size))


def _response(link, p):
    if isinstance(link, LtvLink):
        return link.block_response(p)
    return link.freq_response(p)


def receive(y, p: WaveformParams, link, spec: EqualizerSpec) -> np.ndarray:
    """Demodulate and equalize; returns the symbol estimates (rows x N)."""
    s = p.scheme
    if s is Scheme.OTFS:
        y_dd = vectorize(otfs_demodulate(y, p))
        if isinstance(link, LtvLink):
            ch = link.channel
        else:
            ch = link.dd_channel()
        H = dd_effective_channel(ch, p.m_count, p.n_count)
        x = otfs_equalize(y_dd, H, spec)
        return x.reshape(p.m_count, p.n_count, order="F")
    H = _response(link, p)
    if s is Scheme.CP_OFDM:
        return single_tap_equalize(ofdm_demodulate(y, p).values, H, spec)
    if s is Scheme.SC_FDE:
        return scfde_despread(single_tap_equalize(scfde_demodulate(y, p).values, H, spec))
    if s is Scheme.DFT_S_OFDM:
        act = dfts_active_subcarriers(p)
        z = single_tap_equalize(dfts_ofdm_demodulate(y, p).values, H[act], spec)
        return dfts_despread(z)
    a = fbmc_analysis(y, p)
    return oqam_combine(single_tap_equalize(a, H, spec).real)
