"""Numerology sanity checks against channel delay and Doppler statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..waveforms import CP_SCHEMES, Scheme, WaveformParams


@dataclass(frozen=True)
class Constraint:
    name: str
    lhs: float
    rhs: float
    passed: bool

    def __str__(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.lhs:.6g} vs {self.rhs:.6g}"


@dataclass(frozen=True)
class NumerologyReport:
    scheme: str
    coherence_bandwidth_hz: float
    coherence_time_s: float
    constraints: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    def lines(self) -> list[str]:
        out = [f"{self.scheme}: B_coh = {self.coherence_bandwidth_hz:.6g} Hz, "
               f"T_coh = {self.coherence_time_s:.6g} s"]
        out += ["  " + str(c) for c in self.constraints]
        return out


def coherence_bandwidth_hz(tau_rms_s: float) -> float:
    return np.inf if tau_rms_s <= 0 else 1.0 / (5.0 * tau_rms_s)


def coherence_time_s(nu_max_hz: float) -> float:
    return np.inf if nu_max_hz <= 0 else float(np.sqrt(9.0 / (16 * np.pi * nu_max_hz ** 2)))


def validate_numerology(p: WaveformParams, tau_rms_s: float = 0.0, tau_max_s: float = 0.0,
                        nu_max_hz: float = 0.0, coherence_margin: float = 10.0) -> NumerologyReport:
    """Check tau_rms <= T_CP <= T_u << T_coh (CP schemes) or nu_max < df < 1/tau_max (OTFS).

    ``coherence_margin`` turns "much less than" into ``T_u <= T_coh / margin``.
    """
    ts = 1.0 / p.sample_rate_hz
    t_u = p.useful_period_s
    t_cp = p.cp_len * ts
    df = p.delta_f_hz
    b_coh = coherence_bandwidth_hz(tau_rms_s)
    t_coh = coherence_time_s(nu_max_hz)
    cons = [Constraint("delta_f = B/M = 1/T_u", df, 1.0 / t_u, bool(np.isclose(df * t_u, 1.0)))]
    if p.scheme in CP_SCHEMES:
        cons += [
            Constraint("tau_rms <= T_CP", tau_rms_s, t_cp, tau_rms_s <= t_cp),
            Constraint("T_CP <= T_u", t_cp, t_u, t_cp <= t_u),
            Constraint(f"T_u <= T_coh/{coherence_margin:g}", t_u, t_coh / coherence_margin,
                       t_u <= t_coh / coherence_margin),
        ]
    if p.scheme is Scheme.OTFS:
        inv_tau = np.inf if tau_max_s <= 0 else 1.0 / tau_max_s
        cons += [
            Constraint("nu_max < delta_f", nu_max_hz, df, nu_max_hz < df),
            Constraint("delta_f < 1/tau_max", df, inv_tau, df < inv_tau),
            Constraint("tau_max <= T_CP", tau_max_s, t_cp, tau_max_s <= t_cp),
        ]
    return NumerologyReport(p.scheme.value, b_coh, t_coh, tuple(cons))
