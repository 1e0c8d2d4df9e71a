"""NV- ground-state Zeeman levels, populations and spin/photon temperatures.

Level energies are in frequency units (Hz): E(m_s)/h = D m_s^2 + m_s gamma_e B,
with the static field B along the NV axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import H, K_B
from .errors import DomainError

D_DEFAULT = 2.87e9
GYRO_DEFAULT = 2.8025e10

ZERO_TO_PLUS = "zero_to_plus"
MINUS_TO_ZERO = "minus_to_zero"
TRANSITIONS = (ZERO_TO_PLUS, MINUS_TO_ZERO)

PLANCK = "planck"
RAYLEIGH_JEANS = "rayleigh_jeans"
CONVENTIONS = (PLANCK, RAYLEIGH_JEANS)


@dataclass(frozen=True)
class NvLevels:
    zero_field_splitting: float = D_DEFAULT
    gyromagnetic_ratio: float = GYRO_DEFAULT
    field: float = 0.0

    def energies(self):
        """(E_-1, E_0, E_+1) in Hz."""
        d, gb = self.zero_field_splitting, self.gyromagnetic_ratio * self.field
        return (d - gb, 0.0, d + gb)

    @classmethod
    def for_transition(cls, freq, transition=ZERO_TO_PLUS, zero_field_splitting=D_DEFAULT,
                       gyromagnetic_ratio=GYRO_DEFAULT):
        """Field that puts ``transition`` at ``freq`` (upper branch for minus_to_zero)."""
        if transition == ZERO_TO_PLUS:
            b = (freq - zero_field_splitting) / gyromagnetic_ratio
        elif transition == MINUS_TO_ZERO:
            b = (freq + zero_field_splitting) / gyromagnetic_ratio
        else:
            raise DomainError(f"unknown transition {transition!r}")
        if b < 0:
            raise DomainError(f"no non-negative field reaches {freq} Hz on {transition}")
        return cls(zero_field_splitting, gyromagnetic_ratio, b)


@dataclass(frozen=True)
class Populations:
    p_minus: float
    p_zero: float
    p_plus: float

    def __post_init__(self):
        ps = (self.p_minus, self.p_zero, self.p_plus)
        if any(p < -1e-12 or p > 1 + 1e-12 for p in ps):
            raise DomainError(f"populations must lie in [0, 1], got {ps}")
        if abs(sum(ps) - 1.0) > 1e-9:
            raise DomainError(f"populations must sum to 1, got {sum(ps)}")

    def as_tuple(self):
        return (self.p_minus, self.p_zero, self.p_plus)

    def pair(self, transition):
        """(p_lower, p_upper) in energy order for a transition at B >= 0 along the axis.

        For minus_to_zero the |-1> level lies below |0> only above the level
        crossing; callers work in that regime.
        """
        if transition == ZERO_TO_PLUS:
            return self.p_zero, self.p_plus
        if transition == MINUS_TO_ZERO:
            return self.p_minus, self.p_zero
        raise DomainError(f"unknown transition {transition!r}")


def transition_frequencies(levels: NvLevels):
    """(f(|-1> <-> |0>), f(|0> <-> |+1>)) in Hz."""
    if levels.field < 0:
        raise DomainError("field must be >= 0")
    e_m, e_0, e_p = levels.energies()
    return abs(e_0 - e_m), abs(e_p - e_0)


def thermal_populations(levels: NvLevels, temp):
    if temp <= 0:
        raise DomainError(f"temperature must be > 0, got {temp}")
    e = np.array(levels.energies()) * H / (K_B * temp)
    w = np.exp(-(e - e.min()))
    w /= w.sum()
    return Populations(*(float(x) for x in w))


def populations_from_echo_ratios(levels: NvLevels, temp, ratio_plus, ratio_minus):
    """Light-state populations from pumped/thermal echo-amplitude ratios.

    ``ratio_plus`` scales the thermal (p0 - p+) difference of the |0>-|+1>
    line and ``ratio_minus`` the (p- - p0) difference of the |-1>-|0> line;
    a negative ratio means that line is inverted under light.
    """
    th = thermal_populations(levels, temp)
    d_plus = th.p_zero - th.p_plus
    d_minus = th.p_minus - th.p_zero
    if abs(d_plus) < 1e-15 and abs(d_minus) < 1e-15:
        raise DomainError("thermal differences vanish; echo ratios cannot fix the populations")
    a = np.array([[0.0, 1.0, -1.0],
                  [1.0, -1.0, 0.0],
                  [1.0, 1.0, 1.0]])
    rhs = np.array([ratio_plus * d_plus, ratio_minus * d_minus, 1.0])
    p = np.linalg.solve(a, rhs)
    return Populations(*(float(x) for x in p))


def spin_temperature(p_lower, p_upper, transition_freq):
    """Signed Boltzmann temperature of a two-level population ratio.

    Equal populations give +inf (saturation); an empty upper level gives 0.
    Inversion (p_upper > p_lower) gives a negative temperature.
    """
    if not (0 <= p_lower <= 1 and 0 <= p_upper <= 1):
        raise DomainError("populations must lie in [0, 1]")
    if p_upper == 0:
        return 0.0
    if p_lower == p_upper:
        return math.inf
    if p_lower == 0:
        return -0.0
    return H * transition_freq / K_B / math.log(p_lower / p_upper)


def occupancy(temp, freq, convention=RAYLEIGH_JEANS):
    """Mean photon number of a mode at ``temp``; T = 0 gives 0."""
    t = np.asarray(temp, dtype=float)
    if np.any(t < 0) or np.any(np.asarray(freq) <= 0):
        raise DomainError("temp must be >= 0 and freq > 0")
    x_inv = K_B * t / (H * np.asarray(freq, dtype=float))
    if convention == RAYLEIGH_JEANS:
        n = x_inv
    elif convention == PLANCK:
        with np.errstate(divide="ignore", over="ignore"):
            n = np.where(t > 0, 1.0 / np.expm1(1.0 / np.where(t > 0, x_inv, 1.0)), 0.0)
    else:
        raise DomainError(f"unknown convention {convention!r}")
    return float(n) if np.ndim(n) == 0 else n


def temperature_from_occupancy(n, freq, convention=RAYLEIGH_JEANS):
    nn = np.asarray(n, dtype=float)
    if np.any(nn < 0):
        raise DomainError("occupancy must be >= 0")
    hf_k = H * np.asarray(freq, dtype=float) / K_B
    if convention == RAYLEIGH_JEANS:
        t = nn * hf_k
    elif convention == PLANCK:
        with np.errstate(divide="ignore"):
            t = np.where(nn > 0, hf_k / np.log1p(1.0 / np.where(nn > 0, nn, 1.0)), 0.0)
    else:
        raise DomainError(f"unknown convention {convention!r}")
    return float(t) if np.ndim(t) == 0 else t


def dephasing_linewidth(t2star):
    """Full linewidth 1/(pi T2*) in Hz."""
    if t2star <= 0:
        raise DomainError("T2* must be > 0")
    return 1.0 / (math.pi * t2star)


def collective_absorption_rate(g_ensemble, dephasing_linewidth, polarization_difference):
    """4 g^2 dp / gamma_2. Negative dp (inversion) gives a negative rate, i.e. gain."""
    if dephasing_linewidth <= 0:
        raise DomainError("dephasing linewidth must be > 0")
    if g_ensemble < 0:
        raise DomainError("g_ensemble must be >= 0")
    if not -1 <= polarization_difference <= 1:
        raise DomainError("polarization difference must lie in [-1, 1]")
    return 4.0 * g_ensemble**2 * polarization_difference / dephasing_linewidth


def g_ensemble_for_rate(gamma_s, dephasing_linewidth, polarization_difference=1.0):
    """Ensemble coupling that produces absorption rate ``gamma_s``."""
    if polarization_difference == 0 or gamma_s / polarization_difference < 0:
        raise DomainError("rate and polarization difference must share a sign")
    return math.sqrt(gamma_s * dephasing_linewidth / (4.0 * polarization_difference))


def is_maser_regime(rate):
    return rate < 0


@dataclass(frozen=True)
class SpinEnsemble:
    populations: Populations
    transition: str
    transition_freq: float
    dephasing_linewidth: float
    collective_absorption_rate: float = 0.0

    @property
    def polarization_difference(self):
        lo, up = self.populations.pair(self.transition)
        return lo - up

    @property
    def spin_temp(self):
        lo, up = self.populations.pair(self.transition)
        return spin_temperature(lo, up, self.transition_freq)
