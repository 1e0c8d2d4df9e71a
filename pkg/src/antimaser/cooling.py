"""Steady-state temperature of a cavity mode cooled by a polarized spin bath.

The mode equilibrates with three baths, each weighted by its rate: internal
loss at the ambient temperature, the external port at the temperature of the
incident noise, and the spin ensemble at its spin temperature. With the
Rayleigh-Jeans convention the weighted mean is taken over temperatures, with
Planck over mean photon numbers.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .chain import combine_coupler, propagate_uniform_stage
from .errors import DomainError, SolverError
from .spins import PLANCK, RAYLEIGH_JEANS, occupancy, temperature_from_occupancy

CALIBRATION_RTOL = 1e-9
MAX_BISECTION_ITER = 200


@dataclass(frozen=True)
class CoolingScenario:
    kappa_internal: float
    kappa_external: float = 0.0
    gamma_spins: float = 0.0
    t_ambient: float = 5.0
    t_external: float = 0.0
    t_spin: float = 0.0
    frequency: float = 10.98e9
    convention: str = RAYLEIGH_JEANS

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_q(cls, frequency, q_unloaded, **kw):
        if q_unloaded <= 0 or frequency <= 0:
            raise DomainError("frequency and Q must be > 0")
        return cls(kappa_internal=frequency / q_unloaded, frequency=frequency, **kw)


def _check(s: CoolingScenario):
    if s.kappa_internal <= 0:
        raise DomainError("kappa_internal must be > 0")
    if s.kappa_external < 0:
        raise DomainError("kappa_external must be >= 0")
    if s.gamma_spins < 0:
        raise DomainError("negative gamma_spins is the maser (gain) regime, which this model does not cover")
    if s.t_spin < 0:
        raise DomainError("negative spin temperature is the maser regime, which this model does not cover")
    if min(s.t_ambient, s.t_external) < 0:
        raise DomainError("bath temperatures must be >= 0")
    if s.convention not in (PLANCK, RAYLEIGH_JEANS):
        raise DomainError(f"unknown convention {s.convention!r}")
    if s.kappa_internal + s.kappa_external + s.gamma_spins <= 0:
        raise DomainError("total rate must be > 0")


def _to_n(s, t):
    return occupancy(t, s.frequency, s.convention)


def steady_mode_temperature(s: CoolingScenario):
    _check(s)
    total = s.kappa_internal + s.kappa_external + s.gamma_spins
    n = (s.kappa_internal * _to_n(s, s.t_ambient)
         + s.kappa_external * _to_n(s, s.t_external)
         + s.gamma_spins * _to_n(s, s.t_spin)) / total
    return temperature_from_occupancy(n, s.frequency, s.convention)


def steady_mode_occupancy(s: CoolingScenario, convention=None):
    t = steady_mode_temperature(s)
    return occupancy(t, s.frequency, convention or s.convention)


def calibrate_gamma_spins(target_mode_temp, scenario: CoolingScenario):
    """Spin absorption rate that brings the mode to ``target_mode_temp``.

    Bisection in the rate; the scenario's own ``gamma_spins`` is ignored.
    """
    base = scenario.replace(gamma_spins=0.0)
    t0 = steady_mode_temperature(base)
    t_inf = scenario.t_spin
    if target_mode_temp == t0:
        return 0.0
    lo_t, hi_t = min(t0, t_inf), max(t0, t_inf)
    if not lo_t < target_mode_temp < hi_t:
        raise DomainError(
            f"target {target_mode_temp} K is outside the achievable interval "
            f"({lo_t:.6g}, {hi_t:.6g}) K")
    sign = 1.0 if t_inf < t0 else -1.0

    def f(g):
        return sign * (steady_mode_temperature(base.replace(gamma_spins=g)) - target_mode_temp)

    lo, hi = 0.0, base.kappa_internal + base.kappa_external
    it = 0
    while f(hi) > 0:
        lo, hi = hi, hi * 2.0
        it += 1
        if it > MAX_BISECTION_ITER:
            raise SolverError("could not bracket the spin absorption rate")
    for _ in range(MAX_BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-3 * CALIBRATION_RTOL * hi:
            break
    return 0.5 * (lo + hi)


def fit_external_temperature(target_mode_temp, scenario: CoolingScenario):
    """Incident port temperature that makes the mode sit at ``target_mode_temp``."""
    _check(scenario)
    s = scenario
    if s.kappa_external <= 0:
        raise DomainError("kappa_external must be > 0 to fit the external temperature")
    total = s.kappa_internal + s.kappa_external + s.gamma_spins
    n_target = _to_n(s, target_mode_temp)
    n_ext = (n_target * total - s.kappa_internal * _to_n(s, s.t_ambient)
             - s.gamma_spins * _to_n(s, s.t_spin)) / s.kappa_external
    if n_ext < 0:
        raise DomainError("target is below what a zero-temperature port can reach")
    return temperature_from_occupancy(n_ext, s.frequency, s.convention)


def calculated_column(scenarios):
    """(with-coupling, without-coupling) mode temperatures, one pair per scenario."""
    return [(steady_mode_temperature(s), steady_mode_temperature(s.replace(kappa_external=0.0)))
            for s in scenarios]


def q_sweep(base: CoolingScenario, q_values):
    """Mode temperature versus unloaded Q at fixed spin absorption rate.

    Rows are (q, kappa_int_hz, t_mode_k, n_planck, n_rj).
    """
    rows = []
    for q in q_values:
        if q <= 0:
            raise DomainError(f"Q must be > 0, got {q}")
        s = base.replace(kappa_internal=base.frequency / q)
        t = steady_mode_temperature(s)
        rows.append((q, s.kappa_internal, t,
                     occupancy(t, s.frequency, PLANCK), occupancy(t, s.frequency, RAYLEIGH_JEANS)))
    return rows


def external_temperature_from_feed(t_coupled_in, coupling_loss_db, feed_loss_db, t_phys):
    """Noise incident on the cavity port, traced backward from the coupler.

    The coupled port leaks ``t_coupled_in`` towards the cavity with the
    coupling transmission; the remainder of the coupler output is the matched
    main line at ``t_phys``. The result then crosses the feed (coupler through
    loss plus cable) held at ``t_phys``.
    """
    at_coupler = combine_coupler(t_phys, t_coupled_in, 0.0, coupling_loss_db, t_phys)
    return propagate_uniform_stage(at_coupler, feed_loss_db, t_phys)

