"""Reflection, coupling and emitted noise of a single-port cavity at resonance.

Rates are ordinary-frequency linewidths in Hz; the internal linewidth of an
empty cavity is f0 / Q_unloaded.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

UNDERCOUPLED = "undercoupled"
OVERCOUPLED = "overcoupled"
REGIMES = (UNDERCOUPLED, OVERCOUPLED)

S11_FLOOR_DB = -100.0


def _ret(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def gamma_from_s11(s11_db):
    """Voltage reflection magnitude |Gamma| = 10^(S11/20) for S11 <= 0 dB."""
    s = np.asarray(s11_db, dtype=float)
    if np.any(s > 0):
        raise DomainError(f"S11 above 0 dB is nonphysical for a passive port: {s11_db}")
    return _ret(10.0 ** (s / 20.0))


def s11_from_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any((g <= 0) | (g > 1)):
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    return _ret(20.0 * np.log10(g))


def power_reflection_from_s11(s11_db):
    """|S11|^2 = 10^(S11/10), the reflected power fraction."""
    return _ret(np.asarray(gamma_from_s11(s11_db)) ** 2)


def coupling_coefficient(gamma, regime):
    """beta = kappa_ext / kappa_int from the reflection magnitude at resonance."""
    if regime not in REGIMES:
        raise DomainError(f"regime must be one of {REGIMES}, got {regime!r}")
    g = np.asarray(gamma, dtype=float)
    if np.any((g < 0) | (g > 1)):
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if regime == UNDERCOUPLED:
        return _ret((1.0 - g) / (1.0 + g))
    if np.any(g >= 1):
        raise DomainError("overcoupled beta is singular at gamma = 1")
    return _ret((1.0 + g) / (1.0 - g))


def kappa_ext_from_coupling(gamma, regime, kappa_internal):
    if np.any(np.asarray(kappa_internal) <= 0):
        raise DomainError("kappa_internal must be > 0")
    return _ret(coupling_coefficient(gamma, regime) * np.asarray(kappa_internal, dtype=float))


def cavity_output_noise(t_internal, gamma, t_incident):
    """Noise leaving the port: emission weighted by 1 - gamma^2 plus reflected incident noise."""
    g = np.asarray(gamma, dtype=float)
    if np.any((g < 0) | (g > 1)):
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if np.any(np.asarray(t_internal) < 0) or np.any(np.asarray(t_incident) < 0):
        raise DomainError("temperatures must be >= 0")
    g2 = g * g
    return _ret(np.asarray(t_internal, dtype=float) * (1.0 - g2) + np.asarray(t_incident, dtype=float) * g2)


def predict_s11_under_pumping(kappa_ext, kappa_internal, gamma_s, floor_db=S11_FLOOR_DB):
    """On-resonance S11 (dB) once spin absorption adds to the internal loss.

    Exact critical coupling has no finite dB value and is reported as ``floor_db``.
    """
    ke = np.asarray(kappa_ext, dtype=float)
    ki = np.asarray(kappa_internal, dtype=float) + np.asarray(gamma_s, dtype=float)
    if np.any(ke < 0) or np.any(np.asarray(kappa_internal) < 0) or np.any(np.asarray(gamma_s) < 0):
        raise DomainError("rates must be >= 0")
    total = ke + ki
    if np.any(total <= 0):
        raise DomainError("at least one rate must be nonzero")
    r = np.abs(ke - ki) / total
    with np.errstate(divide="ignore"):
        s = 20.0 * np.log10(r)
    return _ret(np.maximum(s, floor_db))
