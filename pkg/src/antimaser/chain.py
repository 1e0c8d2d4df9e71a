"""Noise-temperature bookkeeping along a microwave receive chain.

Every function here accepts scalars or numpy arrays (broadcast together), so
the same code path serves a single deterministic evaluation and a batch of
Monte-Carlo draws.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .cavity import cavity_output_noise
from .constants import K_B
from .errors import ConfigError, DomainError

UNIFORM = "UniformLossy"
GRADIENT = "GradientCable"
COUPLER = "DirectionalCoupler"
AMPLIFIER = "Amplifier"
CAVITY = "Cavity"
STAGE_KINDS = (UNIFORM, GRADIENT, COUPLER, AMPLIFIER, CAVITY)

DEFAULT_CABLE_STEPS = 10_000


def _ret(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _nonneg(name, x):
    if np.any(np.asarray(x) < 0):
        raise DomainError(f"{name} must be >= 0, got {x}")


def db_to_transmission(loss_db):
    """Linear power transmission of a non-negative dB loss."""
    _nonneg("loss_db", loss_db)
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 10.0)


def propagate_uniform_stage(t_in, loss_db, t_phys):
    """Noise temperature after a lossy two-port held at one physical temperature."""
    _nonneg("t_in", t_in)
    _nonneg("t_phys", t_phys)
    l = db_to_transmission(loss_db)
    return _ret(t_in * l + (1.0 - l) * np.asarray(t_phys, dtype=float))


def _rk4_step_matrix(alpha, h):
    # Augmented linear system u = (T, T_phys, dT_phys/dx):
    #   T' = alpha (T_phys - T),  T_phys' = slope,  slope' = 0
    # One classical RK4 step on u' = A u is u -> P(hA) u with P the
    # fourth-order Taylor polynomial of exp.
    alpha = np.asarray(alpha, dtype=float)
    A = np.zeros(alpha.shape + (3, 3))
    A[..., 0, 0] = -alpha
    A[..., 0, 1] = alpha
    A[..., 1, 2] = 1.0
    hA = h * A
    eye = np.broadcast_to(np.eye(3), hA.shape)
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    hA4 = hA3 @ hA
    return eye + hA + hA2 / 2.0 + hA3 / 6.0 + hA4 / 24.0


def gradient_cable_coefficients(loss_db, n_steps=DEFAULT_CABLE_STEPS):
    """Return (c_in, c_a, c_slope) so that T_out = c_in*t_in + c_a*T_a + c_slope*(T_b - T_a).

    The coefficients are exactly those produced by ``n_steps`` fixed RK4
    steps over the unit-normalised cable length; stepping is done by
    repeated squaring of the one-step propagator.
    """
    if int(n_steps) < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    _nonneg("loss_db", loss_db)
    alpha = np.asarray(loss_db, dtype=float) * np.log(10.0) / 10.0
    step = _rk4_step_matrix(alpha, 1.0 / int(n_steps))
    M = np.linalg.matrix_power(step, int(n_steps))
    return M[..., 0, 0], M[..., 0, 1], M[..., 0, 2]


def propagate_gradient_cable(t_in, loss_db, t_phys_in, t_phys_out, n_steps=DEFAULT_CABLE_STEPS):
    """Noise temperature at the far end of a cable with a linear temperature profile.

    Integrates dT/dx = alpha (T_phys(x) - T) along the cable, where alpha is
    the distributed attenuation and T_phys runs linearly from ``t_phys_in``
    at the input to ``t_phys_out`` at the output.
    """
    for name, v in (("t_in", t_in), ("t_phys_in", t_phys_in), ("t_phys_out", t_phys_out)):
        _nonneg(name, v)
    c_in, c_a, c_s = gradient_cable_coefficients(loss_db, n_steps)
    a = np.asarray(t_phys_in, dtype=float)
    b = np.asarray(t_phys_out, dtype=float)
    return _ret(c_in * t_in + c_a * a + c_s * (b - a))


def combine_coupler(t_through_in, t_coupled_in, through_loss_db, coupling_loss_db, t_phys):
    """Ideal directional coupler seen from its output port.

    The through branch is attenuated by ``through_loss_db`` against the
    coupler's physical temperature, then weighted by (1 - l_c); the coupled
    port contributes its input temperature times the coupling transmission l_c.
    """
    _nonneg("t_through_in", t_through_in)
    _nonneg("t_coupled_in", t_coupled_in)
    _nonneg("t_phys", t_phys)
    l_t = db_to_transmission(through_loss_db)
    l_c = db_to_transmission(coupling_loss_db)
    through = t_through_in * l_t + (1.0 - l_t) * np.asarray(t_phys, dtype=float)
    return _ret(through * (1.0 - l_c) + np.asarray(t_coupled_in, dtype=float) * l_c)


def amplify(t_in, gain_db, noise_temp_added):
    """Amplifier with input-referred added noise: (t_in + T_N) * g."""
    _nonneg("t_in", t_in)
    _nonneg("noise_temp_added", noise_temp_added)
    g = 10.0 ** (np.asarray(gain_db, dtype=float) / 10.0)
    return _ret((np.asarray(t_in, dtype=float) + noise_temp_added) * g)


def noise_power_dbm(noise_temp, bandwidth):
    """Available noise power k_B T B expressed in dBm."""
    if np.any(np.asarray(noise_temp) <= 0) or np.any(np.asarray(bandwidth) <= 0):
        raise DomainError("noise_temp and bandwidth must be > 0")
    p = K_B * np.asarray(noise_temp, dtype=float) * np.asarray(bandwidth, dtype=float)
    return _ret(10.0 * np.log10(p / 1e-3))


@dataclass(frozen=True)
class NoiseState:
    plane_index: int
    label: str
    noise_temp: Any
    frequency: float | None = None


# required parameters per kind; anything else is optional
_REQUIRED = {
    UNIFORM: ("loss_db", "phys_temp"),
    GRADIENT: ("loss_db", "phys_temp_in", "phys_temp_out"),
    COUPLER: ("through_loss_db", "coupling_loss_db", "phys_temp"),
    AMPLIFIER: ("gain_db", "noise_temp_added"),
    CAVITY: ("internal_temp", "gamma"),
}


@dataclass(frozen=True)
class ChainStage:
    """One element of the chain. Fields not used by ``kind`` stay None.

    For an Amplifier, ``noise_temp_slope`` (K per K) lets the added noise
    track the physical temperature: T_N = noise_temp_added
    + slope * (phys_temp - reference_temp).

    A DirectionalCoupler takes its coupled-port noise either from a fixed
    ``coupled_input_noise`` or from an earlier plane named by ``coupled_from``
    (plane index or label).

    A Cavity stage replaces the running temperature with the cavity's emitted
    noise; its ``incident_temp`` (default ``phys_temp``) is what reflects off
    the port.
    """

    kind: str
    label: str = ""
    loss_db: Any = None
    gain_db: Any = None
    noise_temp_added: Any = None
    noise_temp_slope: Any = 0.0
    reference_temp: Any = None
    phys_temp: Any = None
    phys_temp_in: Any = None
    phys_temp_out: Any = None
    coupling_loss_db: Any = None
    through_loss_db: Any = None
    coupled_input_noise: Any = None
    coupled_from: int | str | None = None
    internal_temp: Any = None
    gamma: Any = None
    incident_temp: Any = None
    n_steps: int = DEFAULT_CABLE_STEPS
    sigma: dict = field(default_factory=dict, compare=False)

    @property
    def name(self):
        return self.label or self.kind

    def validate(self, index=None):
        where = f"stage {index} ({self.name})" if index is not None else f"stage {self.name}"
        if self.kind not in STAGE_KINDS:
            raise ConfigError(f"{where}: unknown kind {self.kind!r}")
        for attr in _REQUIRED[self.kind]:
            if getattr(self, attr) is None:
                raise ConfigError(f"{where}: missing required field {attr!r}")
        if self.kind == COUPLER and self.coupled_input_noise is None and self.coupled_from is None:
            raise ConfigError(f"{where}: needs coupled_input_noise or coupled_from")
        if self.kind == CAVITY and self.incident_temp is None and self.phys_temp is None:
            raise ConfigError(f"{where}: needs incident_temp or phys_temp")
        for attr in ("loss_db", "coupling_loss_db", "through_loss_db", "noise_temp_added",
                     "internal_temp", "incident_temp", "coupled_input_noise"):
            v = getattr(self, attr)
            if v is not None and np.any(np.asarray(v) < 0):
                raise ConfigError(f"{where}: {attr} must be >= 0, got {v}")
        for attr in ("phys_temp", "phys_temp_in", "phys_temp_out"):
            v = getattr(self, attr)
            if v is not None and np.any(np.asarray(v) <= 0):
                raise ConfigError(f"{where}: {attr} must be > 0, got {v}")
        if self.gamma is not None and np.any((np.asarray(self.gamma) < 0) | (np.asarray(self.gamma) > 1)):
            raise ConfigError(f"{where}: gamma must lie in [0, 1], got {self.gamma}")
        if self.kind == GRADIENT and int(self.n_steps) < 1:
            raise ConfigError(f"{where}: n_steps must be >= 1")
        if self.kind == AMPLIFIER and np.any(np.asarray(self.noise_temp_slope) != 0):
            if self.phys_temp is None or self.reference_temp is None:
                raise ConfigError(f"{where}: noise_temp_slope needs phys_temp and reference_temp")
        return self

    def amplifier_noise(self):
        tn = np.asarray(self.noise_temp_added, dtype=float)
        if np.any(np.asarray(self.noise_temp_slope) != 0):
            tn = tn + self.noise_temp_slope * (np.asarray(self.phys_temp) - self.reference_temp)
        return np.maximum(tn, 0.0)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _resolve_plane(ref, states, where):
    if isinstance(ref, str):
        for s in states:
            if s.label == ref:
                return s
        raise ConfigError(f"{where}: coupled_from refers to unknown plane {ref!r}")
    if not 0 <= int(ref) < len(states):
        raise ConfigError(f"{where}: coupled_from plane {ref} is not upstream")
    return states[int(ref)]


def apply_stage(stage, t_in, states=()):
    """Output temperature of one stage given its input and the upstream planes."""
    k = stage.kind
    if k == UNIFORM:
        return propagate_uniform_stage(t_in, stage.loss_db, stage.phys_temp)
    if k == GRADIENT:
        return propagate_gradient_cable(t_in, stage.loss_db, stage.phys_temp_in,
                                        stage.phys_temp_out, stage.n_steps)
    if k == COUPLER:
        if stage.coupled_from is not None:
            t_c = _resolve_plane(stage.coupled_from, states, f"stage {stage.name}").noise_temp
        else:
            t_c = stage.coupled_input_noise
        return combine_coupler(t_in, t_c, stage.through_loss_db, stage.coupling_loss_db,
                               stage.phys_temp)
    if k == AMPLIFIER:
        return amplify(t_in, stage.gain_db, stage.amplifier_noise())
    if k == CAVITY:
        inc = stage.incident_temp if stage.incident_temp is not None else stage.phys_temp
        return cavity_output_noise(stage.internal_temp, stage.gamma, inc)
    raise ConfigError(f"stage {stage.name}: unknown kind {k!r}")


def chain_propagate(source_temp, stages: Sequence[ChainStage], frequency=None, source_label="source"):
    """Noise temperature at every plane, plane 0 being the source itself."""
    if not stages:
        raise ConfigError("chain has no stages")
    _nonneg("source_temp", source_temp)
    states = [NoiseState(0, source_label, _ret(source_temp), frequency)]
    t = states[0].noise_temp
    for i, stage in enumerate(stages, start=1):
        stage.validate(i)
        t = apply_stage(stage, t, states)
        states.append(NoiseState(i, stage.label or f"plane{i}", t, frequency))
    return states
