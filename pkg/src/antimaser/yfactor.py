"""Y-factor forward model and inversion for the internal cavity noise temperature.

The dark cavity emits at the measurement's ambient temperature; the
cavity-plane physical temperature of the chain is what reflects off the port
in both states. Under light the
cavity emits at an unknown temperature ``t_m`` through a changed reflection
coefficient, and the LNA gain shifts by the measured amount. ``t_m`` is the
value whose predicted Y-factor change matches the measured one.

Everything downstream of the source is linear in ``t_m``, so the light-state
noise at the analyzer is evaluated once at two cavity temperatures and the
bisection runs on that exact affine form. All routines accept array-valued
chain parameters, which is how Monte-Carlo draws are evaluated in one pass.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import truncnorm

from .cavity import gamma_from_s11, power_reflection_from_s11
from .chain import AMPLIFIER, CAVITY, COUPLER, chain_propagate
from .config import ChainNetlist
from .errors import ConfigError, DomainError, InfeasibleMeasurementError, SolverError

GAMMA_VOLTAGE = "voltage"
GAMMA_POWER = "power"
GAMMA_CONVENTIONS = (GAMMA_VOLTAGE, GAMMA_POWER)

DELTA_Y_TOL_DB = 1e-4
T_M_XTOL = 1e-9
MONOTONE_GRID = 17
INFEASIBLE_WARN_FRACTION = 0.10
MIN_SAMPLES = 100


def reflection_gamma(s11_db, convention=GAMMA_VOLTAGE):
    """Reflection coefficient used in the emission weighting.

    ``voltage`` gives |S11| = 10^(S11/20); ``power`` gives |S11|^2 = 10^(S11/10).
    """
    if convention == GAMMA_VOLTAGE:
        return gamma_from_s11(s11_db)
    if convention == GAMMA_POWER:
        return power_reflection_from_s11(s11_db)
    raise DomainError(f"gamma convention must be one of {GAMMA_CONVENTIONS}, got {convention!r}")


def other_convention(convention):
    return GAMMA_VOLTAGE if convention == GAMMA_POWER else GAMMA_POWER


@dataclass(frozen=True)
class MeasurementRecord:
    ambient_temp: float
    coupler_db: float
    delta_y_db: float
    s11_dark_db: float
    s11_light_db: float
    delta_lna_gain_db: float = 0.0
    delta_noise_sa_db: float | None = None
    coupling_loss_db: float | None = None
    coupling_loss_db_alt: float | None = None
    heating_offset_k: float = 0.0
    label: str = ""
    reference_t_m: float | None = None
    reference_t_m_sigma: float | None = None
    sigma: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.ambient_temp <= 0:
            raise DomainError("ambient temperature must be > 0")
        if any(s < 0 for s in self.sigma.values()):
            raise DomainError("uncertainties must be >= 0")

    @property
    def name(self):
        return self.label or f"{self.coupler_db:g}dB_{self.ambient_temp:g}K"


@dataclass
class FitResult:
    t_m: float
    ci_low: float
    ci_high: float
    n_samples: int
    seed: int
    residual: float
    t_m_point: float
    n_infeasible: int = 0
    warnings: list = field(default_factory=list)

    @property
    def half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def prepare_netlist(net: ChainNetlist, record: MeasurementRecord, coupling_loss_db=None):
    """Resolve ambient placeholders and set the coupler to the record's coupling loss."""
    net = net.resolve(record.ambient_temp)
    cl = coupling_loss_db
    if cl is None:
        cl = record.coupling_loss_db if record.coupling_loss_db is not None else record.coupler_db
    i = net.index_of(kind=COUPLER)
    stages = list(net.stages)
    stages[i] = stages[i].replace(coupling_loss_db=float(cl))
    return replace(net, stages=tuple(stages)).validate()


def _cavity_and_lna(net):
    cav = [i for i, s in enumerate(net.stages) if s.kind == CAVITY]
    if len(cav) != 1:
        raise ConfigError(f"chain must contain exactly one Cavity stage, found {len(cav)}")
    amps = [i for i, s in enumerate(net.stages) if s.kind == AMPLIFIER and i > cav[0]]
    if not amps:
        raise ConfigError("chain needs an Amplifier downstream of the cavity")
    return cav[0], amps[0]


def cavity_phys_temp(net):
    st = net.stages[_cavity_and_lna(net)[0]]
    return st.incident_temp if st.incident_temp is not None else st.phys_temp


def _final_temp(net, source_temp, t_m, gamma, gain_offset_db=0.0, lna_noise_offset=0.0,
                incident_temp=None):
    ic, ia = _cavity_and_lna(net)
    stages = list(net.stages)
    cav = stages[ic]
    changes = {"internal_temp": t_m, "gamma": gamma}
    if incident_temp is not None:
        changes["incident_temp"] = incident_temp
    stages[ic] = cav.replace(**changes)
    amp = stages[ia]
    stages[ia] = amp.replace(gain_db=amp.gain_db + gain_offset_db,
                             noise_temp_added=amp.noise_temp_added + lna_noise_offset)
    return chain_propagate(source_temp, stages)[-1].noise_temp


def analyzer_temps(net, t_m, gamma, gain_offset_db=0.0, lna_noise_offset=0.0, incident_temp=None):
    """(T_on, T_off) at the last plane for the noise source ON and OFF."""
    kw = dict(gain_offset_db=gain_offset_db, lna_noise_offset=lna_noise_offset,
              incident_temp=incident_temp)
    return (_final_temp(net, net.source_temp_on_k, t_m, gamma, **kw),
            _final_temp(net, net.source_temp_off_k, t_m, gamma, **kw))


def forward_y(net, t_m, gamma, gain_offset_db=0.0, lna_noise_offset=0.0, incident_temp=None):
    """Y-factor in dB, 10 log10(T_on / T_off), with the full chain evaluated."""
    on, off = analyzer_temps(net, t_m, gamma, gain_offset_db, lna_noise_offset, incident_temp)
    return 10.0 * np.log10(np.asarray(on) / np.asarray(off))


def _gammas(record_vals, convention):
    return (reflection_gamma(record_vals["s11_dark_db"], convention),
            reflection_gamma(record_vals["s11_light_db"], convention))


def _record_values(record):
    return {k: getattr(record, k) for k in
            ("ambient_temp", "delta_y_db", "delta_lna_gain_db", "s11_dark_db", "s11_light_db",
             "heating_offset_k")}


class _Inversion:
    """Light-state response, affine in t_m, for one (possibly batched) measurement."""

    def __init__(self, net, vals, convention, lna_noise_offset=0.0):
        self.net = net
        g_dark, g_light = _gammas(vals, convention)
        anchor = np.asarray(vals["ambient_temp"], dtype=float)
        incident = np.asarray(cavity_phys_temp(net), dtype=float)
        self.upper = anchor + vals["heating_offset_k"]
        self.target = np.asarray(vals["delta_y_db"], dtype=float)
        self.y_dark = forward_y(net, anchor, g_dark, incident_temp=incident)
        kw = dict(gain_offset_db=vals["delta_lna_gain_db"], lna_noise_offset=lna_noise_offset,
                  incident_temp=incident + vals["heating_offset_k"])
        on0, off0 = analyzer_temps(net, 0.0, g_light, **kw)
        on1, off1 = analyzer_temps(net, 1.0, g_light, **kw)
        self.on = (np.asarray(on0), np.asarray(on1) - on0)
        self.off = (np.asarray(off0), np.asarray(off1) - off0)
        shape = np.broadcast(self.upper, self.target, self.y_dark, *self.on, *self.off).shape
        self.upper = np.broadcast_to(self.upper, shape)
        self.target = np.broadcast_to(self.target, shape)

    def model(self, t_m):
        on = self.on[0] + self.on[1] * t_m
        off = self.off[0] + self.off[1] * t_m
        return 10.0 * np.log10(on / off) - self.y_dark

    def monotone(self):
        frac = np.linspace(0.0, 1.0, MONOTONE_GRID)
        grid = np.multiply.outer(frac, self.upper)
        vals = self.model(grid)
        return np.all(np.diff(vals, axis=0) < 0, axis=0)

    def solve(self, xtol=T_M_XTOL, max_iter=200):
        """Vectorised bisection on [0, upper]; infeasible entries come back NaN."""
        g = lambda t: self.model(t) - self.target  # noqa: E731
        lo = np.zeros(self.upper.shape)
        hi = self.upper.astype(float).copy()
        feasible = (g(lo) >= 0) & (g(hi) <= 0) & self.monotone()
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            above = g(mid) > 0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo <= xtol):
                break
        t = 0.5 * (lo + hi)
        res = np.abs(g(t))
        return np.where(feasible, t, np.nan), np.where(feasible, res, np.nan), feasible


def delta_y(net, record, t_m_light, convention=GAMMA_POWER, lna_noise_offset=0.0):
    """Y(light, t_m_light) - Y(dark) in dB, evaluated through the full chain."""
    net = prepare_netlist(net, record)
    vals = _record_values(record)
    g_dark, g_light = _gammas(vals, convention)
    t_inc = cavity_phys_temp(net)
    y_dark = forward_y(net, record.ambient_temp, g_dark, incident_temp=t_inc)
    y_light = forward_y(net, t_m_light, g_light, gain_offset_db=record.delta_lna_gain_db,
                        lna_noise_offset=lna_noise_offset,
                        incident_temp=t_inc + record.heating_offset_k)
    return float(y_light - y_dark)


def fit_tm(net, record, convention=GAMMA_POWER, coupling_loss_db=None, lna_noise_offset=0.0,
           return_residual=False):
    """Cavity temperature under light that reproduces the measured Y-factor change."""
    prepared = prepare_netlist(net, record, coupling_loss_db)
    inv = _Inversion(prepared, _record_values(record), convention, lna_noise_offset)
    if not bool(inv.monotone()):
        raise SolverError(f"{record.name}: delta-Y is not strictly monotone in t_m over the bracket")
    t, res, ok = inv.solve()
    if not bool(ok):
        lo, hi = float(inv.model(0.0)), float(inv.model(inv.upper))
        raise InfeasibleMeasurementError(
            f"{record.name}: measured delta-Y {record.delta_y_db} dB is outside the reachable "
            f"range [{hi:.4f}, {lo:.4f}] dB for t_m in [0, {float(inv.upper):g}] K")
    if float(res) > DELTA_Y_TOL_DB:
        raise SolverError(f"{record.name}: bisection residual {float(res):.2e} dB exceeds tolerance")
    return (float(t), float(res)) if return_residual else float(t)


# --- Monte-Carlo ---------------------------------------------------------------

_LOSS_ATTRS = {"loss_db", "coupling_loss_db", "through_loss_db"}
_TEMP_ATTRS = {"phys_temp", "phys_temp_in", "phys_temp_out", "noise_temp_added", "internal_temp",
               "incident_temp", "coupled_input_noise", "reference_temp"}


def _bounds(attr):
    if attr in _LOSS_ATTRS or attr in _TEMP_ATTRS or attr.startswith("source_temp"):
        return 0.0, np.inf
    if attr == "gamma":
        return 0.0, 1.0
    if attr.startswith("s11_"):
        return -np.inf, 0.0
    if attr in ("heating_offset_k", "ambient_temp"):
        return 0.0, np.inf
    return -np.inf, np.inf


def uncertain_parameters(net, record):
    """Ordered (where, attr, nominal, sigma) list; the order fixes the random-stream layout."""
    out = []
    for key in sorted(net.sigma):
        out.append((("net",), key, getattr(net, key), net.sigma[key]))
    for i, st in enumerate(net.stages):
        for attr in sorted(st.sigma):
            out.append((("stage", i), attr, getattr(st, attr), st.sigma[attr]))
    for attr in sorted(record.sigma):
        if attr not in _record_values(record):
            continue
        out.append((("record",), attr, getattr(record, attr), record.sigma[attr]))
    return out


def _draw(u, nominal, sigma, attr):
    lo, hi = _bounds(attr)
    a, b = (lo - nominal) / sigma, (hi - nominal) / sigma
    return truncnorm.ppf(u, a, b, loc=nominal, scale=sigma)


def sample_inputs(net, record, n_samples, seed, sigma_scale=None):
    """Draw every uncertain input; returns (sampled netlist, record values).

    Row i of the uniform matrix feeds draw i, so a draw depends only on
    (seed, i) and not on how the batch is evaluated.
    """
    params = uncertain_parameters(net, record)
    rng = np.random.default_rng(seed)
    u = rng.random((n_samples, max(len(params), 1)))
    stages = [dict() for _ in net.stages]
    header = {}
    vals = _record_values(record)
    for j, (where, attr, nominal, sigma) in enumerate(params):
        if sigma_scale:
            sigma = sigma * sigma_scale.get((where, attr), 1.0)
        if sigma == 0:
            continue
        x = _draw(u[:, j], float(nominal), float(sigma), attr)
        if where[0] == "net":
            header[attr] = x
        elif where[0] == "stage":
            stages[where[1]][attr] = x
        else:
            vals[attr] = x
    new_stages = tuple(st.replace(**ch) if ch else st for st, ch in zip(net.stages, stages))
    return replace(net, stages=new_stages, **header), vals


def monte_carlo_ci(net, record, n_samples=10_000, seed=0, convention=GAMMA_POWER,
                   sigma_scale=None, coupling_loss_db=None):
    """Median and 16/84-percentile interval of t_m over independent input draws.

    ``sigma_scale`` maps (where, attr) keys from :func:`uncertain_parameters`
    to multipliers of the stated sigma.
    """
    if n_samples < MIN_SAMPLES:
        raise DomainError(f"n_samples must be >= {MIN_SAMPLES}")
    t_point, res_point = fit_tm(net, record, convention, coupling_loss_db, return_residual=True)
    prepared = prepare_netlist(net, record, coupling_loss_db)
    sampled, vals = sample_inputs(prepared, record, n_samples, seed, sigma_scale)
    inv = _Inversion(sampled, vals, convention)
    t, _, ok = inv.solve()
    t = np.broadcast_to(t, (n_samples,))
    ok = np.broadcast_to(ok, (n_samples,))
    n_bad = int(n_samples - np.count_nonzero(ok))
    notes = []
    if n_bad > INFEASIBLE_WARN_FRACTION * n_samples:
        notes.append(f"{n_bad} of {n_samples} draws had no solution in the bracket")
    good = t[ok]
    if good.size == 0:
        raise InfeasibleMeasurementError(f"{record.name}: no Monte-Carlo draw was feasible")
    lo, med, hi = np.percentile(good, [16.0, 50.0, 84.0])
    return FitResult(t_m=float(med), ci_low=float(lo), ci_high=float(hi), n_samples=int(n_samples),
                     seed=int(seed), residual=float(res_point), t_m_point=float(t_point),
                     n_infeasible=n_bad, warnings=notes)


# --- LNA input-mismatch bound ---------------------------------------------------

def lna_mismatch_bound(gamma_in, noise_table):
    """LNA noise temperature at reflection magnitude ``gamma_in`` by linear interpolation.

    ``noise_table`` holds (|Gamma|, kelvin) pairs sorted by |Gamma|; inputs
    outside the table are clamped to its ends with a warning.
    """
    tab = np.asarray(noise_table, dtype=float)
    if tab.ndim != 2 or tab.shape[1] != 2 or len(tab) < 1:
        raise DomainError("noise_table must be a list of (|Gamma|, kelvin) pairs")
    if np.any(np.diff(tab[:, 0]) <= 0):
        raise DomainError("noise_table must be sorted by strictly increasing |Gamma|")
    if not 0 <= gamma_in <= 1:
        raise DomainError("gamma_in must lie in [0, 1]")
    if gamma_in < tab[0, 0] or gamma_in > tab[-1, 0]:
        warnings.warn(f"|Gamma| = {gamma_in:.3f} outside the LNA table range; clamped", stacklevel=2)
    return float(np.interp(gamma_in, tab[:, 0], tab[:, 1]))


def lna_extra_noise(record, noise_table):
    """Increase of LNA noise from the dark to the light reflection, never negative."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dark = lna_mismatch_bound(gamma_from_s11(record.s11_dark_db), noise_table)
        light = lna_mismatch_bound(gamma_from_s11(record.s11_light_db), noise_table)
    return max(0.0, light - dark)


def worst_case_tm(net, record, noise_table, convention=GAMMA_POWER):
    """Refit with the LNA noise raised by its mismatch degradation under light.

    The LNA sees the cavity's voltage reflection in both states; only the
    increase from dark to light is added, never a decrease, so the bound can
    only lie at or below the headline fit. Returns (t_m_bound, added_noise_k).
    """
    extra = lna_extra_noise(record, noise_table)
    return fit_tm(net, record, convention, lna_noise_offset=extra), extra


def predicted_delta_noise_sa(net, record, t_m_light, convention=GAMMA_POWER):
    """Change of analyzer noise (source OFF) when light is applied, in dB."""
    prepared = prepare_netlist(net, record)
    vals = _record_values(record)
    g_dark, g_light = _gammas(vals, convention)
    t_inc = cavity_phys_temp(prepared)
    _, off_dark = analyzer_temps(prepared, record.ambient_temp, g_dark, incident_temp=t_inc)
    _, off_light = analyzer_temps(prepared, t_m_light, g_light,
                                  gain_offset_db=record.delta_lna_gain_db,
                                  incident_temp=t_inc + record.heating_offset_k)
    return float(10.0 * math.log10(off_light / off_dark))


def fit_report(net, record, n_samples=10_000, seed=0, convention=GAMMA_POWER, noise_table=None):
    """One row of the measured-column reproduction, with alternative readings and diagnostics.

    An infeasible fit does not raise; the row carries ``flag`` instead.
    """
    row = {"label": record.name, "ambient_temp_k": record.ambient_temp,
           "coupler_db": record.coupler_db, "delta_y_db": record.delta_y_db,
           "gamma_convention": convention}
    try:
        if n_samples:
            fr = monte_carlo_ci(net, record, n_samples, seed, convention)
        else:
            t, res = fit_tm(net, record, convention, return_residual=True)
            fr = FitResult(t, t, t, 0, seed, res, t)
    except SolverError as e:
        row.update(flag=str(e))
        return row
    row.update(t_m_k=fr.t_m, ci_low_k=fr.ci_low, ci_high_k=fr.ci_high, t_m_point_k=fr.t_m_point,
               residual_db=fr.residual, n_samples=fr.n_samples, n_infeasible=fr.n_infeasible,
               seed=fr.seed)
    alts = [fr.t_m_point]
    try:
        row["t_m_alt_gamma_k"] = fit_tm(net, record, other_convention(convention))
        alts.append(row["t_m_alt_gamma_k"])
    except SolverError:
        row["t_m_alt_gamma_k"] = None
    if record.coupling_loss_db_alt is not None:
        try:
            row["t_m_alt_coupler_k"] = fit_tm(net, record, convention, record.coupling_loss_db_alt)
            alts.append(row["t_m_alt_coupler_k"])
        except SolverError:
            row["t_m_alt_coupler_k"] = None
    row["spread_k"] = max(alts) - min(alts)
    notes = list(fr.warnings)
    if noise_table is not None:
        try:
            row["t_m_lna_bound_k"], row["lna_extra_noise_k"] = worst_case_tm(net, record, noise_table,
                                                                              convention)
        except SolverError:
            row["t_m_lna_bound_k"] = None
            row["lna_extra_noise_k"] = lna_extra_noise(record, noise_table)
            notes.append("LNA-mismatch bound has no solution in the bracket")
    row["delta_noise_sa_pred_db"] = predicted_delta_noise_sa(net, record, fr.t_m_point, convention)
    row["delta_noise_sa_meas_db"] = record.delta_noise_sa_db
    if record.reference_t_m is not None:
        row["reference_t_m_k"] = record.reference_t_m
        row["deviation_pct"] = 100.0 * (fr.t_m_point - record.reference_t_m) / record.reference_t_m
    row["flag"] = "; ".join(notes) or None
    return row


_RECORD_KEYS = {
    "label": "label", "ambient_temp_k": "ambient_temp", "coupler_db": "coupler_db",
    "delta_y_db": "delta_y_db", "s11_dark_db": "s11_dark_db", "s11_light_db": "s11_light_db",
    "delta_lna_gain_db": "delta_lna_gain_db", "delta_noise_sa_db": "delta_noise_sa_db",
    "coupling_loss_db": "coupling_loss_db", "coupling_loss_db_alt": "coupling_loss_db_alt",
    "heating_offset_k": "heating_offset_k", "reference_t_m_k": "reference_t_m",
    "reference_t_m_sigma_k": "reference_t_m_sigma",
}
_REQUIRED_RECORD = ("ambient_temp_k", "coupler_db", "delta_y_db", "s11_dark_db", "s11_light_db")


def record_from_dict(d, index=0):
    where = f"measurement {index} ({d.get('label', '?')})" if isinstance(d, dict) else f"measurement {index}"
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - set(_RECORD_KEYS) - {"sigma", "notes", "comment"}
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    for k in _REQUIRED_RECORD:
        if k not in d:
            raise ConfigError(f"{where}: missing required field {k!r}")
    kw = {}
    for k, attr in _RECORD_KEYS.items():
        if k not in d or d[k] is None:
            continue
        v = d[k]
        if k == "label":
            kw[attr] = str(v)
        elif isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: field {k!r} must be a number, got {v!r}")
        else:
            kw[attr] = float(v)
    sigma = {}
    for k, s in (d.get("sigma") or {}).items():
        if k not in _RECORD_KEYS or k == "label":
            raise ConfigError(f"{where}: sigma given for unknown field {k!r}")
        if isinstance(s, bool) or not isinstance(s, (int, float)) or s < 0:
            raise ConfigError(f"{where}: sigma.{k} must be a non-negative number")
        sigma[_RECORD_KEYS[k]] = float(s)
    try:
        return MeasurementRecord(sigma=sigma, **kw)
    except DomainError as e:
        raise ConfigError(f"{where}: {e}") from e
