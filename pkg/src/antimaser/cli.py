"""Command-line front end.

    antimaser <command> --config <path> [--output <path>] [--format csv|json|table]
              [--seed N] [--samples N]

Commands: chain, fit, predict, sweep, spins. ``--config`` takes a file path or
the name of a bundled fixture (e.g. ``table_s1_5k_10db``). Exit status is 0 on
success (rows may carry a flag), 2 for configuration errors and 3 for solver
failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import cavity, cooling, spins
from .chain import chain_propagate, noise_power_dbm
from .config import fixture_path, netlist_from_dict, read_json, require
from .errors import ConfigError, DomainError, SolverError
from .yfactor import (GAMMA_CONVENTIONS, GAMMA_POWER, fit_report, record_from_dict,
                      uncertain_parameters)

COMMANDS = ("chain", "fit", "predict", "sweep", "spins")
FORMATS = ("csv", "json", "table")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

FIT_COLUMNS = ("label", "ambient_temp_k", "coupler_db", "delta_y_db", "gamma_convention",
               "t_m_k", "ci_low_k", "ci_high_k", "t_m_point_k", "residual_db", "n_samples",
               "n_infeasible", "seed", "t_m_alt_gamma_k", "t_m_alt_coupler_k", "spread_k",
               "t_m_lna_bound_k", "lna_extra_noise_k", "delta_noise_sa_pred_db",
               "delta_noise_sa_meas_db", "reference_t_m_k", "deviation_pct", "flag")
SWEEP_COLUMNS = ("q", "kappa_int_hz", "t_mode_k", "n_planck", "n_rj")


class Report:
    """Rows with a fixed column order plus a flat summary."""

    def __init__(self, command, columns, rows, summary=None):
        self.command = command
        self.columns = tuple(columns)
        self.rows = [{c: r.get(c) for c in self.columns} for r in rows]
        self.summary = dict(summary or {})


# --- config helpers -------------------------------------------------------------

def _resolve_config_path(name):
    p = Path(name)
    if p.exists():
        return p
    if p.suffix in ("", ".json") and p.parent == Path("."):
        return fixture_path(p.name)
    raise ConfigError(f"config file {name} not found")


def _float(block, key, where, default=None):
    if key not in block:
        if default is None:
            raise ConfigError(f"{where}: missing required field {key!r}")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: field {key!r} must be a number, got {v!r}")
    return float(v)


def _block(cfg, key):
    b = require(cfg, key, "config")
    if not isinstance(b, dict):
        raise ConfigError(f"config: block {key!r} must be an object")
    return b


# --- chain ----------------------------------------------------------------------

def cmd_chain(cfg, base_dir, args):
    if "chain" not in cfg and "stages" not in cfg and "chain_file" not in cfg:
        raise ConfigError("config: no chain block")
    net = netlist_from_dict(cfg.get("chain", cfg), base_dir)
    if "ambient_temp_k" in cfg:
        net = net.resolve(_float(cfg, "ambient_temp_k", "config"))
    net.validate()
    off = chain_propagate(net.source_temp_off_k, net.stages, net.frequency_hz)
    on = chain_propagate(net.source_temp_on_k, net.stages, net.frequency_hz)
    rows = [{"plane": a.plane_index, "label": a.label, "noise_temp_off_k": float(a.noise_temp),
             "noise_temp_on_k": float(b.noise_temp)} for a, b in zip(off, on)]
    t_off, t_on = rows[-1]["noise_temp_off_k"], rows[-1]["noise_temp_on_k"]
    summary = {"bandwidth_hz": net.bandwidth_hz,
               "noise_power_off_dbm": noise_power_dbm(t_off, net.bandwidth_hz),
               "noise_power_on_dbm": noise_power_dbm(t_on, net.bandwidth_hz),
               "y_factor_db": 10.0 * math.log10(t_on / t_off)}
    return Report("chain", ("plane", "label", "noise_temp_off_k", "noise_temp_on_k"), rows, summary)


# --- fit ------------------------------------------------------------------------

def cmd_fit(cfg, base_dir, args):
    net = netlist_from_dict(_block(cfg, "chain"), base_dir)
    recs = require(cfg, "measurements", "config")
    if not isinstance(recs, list) or not recs:
        raise ConfigError("config: 'measurements' must be a non-empty array")
    records = [record_from_dict(d, i) for i, d in enumerate(recs, start=1)]
    convention = cfg.get("gamma_convention", GAMMA_POWER)
    if convention not in GAMMA_CONVENTIONS:
        raise ConfigError(f"config: gamma_convention must be one of {GAMMA_CONVENTIONS}")
    table = cfg.get("lna_noise_table")
    n = args.samples
    rows = []
    for rec in records:
        has_sigma = any(s > 0 for *_, s in uncertain_parameters(net, rec))
        rows.append(fit_report(net, rec, n if has_sigma else 0, args.seed, convention, table))
    summary = {"seed": args.seed, "samples": n, "gamma_convention": convention,
               "n_flagged": sum(1 for r in rows if r.get("flag"))}
    return Report("fit", FIT_COLUMNS, rows, summary)


# --- predict / sweep ------------------------------------------------------------

def _cavity_kappa(cfg):
    cav = _block(cfg, "cavity")
    f0 = _float(cav, "frequency_hz", "cavity")
    q = _float(cav, "q_unloaded", "cavity")
    if f0 <= 0 or q <= 0:
        raise ConfigError("cavity: frequency_hz and q_unloaded must be > 0")
    return f0, q


def _scenario(block, f0, q, where):
    """Scenario at the calibration Q, with gamma_spins fixed or calibrated."""
    conv = block.get("convention", spins.RAYLEIGH_JEANS)
    if conv not in spins.CONVENTIONS:
        raise ConfigError(f"{where}: convention must be one of {spins.CONVENTIONS}")
    s = cooling.CoolingScenario.from_q(
        f0, q, t_ambient=_float(block, "t_ambient_k", where),
        t_spin=_float(block, "t_spin_k", where, 0.0),
        kappa_external=_float(block, "kappa_external_hz", where, 0.0),
        t_external=_float(block, "t_external_k", where, 0.0), convention=conv)
    if "calibrate_mode_temp_k" in block:
        target = _float(block, "calibrate_mode_temp_k", where)
        s = s.replace(gamma_spins=cooling.calibrate_gamma_spins(target, s.replace(kappa_external=0.0)))
    else:
        s = s.replace(gamma_spins=_float(block, "gamma_spins_hz", where, 0.0))
    return s


def _feed_temperature(feed, base_dir, t_ambient):
    net = netlist_from_dict({"chain_file": require(feed, "chain_file", "feed")}, base_dir)
    net = net.resolve(t_ambient).validate()
    states = chain_propagate(net.source_temp_off_k, net.stages)
    plane = require(feed, "coupled_plane", "feed")
    t_c = next((s.noise_temp for s in states if s.label == plane), None)
    if t_c is None:
        raise ConfigError(f"feed: chain has no plane labelled {plane!r}")
    return cooling.external_temperature_from_feed(
        float(t_c), _float(feed, "coupling_loss_db", "feed"), _float(feed, "feed_loss_db", "feed"),
        t_ambient)


PREDICT_COLUMNS = ("label", "t_ambient_k", "q", "kappa_int_hz", "gamma_spins_hz", "kappa_ext_hz",
                   "t_ext_k", "t_ext_source", "t_ext_feed_k", "t_mode_no_coupling_k",
                   "n_rj_no_coupling", "n_planck_no_coupling", "t_mode_coupled_k",
                   "n_rj_coupled", "n_planck_coupled")


def cmd_predict(cfg, base_dir, args):
    f0, q_cal = _cavity_kappa(cfg)
    defaults = cfg.get("scenario", {})
    q_values = defaults.get("q_values", [q_cal])
    preds = cfg.get("predictions") or [{}]
    feed = cfg.get("feed")
    rows = []
    for i, p in enumerate(preds, start=1):
        where = f"prediction {i} ({p.get('label', '?')})"
        block = {k: v for k, v in defaults.items() if k != "q_values"} | p
        s = _scenario(block, f0, q_cal, where)
        if "s11_light_db" in block:
            g = cavity.gamma_from_s11(_float(block, "s11_light_db", where))
            regime = block.get("coupling_regime", cavity.UNDERCOUPLED)
            s = s.replace(kappa_external=cavity.kappa_ext_from_coupling(g, regime, s.kappa_internal))
        t_feed = _feed_temperature(feed, base_dir, s.t_ambient) if feed else None
        source = "given"
        if "fit_mode_temp_k" in block:
            s = s.replace(t_external=cooling.fit_external_temperature(
                _float(block, "fit_mode_temp_k", where), s))
            source = "fitted"
        elif "t_external_k" not in block and t_feed is not None:
            s = s.replace(t_external=t_feed)
            source = "feed"
        for q in q_values:
            sq = s.replace(kappa_internal=f0 / float(q))
            bare = cooling.steady_mode_temperature(sq.replace(kappa_external=0.0))
            row = {"label": p.get("label", f"scenario{i}"), "t_ambient_k": s.t_ambient, "q": float(q),
                   "kappa_int_hz": sq.kappa_internal, "gamma_spins_hz": s.gamma_spins,
                   "kappa_ext_hz": s.kappa_external, "t_ext_k": s.t_external,
                   "t_ext_source": source, "t_ext_feed_k": t_feed,
                   "t_mode_no_coupling_k": bare,
                   "n_rj_no_coupling": spins.occupancy(bare, f0, spins.RAYLEIGH_JEANS),
                   "n_planck_no_coupling": spins.occupancy(bare, f0, spins.PLANCK)}
            if s.kappa_external > 0:
                t = cooling.steady_mode_temperature(sq)
                row.update(t_mode_coupled_k=t, n_rj_coupled=spins.occupancy(t, f0, spins.RAYLEIGH_JEANS),
                           n_planck_coupled=spins.occupancy(t, f0, spins.PLANCK))
            rows.append(row)
    return Report("predict", PREDICT_COLUMNS, rows, {"frequency_hz": f0, "q_calibration": q_cal})


def _q_values(sw):
    if "q_values" in sw:
        qs = [float(q) for q in sw["q_values"]]
    else:
        lo, hi = _float(sw, "q_min", "sweep"), _float(sw, "q_max", "sweep")
        n = int(_float(sw, "n_points", "sweep"))
        if not 0 < lo <= hi or n < 1:
            raise ConfigError("sweep: need 0 < q_min <= q_max and n_points >= 1")
        spacing = sw.get("spacing", "log")
        if spacing == "log":
            qs = np.geomspace(lo, hi, n).tolist()
        elif spacing == "linear":
            qs = np.linspace(lo, hi, n).tolist()
        else:
            raise ConfigError("sweep: spacing must be 'log' or 'linear'")
    if any(q <= 0 for q in qs):
        raise ConfigError("sweep: Q values must be > 0")
    return qs


def cmd_sweep(cfg, base_dir, args):
    f0, q_cal = _cavity_kappa(cfg)
    s = _scenario(_block(cfg, "scenario"), f0, q_cal, "scenario")
    rows = [dict(zip(SWEEP_COLUMNS, r)) for r in cooling.q_sweep(s, _q_values(_block(cfg, "sweep")))]
    summary = {"frequency_hz": f0, "q_calibration": q_cal, "gamma_spins_hz": s.gamma_spins,
               "convention": s.convention}
    return Report("sweep", SWEEP_COLUMNS, rows, summary)


# --- spins ----------------------------------------------------------------------

SPINS_COLUMNS = ("kind", "label", "temp_k", "freq_hz", "p_minus", "p_zero", "p_plus",
                 "polarization_difference", "spin_temp_k", "spin_state", "gamma_s_hz",
                 "n_rj", "n_planck")


def _spin_state(t, dp):
    if t == math.inf:
        return "saturated"
    if dp < 0:
        return "inverted"
    if t == 0:
        return "fully_polarized"
    return "positive"


def cmd_spins(cfg, base_dir, args):
    sp = _block(cfg, "spins")
    d = _float(sp, "zero_field_splitting_hz", "spins", spins.D_DEFAULT)
    gyro = _float(sp, "gyromagnetic_ratio_hz_per_t", "spins", spins.GYRO_DEFAULT)
    transition = sp.get("transition", spins.ZERO_TO_PLUS)
    if transition not in spins.TRANSITIONS:
        raise ConfigError(f"spins: transition must be one of {spins.TRANSITIONS}")
    if "field_t" in sp:
        levels = spins.NvLevels(d, gyro, _float(sp, "field_t", "spins"))
    else:
        levels = spins.NvLevels.for_transition(_float(sp, "transition_freq_hz", "spins"),
                                               transition, d, gyro)
    f_minus, f_plus = spins.transition_frequencies(levels)
    freq = f_plus if transition == spins.ZERO_TO_PLUS else f_minus
    if "linewidth_hz" in sp:
        width = _float(sp, "linewidth_hz", "spins")
    elif "t2star_s" in sp:
        width = spins.dephasing_linewidth(_float(sp, "t2star_s", "spins"))
    else:
        width = None
    g = sp.get("g_ensemble_hz")

    rows = []
    for i, st in enumerate(sp.get("states", []), start=1):
        where = f"spin state {i} ({st.get('label', '?')})"
        t_ref = st.get("reference_temp_k")
        if "populations" in st:
            pops = spins.Populations(*[float(x) for x in st["populations"]])
        elif "echo_ratio_plus" in st or "echo_ratio_minus" in st:
            pops = spins.populations_from_echo_ratios(
                levels, _float(st, "reference_temp_k", where), _float(st, "echo_ratio_plus", where),
                _float(st, "echo_ratio_minus", where))
        else:
            pops = spins.thermal_populations(levels, _float(st, "reference_temp_k", where))
        lo, up = pops.pair(transition)
        dp = lo - up
        t_s = spins.spin_temperature(lo, up, freq)
        row = {"kind": "state", "label": st.get("label", f"state{i}"), "temp_k": t_ref,
               "freq_hz": freq, "p_minus": pops.p_minus, "p_zero": pops.p_zero,
               "p_plus": pops.p_plus, "polarization_difference": dp, "spin_temp_k": t_s,
               "spin_state": _spin_state(t_s, dp)}
        if g is not None and width is not None:
            row["gamma_s_hz"] = spins.collective_absorption_rate(float(g), width, dp)
        if 0 <= t_s < math.inf:
            row["n_rj"] = spins.occupancy(t_s, freq, spins.RAYLEIGH_JEANS)
            row["n_planck"] = spins.occupancy(t_s, freq, spins.PLANCK)
        rows.append(row)
    for t in sp.get("mode_temps_k", []):
        t = float(t)
        rows.append({"kind": "occupancy", "label": f"mode_{t:g}K", "temp_k": t, "freq_hz": freq,
                     "n_rj": spins.occupancy(t, freq, spins.RAYLEIGH_JEANS),
                     "n_planck": spins.occupancy(t, freq, spins.PLANCK)})
    summary = {"field_t": levels.field, "f_minus_to_zero_hz": f_minus, "f_zero_to_plus_hz": f_plus,
               "transition": transition}
    if width is not None:
        summary["dephasing_linewidth_hz"] = width
    return Report("spins", SPINS_COLUMNS, rows, summary)


HANDLERS = {"chain": cmd_chain, "fit": cmd_fit, "predict": cmd_predict, "sweep": cmd_sweep,
            "spins": cmd_spins}


# --- emission -------------------------------------------------------------------

def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _csv_cell(v):
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rep: Report):
    buf = io.StringIO()
    for k, v in rep.summary.items():
        buf.write(f"# {k}={_csv_cell(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rep.columns)
    for r in rep.rows:
        w.writerow([_csv_cell(r[c]) for c in rep.columns])
    return buf.getvalue()


def _json_value(v):
    v = _plain(v)
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else "-inf" if v < 0 else "nan"
    return v


def to_json(rep: Report):
    doc = {"command": rep.command, "columns": list(rep.columns),
           "rows": [{c: _json_value(r[c]) for c in rep.columns} for r in rep.rows],
           "summary": {k: _json_value(v) for k, v in rep.summary.items()}}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _fmt(v):
    v = _plain(v)
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def to_table(rep: Report):
    cells = [list(rep.columns)] + [[_fmt(r[c]) for c in rep.columns] for r in rep.rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(rep.columns))]
    lines = ["  ".join(s.rjust(w) for s, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines += [f"{k}: {_fmt(v)}" for k, v in rep.summary.items()]
    return "\n".join(lines) + "\n"


EMITTERS = {"csv": to_csv, "json": to_json, "table": to_table}


def parse_csv(text):
    """(summary, rows) back from :func:`to_csv`, with numbers as floats."""
    summary, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            summary[k] = v
        else:
            body.append(line)

    def conv(s):
        if s == "":
            return None
        try:
            return float(s)
        except ValueError:
            return s

    rows = [{k: conv(v) for k, v in r.items()} for r in csv.DictReader(body)]
    return {k: conv(v) for k, v in summary.items()}, rows


# --- entry point ----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="antimaser",
                                description="Noise-temperature chains, Y-factor fits and "
                                            "spin-cooled cavity predictions.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="config file, or name of a bundled fixture")
    p.add_argument("--output", help="output file (default: standard output)")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=10_000)
    return p


def run(args):
    path = _resolve_config_path(args.config)
    cfg = read_json(path)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return HANDLERS[args.command](cfg, path.parent, args)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rep = run(args)
    except (ConfigError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    text = EMITTERS[args.format](rep)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
