"""JSON configuration: chain netlists, cavity, spin, scenario and measurement blocks.

Field names carry their units (``_k``, ``_db``, ``_hz``). Any kelvin field of a
chain stage may be the string ``"ambient"``; it is replaced by the ambient
temperature of the measurement being evaluated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .chain import STAGE_KINDS, ChainStage
from .errors import ConfigError

AMBIENT = "ambient"

# JSON key -> ChainStage attribute
_STAGE_FIELDS = {
    "kind": "kind",
    "label": "label",
    "loss_db": "loss_db",
    "gain_db": "gain_db",
    "noise_temp_added_k": "noise_temp_added",
    "noise_temp_slope": "noise_temp_slope",
    "reference_temp_k": "reference_temp",
    "phys_temp_k": "phys_temp",
    "phys_temp_in_k": "phys_temp_in",
    "phys_temp_out_k": "phys_temp_out",
    "coupling_loss_db": "coupling_loss_db",
    "through_loss_db": "through_loss_db",
    "coupled_input_noise_k": "coupled_input_noise",
    "coupled_from": "coupled_from",
    "internal_temp_k": "internal_temp",
    "gamma": "gamma",
    "incident_temp_k": "incident_temp",
    "n_steps": "n_steps",
}
_ATTR_TO_KEY = {v: k for k, v in _STAGE_FIELDS.items()}
_IGNORED = {"notes", "comment", "_comment", "sigma"}


def _is_ambient(v):
    return isinstance(v, str) and v == AMBIENT


@dataclass(frozen=True)
class ChainNetlist:
    stages: tuple
    frequency_hz: float = 10.98e9
    bandwidth_hz: float = 9.1e5
    source_temp_off_k: float = 294.0
    source_temp_on_k: float = 11760.0
    sigma: dict = field(default_factory=dict, compare=False)
    notes: tuple = ()

    def resolve(self, ambient_temp):
        """Copy with every ``"ambient"`` placeholder replaced by ``ambient_temp``."""
        stages = []
        for st in self.stages:
            changes = {}
            for attr in _ATTR_TO_KEY:
                if _is_ambient(getattr(st, attr)):
                    if ambient_temp is None:
                        raise ConfigError(f"stage {st.name}: {_ATTR_TO_KEY[attr]} is 'ambient' "
                                          "but no ambient temperature was given")
                    changes[attr] = float(ambient_temp)
            stages.append(st.replace(**changes) if changes else st)
        return replace(self, stages=tuple(stages))

    def is_resolved(self):
        return not any(_is_ambient(getattr(st, a)) for st in self.stages for a in _ATTR_TO_KEY)

    def validate(self):
        if not self.is_resolved():
            raise ConfigError("netlist still holds 'ambient' placeholders")
        for i, st in enumerate(self.stages, start=1):
            st.validate(i)
        return self

    def index_of(self, kind=None, label=None):
        for i, st in enumerate(self.stages):
            if (kind is None or st.kind == kind) and (label is None or st.label == label):
                return i
        raise ConfigError(f"netlist has no stage with kind={kind!r} label={label!r}")


def _number(where, key, v, allow_ambient=False):
    if allow_ambient and v == AMBIENT:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: field {key!r} must be a number, got {v!r}")
    return float(v)


def stage_from_dict(d, index):
    where = f"stage {index} ({d.get('label') or d.get('kind', '?')})"
    if not isinstance(d, dict):
        raise ConfigError(f"stage {index}: expected an object")
    unknown = set(d) - set(_STAGE_FIELDS) - _IGNORED
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    if d.get("kind") not in STAGE_KINDS:
        raise ConfigError(f"{where}: kind must be one of {STAGE_KINDS}, got {d.get('kind')!r}")
    kw = {}
    for key, v in d.items():
        if key in _IGNORED:
            continue
        attr = _STAGE_FIELDS[key]
        if key in ("kind", "label"):
            kw[attr] = str(v)
        elif key == "coupled_from":
            kw[attr] = v if isinstance(v, str) else int(v)
        elif key == "n_steps":
            kw[attr] = int(v)
        else:
            kw[attr] = _number(where, key, v, allow_ambient=key.endswith("_k"))
    sigma = {}
    for key, s in (d.get("sigma") or {}).items():
        if key not in _STAGE_FIELDS or key in ("kind", "label", "coupled_from", "n_steps"):
            raise ConfigError(f"{where}: sigma given for unknown numeric field {key!r}")
        s = _number(where, f"sigma.{key}", s)
        if s < 0:
            raise ConfigError(f"{where}: sigma.{key} must be >= 0")
        sigma[_STAGE_FIELDS[key]] = s
    return ChainStage(sigma=sigma, **kw)


def stage_to_dict(st: ChainStage):
    d = {"kind": st.kind}
    if st.label:
        d["label"] = st.label
    for attr, key in _ATTR_TO_KEY.items():
        if attr in ("kind", "label"):
            continue
        v = getattr(st, attr)
        default = ChainStage.__dataclass_fields__[attr].default
        if v is not None and v != default:
            d[key] = v
    if st.sigma:
        d["sigma"] = {_ATTR_TO_KEY[a]: s for a, s in st.sigma.items()}
    return d


_HEADER = ("frequency_hz", "bandwidth_hz", "source_temp_off_k", "source_temp_on_k")


def netlist_from_dict(d, base_dir=None):
    if not isinstance(d, dict):
        raise ConfigError("chain block must be an object")
    if "chain_file" in d:
        path = Path(d["chain_file"])
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        return load_netlist(path)
    stages = d.get("stages")
    if not isinstance(stages, list) or not stages:
        raise ConfigError("chain block needs a non-empty 'stages' array")
    unknown = set(d) - set(_HEADER) - {"stages", "sigma", "notes", "description", "comment", "_comment"}
    if unknown:
        raise ConfigError(f"chain header: unknown field(s) {sorted(unknown)}")
    hdr = {k: _number("chain header", k, d[k]) for k in _HEADER if k in d}
    sigma = {k: _number("chain header", f"sigma.{k}", v) for k, v in (d.get("sigma") or {}).items()}
    bad = set(sigma) - {"source_temp_off_k", "source_temp_on_k"}
    if bad:
        raise ConfigError(f"chain header: sigma given for unknown field(s) {sorted(bad)}")
    notes = d.get("notes", ())
    if isinstance(notes, str):
        notes = (notes,)
    return ChainNetlist(stages=tuple(stage_from_dict(s, i) for i, s in enumerate(stages, start=1)),
                        sigma=sigma, notes=tuple(notes), **hdr)


def netlist_to_dict(net: ChainNetlist):
    d = {k: getattr(net, k) for k in _HEADER}
    if net.sigma:
        d["sigma"] = dict(net.sigma)
    if net.notes:
        d["notes"] = list(net.notes)
    d["stages"] = [stage_to_dict(s) for s in net.stages]
    return d


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e


def load_netlist(path):
    d = read_json(path)
    if isinstance(d, dict) and "chain" in d:
        d = d["chain"]
    return netlist_from_dict(d, base_dir=Path(path).parent)


def fixture_path(name):
    """Path of a bundled fixture, e.g. ``fixture_path("table_s1_5k_10db")``."""
    if not name.endswith(".json") and not name.endswith(".csv"):
        name += ".json"
    p = resources.files("antimaser") / "data" / name
    if not p.is_file():
        raise ConfigError(f"no bundled fixture named {name!r}")
    return Path(str(p))


def require(block, key, where):
    if key not in block:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return block[key]
