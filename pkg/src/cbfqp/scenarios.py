"""Scenario specifications: JSON schema, validation and the built-in set.

A config file looks like::

    {"scenarios": [
        {"id": "acc-case3",
         "plant": "Acc",
         "plant_params": {"s0": [0, 20, 20], "v_d": 10},
         "methods": ["clf-cbf-qp", {"method": "safety-first", "label": "sf"}],
         "sim": {"horizon": 20},
         "sweep": {"key": "p", "values": [0.002, 0.2], "methods": ["clf-cbf-qp"]},
         "expect": {"sf": {"collision": false, "infeasible_step_count": 0}}}
    ]}

Only deviations from the plant defaults need to be stated.
"""

from __future__ import annotations

import dataclasses
import json
import numbers
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .frameworks import FrameworkConfig, Method, SlackDomain
from .plants import (
    MULTI_OBSTACLES,
    AccParams,
    DoubleIntegratorParams,
    Obstacle,
    Plant,
    PlantKind,
    make_plant,
)
from .sim import Integrator, SimConfig


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


_PARAMS = {PlantKind.ACC: AccParams, PlantKind.DOUBLE_INTEGRATOR: DoubleIntegratorParams}
_SIM_DEFAULTS = {
    PlantKind.ACC: {"horizon": 20.0},
    PlantKind.DOUBLE_INTEGRATOR: {"horizon": 15.0, "stop_at_goal": True},
}
FRAMEWORK_KEYS = ("p", "p_omega", "omega0", "gamma0", "q", "slack_domain", "h_delta")
SIM_KEYS = ("dt", "horizon", "integrator", "stop_at_goal", "stop_on_collision")
EXPECT_OPS = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a is not None and a < b,
    "le": lambda a, b: a is not None and a <= b,
    "gt": lambda a, b: a is not None and a > b,
    "ge": lambda a, b: a is not None and a >= b,
}


@dataclass(frozen=True)
class MethodSpec:
    method: Method
    label: str
    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SweepSpec:
    key: str
    values: tuple
    methods: tuple

    def tag(self, value) -> str:
        return f"{self.key}={value!r}"


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    plant: PlantKind
    plant_params: dict
    methods: tuple
    sim: SimConfig
    sweep: Optional[SweepSpec] = None
    expect: dict = field(default_factory=dict)

    def make_plant(self) -> Plant:
        return make_plant(self.plant, build_params(self.plant, self.plant_params))

    def framework_config(self, method: MethodSpec, plant: Plant, extra=None) -> FrameworkConfig:
        prm = plant.params
        kw = dict(method=method.method, H=np.atleast_2d(np.asarray(prm.H, dtype=float)),
                  p=prm.p, p_omega=prm.p_omega, omega0=prm.omega0)
        kw.update(method.overrides)
        if extra:
            kw.update(extra)
        if "slack_domain" in kw:
            kw["slack_domain"] = tuple(SlackDomain(s) for s in kw["slack_domain"])
        return FrameworkConfig(**kw)

    def runs(self):
        """(method spec, sweep overrides or None) for every requested run."""
        for m in self.methods:
            if self.sweep is not None and m.label in self.sweep.methods:
                for v in self.sweep.values:
                    yield m, {self.sweep.key: v}
            else:
                yield m, None


# --------------------------------------------------------------------------
# parsing


def _is_number(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _numeric_array(value, where, shape=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected numbers, got {value!r}") from None
    if isinstance(value, (str, bool)) or arr.dtype == object:
        raise ConfigError(f"{where}: expected numbers, got {value!r}")
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"{where}: expected shape {shape}, got {arr.shape}")
    return arr


def build_params(kind: PlantKind, overrides: dict):
    """Plant parameters with ``overrides`` type-checked against the defaults."""
    cls = _PARAMS[kind]
    defaults = cls()
    kw = {}
    for key, value in overrides.items():
        where = f"plant_params.{key}"
        if key not in {f.name for f in dataclasses.fields(cls)}:
            raise ConfigError(f"{where}: unknown parameter for plant {kind.value}")
        default = getattr(defaults, key)
        if key == "obstacles":
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{where}: expected a non-empty list of obstacles")
            obs = []
            for i, o in enumerate(value):
                _check_keys(o, ("center", "radius"), f"{where}[{i}]")
                if "center" not in o or "radius" not in o:
                    raise ConfigError(f"{where}[{i}]: needs center and radius")
                c = _numeric_array(o["center"], f"{where}[{i}].center", (2,))
                if not _is_number(o["radius"]):
                    raise ConfigError(f"{where}[{i}].radius: expected a number")
                try:
                    obs.append(Obstacle(tuple(c), float(o["radius"])))
                except ValueError as exc:
                    raise ConfigError(f"{where}[{i}]: {exc}") from None
            kw[key] = tuple(obs)
        elif isinstance(default, tuple):
            arr = _numeric_array(value, where, np.asarray(default, dtype=float).shape)
            kw[key] = tuple(map(tuple, arr.tolist())) if arr.ndim == 2 else tuple(arr.tolist())
        else:
            if not _is_number(value):
                raise ConfigError(f"{where}: expected a number, got {value!r}")
            kw[key] = float(value)
    try:
        return cls(**kw)
    except ValueError as exc:
        raise ConfigError(f"plant_params: {exc}") from None


def _parse_method(obj, where) -> MethodSpec:
    if isinstance(obj, str):
        obj = {"method": obj}
    _check_keys(obj, ("method", "label") + FRAMEWORK_KEYS, where)
    if "method" not in obj:
        raise ConfigError(f"{where}: missing key method")
    try:
        method = Method(obj["method"])
    except ValueError:
        names = ", ".join(m.value for m in Method)
        raise ConfigError(f"{where}.method: unknown method {obj['method']!r} (one of {names})") from None
    label = obj.get("label", method.value)
    if not isinstance(label, str) or not label or "__" in label or "/" in label:
        raise ConfigError(f"{where}.label: must be a non-empty string without '__' or '/'")
    overrides = {}
    for key in FRAMEWORK_KEYS:
        if key not in obj:
            continue
        v = obj[key]
        if key == "slack_domain":
            try:
                overrides[key] = [SlackDomain(s).value for s in v]
            except (TypeError, ValueError):
                raise ConfigError(f"{where}.slack_domain: expected two of Free/Zero") from None
            if len(v) != 2:
                raise ConfigError(f"{where}.slack_domain: expected two entries")
        elif key == "h_delta":
            overrides[key] = _numeric_array(v, f"{where}.h_delta", (2,)).tolist()
        elif key == "gamma0" and v is None:
            overrides[key] = None
        else:
            if not _is_number(v) or (key != "omega0" and not v > 0):
                raise ConfigError(f"{where}.{key}: expected a positive number, got {v!r}")
            overrides[key] = float(v)
    return MethodSpec(method, label, overrides)


def _parse_sim(obj, kind, where) -> SimConfig:
    obj = {} if obj is None else obj
    _check_keys(obj, SIM_KEYS, where)
    kw = dict(_SIM_DEFAULTS[kind])
    for key, v in obj.items():
        if key in ("dt", "horizon"):
            if not _is_number(v) or not v > 0:
                raise ConfigError(f"{where}.{key}: expected a positive number")
            kw[key] = float(v)
        elif key == "integrator":
            try:
                kw[key] = Integrator(v)
            except ValueError:
                raise ConfigError(f"{where}.integrator: expected Euler or RK4") from None
        else:
            if not isinstance(v, bool):
                raise ConfigError(f"{where}.{key}: expected true/false")
            kw[key] = v
    try:
        return SimConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_expect(obj, labels, where) -> dict:
    obj = {} if obj is None else obj
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    from .sim import RunMetrics

    metric_names = set(RunMetrics.__dataclass_fields__)
    out = {}
    for label, checks in obj.items():
        if label not in labels:
            raise ConfigError(f"{where}.{label}: no method with this label")
        if not isinstance(checks, dict):
            raise ConfigError(f"{where}.{label}: expected an object")
        for metric, rule in checks.items():
            if metric not in metric_names:
                raise ConfigError(f"{where}.{label}.{metric}: unknown metric")
            if isinstance(rule, dict):
                _check_keys(rule, EXPECT_OPS, f"{where}.{label}.{metric}")
        out[label] = dict(checks)
    return out


def parse_scenario(obj, where="scenario") -> ScenarioSpec:
    _check_keys(obj, ("id", "plant", "plant_params", "methods", "sim", "sweep", "expect"), where)
    for key in ("id", "plant", "methods"):
        if key not in obj:
            raise ConfigError(f"{where}: missing key {key}")
    sid = obj["id"]
    if not isinstance(sid, str) or not sid or "__" in sid or "/" in sid:
        raise ConfigError(f"{where}.id: must be a non-empty string without '__' or '/'")
    where = f"scenario {sid!r}"
    try:
        kind = PlantKind(obj["plant"])
    except ValueError:
        raise ConfigError(f"{where}.plant: expected Acc or DoubleIntegrator") from None
    plant_params = obj.get("plant_params", {})
    if not isinstance(plant_params, dict):
        raise ConfigError(f"{where}.plant_params: expected an object")
    try:
        build_params(kind, plant_params)
    except ConfigError as exc:
        raise ConfigError(f"{where}.{exc}") from None
    methods = obj["methods"]
    if not isinstance(methods, list) or not methods:
        raise ConfigError(f"{where}.methods: at least one method is required")
    specs = tuple(_parse_method(m, f"{where}.methods[{i}]") for i, m in enumerate(methods))
    labels = [m.label for m in specs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{where}.methods: duplicate labels {labels}")
    sim = _parse_sim(obj.get("sim"), kind, f"{where}.sim")
    sweep = None
    if obj.get("sweep") is not None:
        sw = obj["sweep"]
        _check_keys(sw, ("key", "values", "methods"), f"{where}.sweep")
        if sw.get("key") not in FRAMEWORK_KEYS[:5]:
            raise ConfigError(f"{where}.sweep.key: must be one of {', '.join(FRAMEWORK_KEYS[:5])}")
        values = sw.get("values")
        if not isinstance(values, list) or not values or not all(_is_number(v) and v > 0 for v in values):
            raise ConfigError(f"{where}.sweep.values: expected a non-empty list of positive numbers")
        targets = sw.get("methods", labels)
        if not isinstance(targets, list) or any(t not in labels for t in targets):
            raise ConfigError(f"{where}.sweep.methods: must name method labels of this scenario")
        sweep = SweepSpec(sw["key"], tuple(float(v) for v in values), tuple(targets))
    expect = _parse_expect(obj.get("expect"), labels, f"{where}.expect")
    return ScenarioSpec(sid, kind, dict(plant_params), specs, sim, sweep, expect)


def parse_document(doc) -> list:
    _check_keys(doc, ("scenarios",), "config")
    scenarios = doc.get("scenarios")
    if not isinstance(scenarios, list):
        raise ConfigError("config.scenarios: expected a list")
    specs = [parse_scenario(s, f"scenarios[{i}]") for i, s in enumerate(scenarios)]
    ids = [s.id for s in specs]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ConfigError(f"config.scenarios: duplicate id(s) {', '.join(dup)}")
    return specs


def parse_config(path) -> list:
    """Read and validate a JSON scenario file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_document(doc)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    """Inverse of :func:`parse_scenario`."""
    methods = []
    for m in spec.methods:
        d = {"method": m.method.value, "label": m.label}
        d.update(m.overrides)
        methods.append(d)
    params = {}
    for key, v in spec.plant_params.items():
        if key == "obstacles":
            params[key] = [{"center": list(o["center"]) if isinstance(o, dict) else list(o.center),
                            "radius": o["radius"] if isinstance(o, dict) else o.radius} for o in v]
        else:
            params[key] = v
    out = {
        "id": spec.id,
        "plant": spec.plant.value,
        "plant_params": params,
        "methods": methods,
        "sim": {"dt": spec.sim.dt, "horizon": spec.sim.horizon,
                "integrator": spec.sim.integrator.value,
                "stop_at_goal": spec.sim.stop_at_goal,
                "stop_on_collision": spec.sim.stop_on_collision},
        "expect": spec.expect,
    }
    if spec.sweep is not None:
        out["sweep"] = {"key": spec.sweep.key, "values": list(spec.sweep.values),
                        "methods": list(spec.sweep.methods)}
    return out


# --------------------------------------------------------------------------
# built-in scenarios

THREE = ["clf-cbf-qp", "optimal-decay", "safety-first"]


def _acc(case_id, s0, v_d, expect):
    return {"id": case_id, "plant": "Acc", "plant_params": {"s0": s0, "v_d": v_d},
            "methods": list(THREE), "expect": expect}


BUILTIN_DOCUMENT = {"scenarios": [
    _acc("acc-case1", [0, 20, 100], 10, {m: {"collision": False, "infeasible_step_count": 0}
                                          for m in THREE}),
    _acc("acc-case2", [0, 20, 100], 24, {m: {"collision": False, "infeasible_step_count": 0}
                                          for m in THREE}),
    _acc("acc-case3", [0, 20, 20], 10, {
        "clf-cbf-qp": {"first_infeasible_time": {"gt": 0}},
        "optimal-decay": {"infeasible_step_count": 0},
        "safety-first": {"infeasible_step_count": 0}}),
    _acc("acc-case4", [0, 20, 20], 24, {
        "optimal-decay": {"collision": True},
        "safety-first": {"collision": False, "infeasible_step_count": 0}}),
    {"id": "acc-sweep-p", "plant": "Acc", "plant_params": {"s0": [0, 20, 100], "v_d": 10},
     "methods": ["clf-cbf-qp", "safety-first"],
     "sweep": {"key": "p", "values": [2e-3, 2e-2, 2e-1, 2.0], "methods": ["clf-cbf-qp"]}},
    {"id": "agv-a", "plant": "DoubleIntegrator", "plant_params": {"p": 1.0, "p_omega": 10.0},
     "methods": list(THREE), "expect": {m: {"collision": False} for m in THREE}},
    {"id": "agv-b", "plant": "DoubleIntegrator", "plant_params": {"p": 0.01, "p_omega": 1.0},
     "methods": list(THREE), "expect": {
         "clf-cbf-qp": {"collision": False},
         "optimal-decay": {"collision": True},
         "safety-first": {"collision": False}}},
    {"id": "agv-multi", "plant": "DoubleIntegrator",
     "plant_params": {"obstacles": [{"center": list(o.center), "radius": o.radius}
                                    for o in MULTI_OBSTACLES]},
     "methods": ["safety-first"],
     "expect": {"safety-first": {"collision": False, "time_to_goal": {"ne": None}}}},
]}


def builtin_specs() -> list:
    return parse_document(BUILTIN_DOCUMENT)


def builtin(scenario_id: str) -> ScenarioSpec:
    for spec in builtin_specs():
        if spec.id == scenario_id:
            return spec
    raise KeyError(scenario_id)
