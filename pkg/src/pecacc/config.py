"""JSON run configuration.

Field names carry their units (``v_r_kmh``, ``tau_s``); everything is
converted to SI on load. The defaults reproduce the case-study vehicle,
the base gains and the simulation scenario.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

from .model import BaseGains, ModelError, PhysicalBox, PhysicalParams, kmh, table_i_box, table_i_gains, to_kmh
from .closedloop import CZ_MODES
from .sim import DEFAULT_STEPS, Scenario
from .synthesis import GridSpec, Objective, Setup

__all__ = ["Config", "ConfigError", "load_config", "dumps"]


class ConfigError(ValueError):
    pass


# JSON key -> PhysicalParams field
_PHYS_KEYS = (("m_kg", "m"), ("m_eff_kg", "m_eff"), ("f_v_Ns_per_m", "f_v"), ("f_r", "f_r"),
              ("C_d_kg_per_m", "C_d"), ("tau_s", "tau"), ("alpha_rad", "alpha"), ("v_w_mps", "v_w"))
_GAIN_KEYS = (("k_p", "k_p"), ("k_d", "k_d"), ("h_s", "h"), ("r_m", "r"), ("tau_des_s", "tau_des"),
              ("tau_leader_s", "tau_leader"))


def _from_keys(cls, data, keys, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {k for k, _ in keys}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = known - set(data)
    if missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")
    try:
        return cls(**{attr: float(data[key]) for key, attr in keys})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _to_keys(obj, keys):
    return {key: getattr(obj, attr) for key, attr in keys}


@dataclass(frozen=True)
class Config:
    box: PhysicalBox = field(default_factory=table_i_box)
    gains: BaseGains = field(default_factory=table_i_gains)
    synth_v_r_kmh: float = 50.0
    sweep_v_r_kmh: tuple = (10.0, 30.0, 50.0, 80.0, 100.0)
    scenario_v_r_kmh: float = 15.0
    scenario_true: str = "lower"
    scenario_v_w_kmh: float = 15.0
    T_s: float = 32.0
    dt_s: float = 1e-3
    sample_s: float = 0.01
    delay_s: float = 0.0
    steps: tuple = DEFAULT_STEPS
    objective: str = "both"
    w_trace: float = 1.0
    w_gamma: float = 1.0
    Cz_mode: str = "spacing+velocity"
    grid: GridSpec = GridSpec()
    output_dir: str = "out"
    workers: int = 1

    def validate(self):
        try:
            self.box.validate()
            self.gains.validate()
            self.setup()
            self.scenario()
            self.objective_spec()
        except (ModelError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.scenario_true not in ("lower", "upper", "nominal"):
            raise ConfigError("scenario.true must be 'lower', 'upper' or 'nominal'")
        if self.Cz_mode not in CZ_MODES:
            raise ConfigError(f"synthesis.Cz_mode must be one of {CZ_MODES}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    # derived run objects
    def setup(self, v_r_kmh=None) -> Setup:
        v = self.synth_v_r_kmh if v_r_kmh is None else v_r_kmh
        return Setup(box=self.box, gains=self.gains, v_r=kmh(v), Cz_mode=self.Cz_mode)

    def objective_spec(self) -> Objective:
        return Objective.from_name(self.objective, self.w_trace, self.w_gamma)

    def scenario(self) -> Scenario:
        true = getattr(self.box, self.scenario_true)
        true = replace(true, v_w=kmh(self.scenario_v_w_kmh))
        return Scenario(v_r=kmh(self.scenario_v_r_kmh), steps=tuple(tuple(s) for s in self.steps),
                        T=self.T_s, dt=self.dt_s, sample=self.sample_s, delay=self.delay_s,
                        true_params=true, nominal_params=self.box.nominal, gains=self.gains)

    def to_dict(self):
        b = self.box
        return {
            "vehicle": {"nominal": _to_keys(b.nominal, _PHYS_KEYS), "lower": _to_keys(b.lower, _PHYS_KEYS),
                        "upper": _to_keys(b.upper, _PHYS_KEYS)},
            "gains": _to_keys(self.gains, _GAIN_KEYS),
            "operating_point": {"v_r_kmh": self.synth_v_r_kmh, "sweep_v_r_kmh": list(self.sweep_v_r_kmh)},
            "scenario": {"v_r_kmh": self.scenario_v_r_kmh, "true": self.scenario_true,
                         "v_w_kmh": self.scenario_v_w_kmh, "T_s": self.T_s, "dt_s": self.dt_s,
                         "sample_s": self.sample_s, "delay_s": self.delay_s,
                         "steps": [list(s) for s in self.steps]},
            "synthesis": {"objective": self.objective, "w_trace": self.w_trace, "w_gamma": self.w_gamma,
                          "Cz_mode": self.Cz_mode,
                          "grid": {"lo": self.grid.lo, "hi": self.grid.hi,
                                   "coarse_step": self.grid.coarse_step,
                                   "final_step": self.grid.final_step,
                                   "refine_factor": self.grid.refine_factor}},
            "output_dir": self.output_dir,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        base = cls()
        d = base.to_dict()
        unknown = set(data) - set(d)
        if unknown:
            raise ConfigError(f"unknown top-level field(s) {sorted(unknown)}")
        kw = {}
        try:
            if "vehicle" in data:
                veh = dict(d["vehicle"], **data["vehicle"])
                kw["box"] = PhysicalBox(
                    lower=_from_keys(PhysicalParams, veh["lower"], _PHYS_KEYS, "vehicle.lower"),
                    upper=_from_keys(PhysicalParams, veh["upper"], _PHYS_KEYS, "vehicle.upper"),
                    nominal=_from_keys(PhysicalParams, veh["nominal"], _PHYS_KEYS, "vehicle.nominal"))
            if "gains" in data:
                kw["gains"] = _from_keys(BaseGains, dict(d["gains"], **data["gains"]), _GAIN_KEYS, "gains")
            op = dict(d["operating_point"], **data.get("operating_point", {}))
            kw["synth_v_r_kmh"] = float(op.pop("v_r_kmh"))
            kw["sweep_v_r_kmh"] = tuple(float(v) for v in op.pop("sweep_v_r_kmh"))
            _no_extra(op, "operating_point")
            sc = dict(d["scenario"], **data.get("scenario", {}))
            kw["scenario_v_r_kmh"] = float(sc.pop("v_r_kmh"))
            kw["scenario_true"] = str(sc.pop("true"))
            kw["scenario_v_w_kmh"] = float(sc.pop("v_w_kmh"))
            kw["T_s"] = float(sc.pop("T_s"))
            kw["dt_s"] = float(sc.pop("dt_s"))
            kw["sample_s"] = float(sc.pop("sample_s"))
            kw["delay_s"] = float(sc.pop("delay_s"))
            kw["steps"] = tuple((float(a), float(b), float(c)) for a, b, c in sc.pop("steps"))
            _no_extra(sc, "scenario")
            sy = dict(d["synthesis"], **data.get("synthesis", {}))
            kw["objective"] = str(sy.pop("objective"))
            kw["w_trace"] = float(sy.pop("w_trace"))
            kw["w_gamma"] = float(sy.pop("w_gamma"))
            kw["Cz_mode"] = str(sy.pop("Cz_mode"))
            gr = dict(d["synthesis"]["grid"], **sy.pop("grid"))
            kw["grid"] = GridSpec(lo=float(gr.pop("lo")), hi=float(gr.pop("hi")),
                                  coarse_step=float(gr.pop("coarse_step")),
                                  final_step=float(gr.pop("final_step")),
                                  refine_factor=int(gr.pop("refine_factor")))
            _no_extra(gr, "synthesis.grid")
            _no_extra(sy, "synthesis")
            kw["output_dir"] = str(data.get("output_dir", base.output_dir))
            kw["workers"] = int(data.get("workers", base.workers))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, ModelError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        return cls(**kw).validate()

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw).validate() if kw else self


def _no_extra(d, where):
    if d:
        raise ConfigError(f"{where}: unknown field(s) {sorted(d)}")


def load_config(path=None) -> Config:
    if path is None:
        return Config().validate()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return Config.from_dict(data)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj):
    """Deterministic JSON text; non-finite floats become ``null``."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
