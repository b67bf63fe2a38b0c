"""Strict TOML run configuration.

Sections: ``[design]``, ``[fitting]``, ``[search]``, ``[grid]``, ``[output]``
and ``[scenarios]`` (with an array of tables ``[[scenarios.h1]]``). Unknown
sections or keys are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from typing import Any

from .bayes_factor import HypothesisPrior
from .design import DesignConfig, EquivalenceInterval
from .priors import DEFAULT_MODE_CONSTANTS, FittingPriorSpec
from .scenarios import H0SamplingPrior, ScenarioSpec, scenario_p1
from .search import SearchConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = "baysize-1"

TABLE_HALF_EFFECTS = (0.05, 0.1, 0.15, 0.2)
TABLE_ALPHAS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
TABLE_NS = (30, 45, 60, 75, 90)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    half_effects: tuple[float, ...] = TABLE_HALF_EFFECTS
    alphas: tuple[float, ...] = TABLE_ALPHAS
    n_values: tuple[int, ...] = TABLE_NS
    simulate_trials: int = 10


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    path: str = "-"


@dataclass(frozen=True)
class RunConfig:
    design: DesignConfig
    fitting: FittingPriorSpec
    search: SearchConfig
    hypothesis_prior: HypothesisPrior = field(default_factory=HypothesisPrior)
    grid: GridConfig = field(default_factory=GridConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {"design", "fitting", "search", "grid", "output", "scenarios"}


class _Section:
    """Typed access to one config table, tracking which keys were consumed."""

    def __init__(self, name: str, data: Any):
        if not isinstance(data, dict):
            raise ConfigError(f"[{name}] must be a table")
        self.name = name
        self.data = data
        self.used: set[str] = set()

    def _err(self, key, msg):
        return ConfigError(f"[{self.name}].{key}: {msg}")

    def get(self, key, kind, default=None, required=False):
        self.used.add(key)
        if key not in self.data:
            if required:
                raise self._err(key, "required key is missing")
            return default
        v = self.data[key]
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise self._err(key, f"expected a number, got {v!r}")
            return float(v)
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise self._err(key, f"expected an integer, got {v!r}")
            return v
        if kind is bool:
            if not isinstance(v, bool):
                raise self._err(key, f"expected true/false, got {v!r}")
            return v
        if kind is str:
            if not isinstance(v, str):
                raise self._err(key, f"expected a string, got {v!r}")
            return v
        if isinstance(kind, tuple):  # (list, element kind)
            elem = kind[1]
            if not isinstance(v, list):
                raise self._err(key, f"expected an array, got {v!r}")
            out = []
            for item in v:
                if elem is int and (isinstance(item, bool) or not isinstance(item, int)):
                    raise self._err(key, f"expected integers, got {item!r}")
                if elem is float and (isinstance(item, bool) or not isinstance(item, (int, float))):
                    raise self._err(key, f"expected numbers, got {item!r}")
                out.append(elem(item))
            return tuple(out)
        raise TypeError(kind)

    def finish(self):
        unknown = sorted(set(self.data) - self.used)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{self.name}]: {', '.join(unknown)}")


def _build(where, ctor, /, *args, **kwargs):
    try:
        return ctor(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def _scenario(i: int, data: Any) -> ScenarioSpec:
    sec = _Section(f"scenarios.h1[{i}]", data)
    p_star = sec.get("p_star", (list, float))
    kwargs = dict(
        name=sec.get("name", str),
        p_star=p_star,
        d_star=sec.get("d_star", int),
        lambda1=sec.get("lambda1", float),
        rho1=sec.get("rho1", float, 0.0),
        rho2=sec.get("rho2", float, 0.0),
    )
    sec.finish()
    return _build(sec.name, ScenarioSpec, **kwargs)


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a parsed document and apply defaults."""
    unknown = sorted(set(doc) - _SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")

    search_sec = _Section("search", doc.get("search", {}))
    n_upper = search_sec.get("n_upper", int, required=True)

    d = _Section("design", doc.get("design", {}))
    ei = _build("design", EquivalenceInterval,
                d.get("p_T", float, required=True),
                d.get("eps1", float, required=True),
                d.get("eps2", float, required=True))
    prior_shape = d.get("safety_prior_shape", (list, float), (1.0, 1.0))
    if len(prior_shape) != 2:
        raise ConfigError("[design].safety_prior_shape: expected two numbers")
    design = _build(
        "design", DesignConfig,
        ei=ei,
        num_doses=d.get("num_doses", int, required=True),
        max_patients=d.get("max_patients", int, n_upper),
        cohort_size=d.get("cohort_size", int, 3),
        start_dose=d.get("start_dose", int, 1),
        safety_threshold=d.get("safety_threshold", float, 0.95),
        safety_prior_shape=prior_shape,
    )
    d.finish()

    f = _Section("fitting", doc.get("fitting", {}))
    modes = f.get("mode_constants", (list, float), DEFAULT_MODE_CONSTANTS)
    if len(modes) != 4:
        raise ConfigError("[fitting].mode_constants: expected four numbers")
    fitting = _build("fitting", FittingPriorSpec, ei=ei, num_doses=design.num_doses,
                     c=f.get("c", float, 0.0), mode_constants=modes)
    hp = _build("fitting", HypothesisPrior,
                weights_h0=f.get("weights_h0", (list, float)),
                weights_h1=f.get("weights_h1", (list, float)))
    _build("fitting", hp.resolved, design.num_doses)
    f.finish()

    sc = _Section("scenarios", doc.get("scenarios", {}))
    sc.used.add("h1")
    raw = sc.data.get("h1", [])
    if not isinstance(raw, list):
        raise ConfigError("[scenarios].h1 must be an array of tables")
    scenarios = tuple(_scenario(i, item) for i, item in enumerate(raw))
    for i, item in enumerate(scenarios):
        _build(f"scenarios.h1[{i}]", scenario_p1, item, ei, design.num_doses)
    sc.finish()

    s = search_sec
    h0_name = s.get("h0_prior", str, H0SamplingPrior.ORDER_STATISTICS_UNIFORM.value)
    try:
        h0_prior = H0SamplingPrior(h0_name)
    except ValueError:
        choices = ", ".join(k.value for k in H0SamplingPrior)
        raise ConfigError(f"[search].h0_prior: unknown prior {h0_name!r} (choose {choices})") from None
    search = _build(
        "search", SearchConfig,
        alpha=s.get("alpha", float, required=True),
        beta=s.get("beta", float, required=True),
        n_upper=n_upper,
        n_lower=s.get("n_lower", int),
        calib_trials=s.get("calib_trials", int, 1000),
        power_trials=s.get("power_trials", int, 1000),
        convergence_eps=s.get("convergence_eps", int, 1),
        h0_prior=h0_prior,
        h1_scenarios=scenarios,
        root_seed=s.get("root_seed", int, 0),
        round_to_cohort=s.get("round_to_cohort", bool, False),
    )
    search = replace(search, n_lower=_build("search", search.lower_bound, design))
    s.finish()

    g = _Section("grid", doc.get("grid", {}))
    grid = GridConfig(
        half_effects=g.get("half_effects", (list, float), TABLE_HALF_EFFECTS),
        alphas=g.get("alphas", (list, float), TABLE_ALPHAS),
        n_values=g.get("n_values", (list, int), TABLE_NS),
        simulate_trials=g.get("simulate_trials", int, 10),
    )
    g.finish()
    if not (grid.half_effects and grid.alphas and grid.n_values):
        raise ConfigError("[grid]: half_effects, alphas and n_values must be nonempty")
    if grid.simulate_trials < 1:
        raise ConfigError("[grid].simulate_trials: must be at least 1")
    for h in grid.half_effects:
        _build("grid", EquivalenceInterval, ei.p_T, h, h)
    for a in grid.alphas:
        if not 0 < a < 1:
            raise ConfigError(f"[grid].alphas: {a} is outside (0, 1)")
    if any(n < design.cohort_size for n in grid.n_values):
        raise ConfigError("[grid].n_values: every n must be at least cohort_size")

    o = _Section("output", doc.get("output", {}))
    output = OutputConfig(format=o.get("format", str, "csv"), path=o.get("path", str, "-"))
    o.finish()
    if output.format not in ("csv", "json"):
        raise ConfigError(f"[output].format: expected csv or json, got {output.format!r}")

    return RunConfig(design, fitting, search, hp, grid, output)


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return config_from_dict(doc)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of :func:`config_from_dict` with every default made explicit."""
    d, f, s = cfg.design, cfg.fitting, cfg.search
    doc = {
        "design": {
            "p_T": d.ei.p_T, "eps1": d.ei.eps1, "eps2": d.ei.eps2,
            "num_doses": d.num_doses, "max_patients": d.max_patients,
            "cohort_size": d.cohort_size, "start_dose": d.start_dose,
            "safety_threshold": d.safety_threshold,
            "safety_prior_shape": list(d.safety_prior_shape),
        },
        "fitting": {"c": f.c, "mode_constants": list(f.mode_constants)},
        "search": {
            "alpha": s.alpha, "beta": s.beta, "n_upper": s.n_upper,
            "n_lower": s.lower_bound(d),
            "calib_trials": s.calib_trials, "power_trials": s.power_trials,
            "convergence_eps": s.convergence_eps, "h0_prior": s.h0_prior.value,
            "root_seed": s.root_seed, "round_to_cohort": s.round_to_cohort,
        },
        "grid": {
            "half_effects": list(cfg.grid.half_effects), "alphas": list(cfg.grid.alphas),
            "n_values": list(cfg.grid.n_values), "simulate_trials": cfg.grid.simulate_trials,
        },
        "output": {"format": cfg.output.format, "path": cfg.output.path},
    }
    hp = cfg.hypothesis_prior
    if hp.weights_h0 is not None:
        doc["fitting"]["weights_h0"] = list(hp.weights_h0)
    if hp.weights_h1 is not None:
        doc["fitting"]["weights_h1"] = list(hp.weights_h1)
    if s.h1_scenarios:
        items = []
        for sc in s.h1_scenarios:
            item = {"name": sc.name} if sc.name else {}
            if sc.p_star is not None:
                item["p_star"] = list(sc.p_star)
            else:
                item.update(d_star=sc.d_star, lambda1=sc.lambda1, rho1=sc.rho1, rho2=sc.rho2)
            items.append(item)
        doc["scenarios"] = {"h1": items}
    return doc
