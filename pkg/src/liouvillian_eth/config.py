"""Experiment configuration: YAML loading and validation.

Example::

    model:
      name: random_liouvillian
      D: [30, 40]
      r: 6
      beta: 2
      g_eff: 1.05
    n_realizations: [40, 25]
    master_seed: 1234
    output_dir: runs/fig1
    analysis:
      - kind: spectrum_stats
      - kind: stripe_sweep
      - kind: eth_diag
        observable: x_qubit
        superoperators: [coherent, measurement]
        omega_cutoff: 10
"""

from dataclasses import dataclass, field
from pathlib import Path

import yaml

__all__ = ["ConfigError", "ExperimentConfig", "AnalysisSpec", "load_config", "parse_config", "MODELS", "ANALYSES"]

MODELS = {
    "random_liouvillian": {"required": ("D", "r", "beta", "g_eff"), "size": "D",
                           "optional": {"hamiltonian_variance": 1.0}},
    "xxz_chain": {"required": ("N", "J", "delta", "h", "gamma1_plus", "gamma1_minus",
                               "gammaN_plus", "gammaN_minus", "gamma_z"), "size": "N",
                  "optional": {"sector": 0}},
    "gue_reference": {"required": ("D",), "size": "D", "optional": {}},
    "ginibre_reference": {"required": ("D",), "size": "D", "optional": {}},
    "poisson2d_reference": {"required": ("n",), "size": "n", "optional": {"box": [0.0, 1.0, 0.0, 1.0]}},
}

ANALYSES = {
    "spectrum_stats": {"required": (), "optional": {}},
    "stripe_sweep": {"required": (), "optional": {"d_grid": None, "n_grid": 40}},
    "eth_diag": {"required": ("observable", "omega_cutoff"),
                 "optional": {"superoperators": ["coherent", "measurement"], "min_members": 3,
                              "convention": "right"}},
    "eth_offdiag": {"required": ("observable", "omega_center", "delta_omega"),
                    "optional": {"superoperators": ["measurement"], "min_members": 3, "bins": 40,
                                 "min_samples": 50, "convention": "right"}},
    "dynamics": {"required": ("observable", "initial_state", "time_grid"),
                 "optional": {"min_members": 3}},
}

KNOWN_OBSERVABLES = ("x_qubit", "current")


class ConfigError(ValueError):
    """Invalid configuration; ``location`` points at the offending key."""

    def __init__(self, location, message):
        self.location = location
        super().__init__(f"{location}: {message}")


@dataclass
class AnalysisSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    model: str
    params: dict
    sizes: list
    n_realizations: list
    master_seed: int
    analysis: list
    output_dir: Path
    variants: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)

    @property
    def size_key(self):
        return MODELS[self.model]["size"]

    def variant_params(self):
        """``[(variant_name, params)]``; a single unnamed variant when none are given."""
        if not self.variants:
            return [("", dict(self.params))]
        return [(name, {**self.params, **over}) for name, over in self.variants.items()]

    def needs_vectors(self):
        return any(a.kind in ("eth_diag", "eth_offdiag", "dynamics") for a in self.analysis)

    def needs_left(self):
        return any(a.kind == "dynamics" for a in self.analysis)


def _check_number(loc, value, positive=False, integer=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(loc, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(loc, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(loc, f"must be positive, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(loc, f"must be non-negative, got {value!r}")


def _check_observable(loc, obs, model):
    if isinstance(obs, str):
        if obs not in KNOWN_OBSERVABLES:
            raise ConfigError(loc, f"unknown observable {obs!r}; use one of {KNOWN_OBSERVABLES} or {{site, pauli}}")
        if obs == "current" and model != "xxz_chain":
            raise ConfigError(loc, "the current observable needs the xxz_chain model")
        return
    if isinstance(obs, dict):
        if set(obs) != {"site", "pauli"}:
            raise ConfigError(loc, "a local observable needs exactly the keys 'site' and 'pauli'")
        if model != "xxz_chain":
            raise ConfigError(loc, "site observables need the xxz_chain model")
        _check_number(f"{loc}.site", obs["site"], positive=True, integer=True)
        if obs["pauli"] not in ("x", "y", "z", "+", "-"):
            raise ConfigError(f"{loc}.pauli", f"unknown Pauli label {obs['pauli']!r}")
        return
    raise ConfigError(loc, f"invalid observable {obs!r}")


def parse_config(raw, base_dir=None):
    """Validate a config mapping and return an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = set(raw) - {"model", "n_realizations", "master_seed", "analysis", "output_dir"}
    if unknown:
        raise ConfigError("<root>", f"unknown keys {sorted(unknown)}")
    model = raw.get("model")
    if not isinstance(model, dict) or "name" not in model:
        raise ConfigError("model", "a mapping with a 'name' key is required")
    name = model["name"]
    if name not in MODELS:
        raise ConfigError("model.name", f"unknown model {name!r}; choose from {sorted(MODELS)}")
    schema = MODELS[name]
    allowed = {"name", "variants", *schema["required"], *schema["optional"]}
    extra = set(model) - allowed
    if extra:
        raise ConfigError("model", f"unknown parameters {sorted(extra)} for model {name}")
    variants = model.get("variants") or {}
    if not isinstance(variants, dict):
        raise ConfigError("model.variants", "must map variant names to parameter overrides")
    params = {}
    for key in schema["required"]:
        if key in model:
            params[key] = model[key]
        elif not variants or not all(key in v for v in variants.values()):
            raise ConfigError(f"model.{key}", f"required for model {name}")
    for key, default in schema["optional"].items():
        params[key] = model.get(key, default)
    size_key = schema["size"]
    sizes = params.pop(size_key)
    sizes = list(sizes) if isinstance(sizes, (list, tuple)) else [sizes]
    if not sizes:
        raise ConfigError(f"model.{size_key}", "at least one size is required")
    for i, s in enumerate(sizes):
        _check_number(f"model.{size_key}[{i}]", s, positive=True, integer=True)
    sizes = [int(s) for s in sizes]
    for key in schema["required"]:
        if key == size_key or key not in params:
            continue
        _check_number(f"model.{key}", params[key], nonneg=key.startswith("gamma"))
    for vname, over in variants.items():
        if not isinstance(over, dict):
            raise ConfigError(f"model.variants.{vname}", "must be a mapping")
        bad = set(over) - set(schema["required"]) - set(schema["optional"])
        if bad or size_key in over:
            raise ConfigError(f"model.variants.{vname}", f"cannot override {sorted(bad | ({size_key} & set(over)))}")
        for key, val in over.items():
            _check_number(f"model.variants.{vname}.{key}", val, nonneg=key.startswith("gamma"))
    if name == "random_liouvillian":
        for i, s in enumerate(sizes):
            if s % 2:
                raise ConfigError(f"model.D[{i}]", "random Liouvillians need an even Hilbert dimension")
        _check_number("model.r", params["r"], positive=True, integer=True)
        _check_number("model.g_eff", params["g_eff"], positive=True)
    if name == "xxz_chain":
        for i, s in enumerate(sizes):
            if s < 2:
                raise ConfigError(f"model.N[{i}]", "chains need at least 2 sites")

    nreal = raw.get("n_realizations", 1)
    nreal = list(nreal) if isinstance(nreal, (list, tuple)) else [nreal] * len(sizes)
    if len(nreal) != len(sizes):
        raise ConfigError("n_realizations", f"{len(nreal)} entries for {len(sizes)} sizes")
    for i, n in enumerate(nreal):
        _check_number(f"n_realizations[{i}]", n, positive=True, integer=True)
    seed = raw.get("master_seed", 0)
    _check_number("master_seed", seed, integer=True, nonneg=True)

    analyses = raw.get("analysis") or []
    if not isinstance(analyses, list):
        raise ConfigError("analysis", "must be a list")
    specs = []
    for i, entry in enumerate(analyses):
        loc = f"analysis[{i}]"
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ConfigError(loc, "each analysis needs a 'kind'")
        kind = entry["kind"]
        if kind not in ANALYSES:
            raise ConfigError(f"{loc}.kind", f"unknown analysis {kind!r}; choose from {sorted(ANALYSES)}")
        aschema = ANALYSES[kind]
        extra = set(entry) - {"kind", *aschema["required"], *aschema["optional"]}
        if extra:
            raise ConfigError(loc, f"unknown parameters {sorted(extra)} for {kind}")
        p = {}
        for key in aschema["required"]:
            if key not in entry:
                raise ConfigError(f"{loc}.{key}", f"required for {kind}")
            p[key] = entry[key]
        for key, default in aschema["optional"].items():
            p[key] = entry.get(key, default)
        if "observable" in p:
            obs = p["observable"]
            if kind == "dynamics" and isinstance(obs, list):
                if not obs:
                    raise ConfigError(f"{loc}.observable", "empty observable list")
                for j, o in enumerate(obs):
                    _check_observable(f"{loc}.observable[{j}]", o, name)
            else:
                _check_observable(f"{loc}.observable", obs, name)
        for key in ("omega_cutoff", "delta_omega"):
            if key in p:
                _check_number(f"{loc}.{key}", p[key], positive=True)
        if "omega_center" in p:
            _check_number(f"{loc}.omega_center", p["omega_center"], nonneg=True)
        for key in ("n_grid", "bins", "min_members", "min_samples"):
            if key in p:
                _check_number(f"{loc}.{key}", p[key], positive=True, integer=True)
        for j, kind_name in enumerate(p.get("superoperators") or []):
            if kind_name not in ("coherent", "measurement"):
                raise ConfigError(f"{loc}.superoperators[{j}]", f"unknown superoperator {kind_name!r}")
        if p.get("convention", "right") not in ("right", "biorthogonal"):
            raise ConfigError(f"{loc}.convention", "must be 'right' or 'biorthogonal'")
        if kind in ("eth_diag", "eth_offdiag", "dynamics") and name not in ("random_liouvillian", "xxz_chain"):
            raise ConfigError(f"{loc}.kind", f"{kind} needs a Lindbladian model")
        if kind == "dynamics":
            if p["initial_state"] != "all_up":
                raise ConfigError(f"{loc}.initial_state", "only 'all_up' is supported")
            if name != "xxz_chain":
                raise ConfigError(f"{loc}.kind", "dynamics needs the xxz_chain model")
            tg = p["time_grid"]
            if not isinstance(tg, dict) or set(tg) != {"start", "stop", "num"}:
                raise ConfigError(f"{loc}.time_grid", "needs keys start, stop, num")
            _check_number(f"{loc}.time_grid.start", tg["start"], nonneg=True)
            _check_number(f"{loc}.time_grid.stop", tg["stop"], positive=True)
            _check_number(f"{loc}.time_grid.num", tg["num"], positive=True, integer=True)
            if tg["stop"] <= tg["start"]:
                raise ConfigError(f"{loc}.time_grid", "stop must exceed start")
        if kind == "stripe_sweep" and p["d_grid"] is not None:
            grid = p["d_grid"]
            if not isinstance(grid, list) or not grid:
                raise ConfigError(f"{loc}.d_grid", "must be a non-empty list of widths")
            for j, d in enumerate(grid):
                _check_number(f"{loc}.d_grid[{j}]", d, positive=True)
        specs.append(AnalysisSpec(kind=kind, params=p))

    out = raw.get("output_dir", "runs/out")
    if not isinstance(out, str):
        raise ConfigError("output_dir", "must be a path string")
    out = Path(out)
    if base_dir is not None and not out.is_absolute():
        out = Path(base_dir) / out
    return ExperimentConfig(model=name, params=params, sizes=sizes, n_realizations=[int(n) for n in nreal],
                            master_seed=int(seed), analysis=specs, output_dir=out, variants=variants,
                            source=raw)


def load_config(path):
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else str(path)
        raise ConfigError(where, f"YAML syntax error: {getattr(exc, 'problem', exc)}") from exc
    return parse_config(raw)
