"""JSON experiment configs: schema validation and picklable factories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import jsonschema

from .besov import BesovParams
from .instances import NoiseModel, ObjectiveInstance, make_instance
from .strategies import (
    Strategy,
    doo_optimize,
    grid_explore_commit,
    random_search,
    simple_from_cumulative,
    ucb_discretization,
)

__all__ = [
    "ConfigError",
    "StrategyConfig",
    "InstanceConfig",
    "validate",
    "parse_besov",
    "default_target",
    "frac_grid",
    "SCHEMAS",
]


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` holds one message per field path."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


_exponent = {"oneOf": [{"type": "number", "minimum": 1}, {"enum": ["inf"]}]}
_bp = {
    "type": "object",
    "required": ["sigma", "p"],
    "properties": {
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "p": _exponent,
        "q": _exponent,
        "L": {"type": "number", "exclusiveMinimum": 0},
        "dim": {"type": "integer", "minimum": 1},
    },
}
_noise = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["none", "gaussian"]},
        "eta": {"type": "number", "minimum": 0},
    },
}
_wavelet = {"enum": ["haar", "tent-bump", "smooth-bump"]}
_instance = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["theta-member", "random-besov", "tent-peak"]},
        "bp": _bp,
        "wavelet": _wavelet,
        "level": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "auto"}]},
        "lambda": {"oneOf": [{"type": "array", "items": {"type": "integer", "minimum": 1}}, {"const": "random"}]},
        "max_level": {"type": "integer", "minimum": 0},
        "fill": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "s": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "L": {"type": "number", "exclusiveMinimum": 0},
        "height": {"type": "number", "exclusiveMinimum": 0},
        "radius_times_T": {"type": "number", "exclusiveMinimum": 0},
        "apex": {"oneOf": [{"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}}, {"const": "random"}]},
        "dim": {"type": "integer", "minimum": 1},
        "noise": _noise,
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "theta-member"}}}, "then": {"required": ["bp"]}},
        {"if": {"properties": {"kind": {"const": "random-besov"}}}, "then": {"required": ["bp", "max_level"]}},
    ],
}
_strategy = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"enum": ["random_search", "grid_explore_commit", "doo", "ucb_discretization", "simple_from_cumulative"]},
        "params": {"type": "object"},
    },
}
_seed = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_horizons = {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1}

SCHEMAS = {
    "synth": {
        "type": "object",
        "required": ["instance"],
        "properties": {
            "instance": _instance,
            "seed": _seed,
            "T": {"type": "integer", "minimum": 1},
            "resolution": {"type": "integer", "minimum": 1},
        },
    },
    "norm": {
        "type": "object",
        "required": ["bp"],
        "properties": {
            "function": {"type": "string"},
            "bp": _bp,
            "n_pairs": {"type": "integer", "minimum": 1},
            "seed": _seed,
        },
    },
    "run": {
        "type": "object",
        "required": ["strategy", "instance", "T"],
        "properties": {
            "experiment": {"type": "string"},
            "strategy": _strategy,
            "instance": _instance,
            "T": {"type": "integer", "minimum": 2},
            "seed": _seed,
        },
    },
    "sweep": {
        "type": "object",
        "required": ["strategy", "instance", "horizons"],
        "properties": {
            "experiment": {"type": "string"},
            "strategy": _strategy,
            "instance": _instance,
            "horizons": _horizons,
            "reps": {"type": "integer", "minimum": 1},
            "seed": _seed,
            "regret": {"enum": ["simple", "cumulative"]},
            "tolerance": {"type": "number", "exclusiveMinimum": 0},
            "target": {"type": "number"},
        },
    },
    "lowerbound": {
        "type": "object",
        "required": ["strategy", "bp"],
        "properties": {
            "experiment": {"type": "string"},
            "strategy": _strategy,
            "bp": _bp,
            "wavelet": _wavelet,
            "T": {"type": "integer", "minimum": 1},
            "horizons": _horizons,
            "reps": {"type": "integer", "minimum": 1},
            "seed": _seed,
        },
    },
    "phase-diagram": {
        "type": "object",
        "properties": {
            "d": {"type": "integer", "minimum": 1},
            "sigma": {"$ref": "#/$defs/grid"},
            "inv_p": {"$ref": "#/$defs/grid"},
        },
        "$defs": {
            "grid": {
                "oneOf": [
                    {"type": "array", "items": {"type": ["number", "string"]}, "minItems": 1},
                    {
                        "type": "object",
                        "required": ["start", "stop", "step"],
                        "properties": {
                            "start": {"type": ["number", "string"]},
                            "stop": {"type": ["number", "string"]},
                            "step": {"type": ["number", "string"]},
                        },
                    },
                ]
            }
        },
    },
}


def _path(err) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate(command: str, doc) -> None:
    """Raise ConfigError listing every schema violation with its field path."""
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError([f"{_path(e)}: {e.message}" for e in errors])


def parse_besov(doc: dict, where: str = "$.bp") -> BesovParams:
    try:
        return BesovParams.from_dict(doc)
    except (KeyError, ValueError) as exc:
        raise ConfigError([f"{where}: {exc}"]) from None


@dataclass(frozen=True)
class StrategyConfig:
    name: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> StrategyConfig:
        cfg = cls(doc["name"], dict(doc.get("params", {})))
        cfg.build(16, 1)  # surface parameter errors before any output
        return cfg

    def build(self, T: int, dim: int) -> Strategy:
        p = self.params
        try:
            if self.name == "random_search":
                return random_search(dim)
            if self.name == "grid_explore_commit":
                return grid_explore_commit(T, dim, bool(p.get("noisy", False)))
            if self.name == "doo":
                return doo_optimize(float(p["holder_s"]), float(p.get("holder_L", 1.0)), dim)
            if self.name == "ucb_discretization":
                extra = {k: p[k] for k in ("exploration", "arms_per_axis", "holder_L", "arms_constant") if k in p}
                return ucb_discretization(float(p["holder_s"]), float(p["eta"]), T, dim, **extra)
            if self.name == "simple_from_cumulative":
                base = StrategyConfig(p["base"]["name"], dict(p["base"].get("params", {})))
                return simple_from_cumulative(base.build(T, dim), T)
        except KeyError as exc:
            raise ConfigError([f"$.strategy.params.{exc.args[0]}: required parameter missing"]) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError([f"$.strategy.params: {exc}"]) from None
        raise ConfigError([f"$.strategy.name: unknown strategy {self.name!r}"])


@dataclass(frozen=True)
class InstanceConfig:
    kind: str
    params: dict
    noise: NoiseModel

    @classmethod
    def from_dict(cls, doc: dict) -> InstanceConfig:
        params = {k: v for k, v in doc.items() if k not in ("kind", "noise")}
        noise_doc = doc.get("noise", {"kind": "none", "eta": 0.0})
        try:
            kind = noise_doc.get("kind", "gaussian" if noise_doc.get("eta", 0) > 0 else "none")
            noise = NoiseModel(kind, float(noise_doc.get("eta", 0.0)))
        except ValueError as exc:
            raise ConfigError([f"$.instance.noise: {exc}"]) from None
        if "bp" in params:
            bp = parse_besov(params["bp"], "$.instance.bp")
            if not bp.supercritical:
                raise ConfigError(
                    [
                        f"$.instance.bp: sigma = {bp.sigma} <= d/p = {bp.dim * bp.inv_p}; "
                        "the Besov ball then contains unbounded singularities and the "
                        "minimax regret is infinite"
                    ]
                )
        return cls(doc["kind"], params, noise)

    @property
    def dim(self) -> int:
        if "bp" in self.params:
            return int(self.params["bp"].get("dim", 1))
        return int(self.params.get("dim", 1))

    @property
    def holder_exponent(self) -> float:
        if "bp" in self.params:
            return BesovParams.from_dict(self.params["bp"]).holder_exponent
        return float(self.params.get("s", 1.0))

    def build(self, T: int | None, seed) -> ObjectiveInstance:
        seed = self.params.get("seed", seed)
        try:
            return make_instance(self.kind, self.params, self.noise, seed, T)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError([f"$.instance: {exc}"]) from None


def default_target(regret: str, instance: InstanceConfig) -> float:
    from .harness import target_exponent

    return target_exponent(regret, instance.noise.noisy, instance.holder_exponent, instance.dim)


def frac_grid(spec) -> list[Fraction]:
    """Exact grid from a list or a {start, stop, step} range (stop inclusive)."""
    if isinstance(spec, dict):
        start, stop, step = (Fraction(str(spec[k])) for k in ("start", "stop", "step"))
        if step <= 0:
            raise ConfigError(["grid step must be positive"])
        n = math.floor((stop - start) / step)
        return [start + k * step for k in range(n + 1)]
    return [Fraction(str(v)) for v in spec]
