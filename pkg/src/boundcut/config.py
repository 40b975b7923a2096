"""Experiment configuration: schema validation and model construction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .artifacts import config_hash
from .density import BandwidthSchedule
from .mixture import Domain, GaussianComponent, MixtureModel, default_half_width

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "build_model", "CONFIG_SCHEMA"]

_vector = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": ["thm2", "lemma6", "thm6", "diffusion", "risk"]},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["classes"],
            "properties": {
                "priors": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "m0": {"type": "number", "exclusiveMinimum": 0},
                "classes": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["mean", "scale"],
                            "properties": {
                                "mean": _vector,
                                "scale": _vector,
                                "weight": {"type": "number", "exclusiveMinimum": 0},
                            },
                        },
                    },
                },
            },
        },
        "bandwidth": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta": {"type": "number"},
                "c": {"oneOf": [{"type": "number"}, {"const": "auto"}]},
                "gamma": {"type": "number"},
            },
        },
        "kernel": {"enum": ["H", "G", "V", "gauss"]},
        "classifier": {"enum": ["plugin", "soft-nn", "nn", "bayes"]},
        "n_list": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "n_eval": {"type": "integer", "minimum": 100},
        "resolution": {"type": "integer", "minimum": 3},
        "circle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "amplitude": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "alphas": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"report": {"type": "string"}, "trace_csv": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    """The configuration does not validate."""


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    model: MixtureModel | None
    schedule: BandwidthSchedule
    kernel: str
    classifier: str
    n_list: tuple
    seeds: tuple
    n_eval: int
    resolution: int | None
    circle: dict
    outputs: dict
    experiment: str | None

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def build_model(spec: dict) -> MixtureModel:
    classes = []
    for cls_spec in spec["classes"]:
        classes.append([(c.get("weight", 1.0), GaussianComponent(c["mean"], c["scale"])) for c in cls_spec])
    dims = {c.d for cls in classes for _, c in cls}
    if len(dims) != 1:
        raise ConfigError("all components must share one dimension")
    q = len(classes)
    priors = spec.get("priors", [1.0 / q] * q)
    if len(priors) != q:
        raise ConfigError(f"{len(priors)} priors given for {q} classes")
    total = sum(priors)
    if not total > 0:
        raise ConfigError("priors must not all be zero")
    m0 = spec.get("m0") or default_half_width([c for cls in classes for _, c in cls])
    try:
        return MixtureModel([p / total for p in priors], tuple(classes), Domain(dims.pop(), m0))
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from exc
    model = build_model(raw["model"]) if "model" in raw else None
    experiment = raw.get("experiment")
    if model is None and experiment != "diffusion":
        raise ConfigError("config needs a 'model' section")
    d = model.d if model is not None else 2
    bw = raw.get("bandwidth", {})
    c = bw.get("c", "auto")
    gamma = bw.get("gamma", 1.0)
    beta = bw.get("beta", 1.0 / (4 * d + 5))
    try:
        schedule = BandwidthSchedule(beta=beta, c=None if c == "auto" else c, gamma=gamma, d=d)
    except ValueError as exc:
        raise ConfigError(f"bandwidth: {exc}") from exc
    return ExperimentConfig(
        raw=raw,
        model=model,
        schedule=schedule,
        kernel=raw.get("kernel", "G"),
        classifier=raw.get("classifier", "plugin"),
        n_list=tuple(raw.get("n_list", [1000])),
        seeds=tuple(raw.get("seeds", [0])),
        n_eval=raw.get("n_eval", 200_000),
        resolution=raw.get("resolution"),
        circle=dict(raw.get("circle", {})),
        outputs=dict(raw.get("outputs", {})),
        experiment=experiment,
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(raw)
