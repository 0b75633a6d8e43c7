"""Flat ``section.key = value`` pipeline configuration."""

import os
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .features import FeatureConfig
from .reviews import FIELDS, Schema
from .trainer import TrainConfig
from .walks import WalkConfig

DEFAULT_WORKERS = os.cpu_count() or 1


@dataclass(frozen=True)
class PipelineConfig:
    dataset: str = ""
    labels: str = ""
    workdir: str = "work"
    schema: Schema = field(default_factory=Schema)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    min_co_reviews: int = 1
    dump_features: bool = False
    walk: WalkConfig = field(default_factory=WalkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    binary_embeddings: bool = False
    score_n: int = 25
    eval_ks: tuple = (10, 50, 100)
    workers: int = DEFAULT_WORKERS


def _bool(v):
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _ints(v):
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


def _floats(v):
    return tuple(float(x) for x in v.replace(" ", "").split(",") if x)


def _zeta(v):
    return v.strip() if v.strip() == "mean" else float(v)


def _delimiter(v):
    return "\t" if v in ("\\t", "tab") else v


def _columns(v):
    return tuple(x.strip() for x in v.split(","))


# key -> (attribute on PipelineConfig, sub-attribute or None, parser)
KEYS = {
    "paths.dataset": ("dataset", None, str),
    "paths.labels": ("labels", None, str),
    "paths.workdir": ("workdir", None, str),
    "data.rating_min": ("schema", "rating_min", float),
    "data.rating_max": ("schema", "rating_max", float),
    "data.delimiter": ("schema", "delimiter", _delimiter),
    "data.columns": ("schema", "columns", _columns),
    "features.alpha": ("features", "alpha", _floats),
    "features.zeta": ("features", "zeta", _zeta),
    "features.gamma_tradeoff": ("features", "gamma_tradeoff", float),
    "features.smoothing_c": ("features", "smoothing_c", float),
    "features.time_unit": ("features", "time_unit", str),
    "network.min_co_reviews": ("min_co_reviews", None, int),
    "network.dump_features": ("dump_features", None, _bool),
    "walk.walks_per_node": ("walk", "walks_per_node", int),
    "walk.walk_length": ("walk", "walk_length", int),
    "walk.window": ("walk", "window", int),
    "walk.seed": ("walk", "seed", int),
    "train.beta": ("train", "beta", float),
    "train.psi_reg": ("train", "psi_reg", float),
    "train.delta": ("train", "delta", float),
    "train.kappa": ("train", "kappa", int),
    "train.learning_rate": ("train", "learning_rate", float),
    "train.min_learning_rate": ("train", "min_learning_rate", float),
    "train.lr_schedule": ("train", "lr_schedule", str),
    "train.epochs": ("train", "epochs", int),
    "train.dim": ("train", "dim", int),
    "train.seed": ("train", "seed", int),
    "train.binary": ("binary_embeddings", None, _bool),
    "score.n": ("score_n", None, int),
    "eval.ks": ("eval_ks", None, _ints),
    "run.workers": ("workers", None, int),
}

# tuned settings for the two reference datasets
PRESETS = {
    "amazoncn": {"train.dim": "64", "train.beta": "0.6", "score.n": "25"},
    "yelphotel": {"train.dim": "128", "train.beta": "0.4", "score.n": "40"},
}


def parse_lines(lines, source="<config>"):
    values = {}
    for line_no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        values[key] = value
    return values


def read_config_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh, str(path))


def build_config(values, base=None):
    """Apply string ``values`` (key -> raw text) on top of ``base``."""
    cfg = base or PipelineConfig()
    top, nested = {}, {}
    for key, raw in values.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        attr, sub, parse = KEYS[key]
        try:
            value = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if sub is None:
            top[attr] = value
        else:
            nested.setdefault(attr, {})[sub] = value
    for attr, subs in nested.items():
        try:
            top[attr] = replace(getattr(cfg, attr), **subs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    cfg = replace(cfg, **top)
    if cfg.score_n < 1 or cfg.workers < 1 or cfg.min_co_reviews < 1 or any(k < 1 for k in cfg.eval_ks):
        raise ConfigError("score.n, run.workers, network.min_co_reviews and eval.ks must be >= 1")
    if sorted(cfg.schema.columns) != sorted(FIELDS):
        raise ConfigError(f"data.columns must be a permutation of {FIELDS}")
    return cfg


def config_lines(cfg):
    """Every key with its effective value, in KEYS order."""
    out = []
    for key, (attr, sub, _) in KEYS.items():
        value = getattr(cfg, attr)
        if sub is not None:
            value = getattr(value, sub)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = str(value).lower()
        elif key == "data.delimiter" and value == "\t":
            value = "\\t"
        out.append(f"{key} = {value}")
    return out

