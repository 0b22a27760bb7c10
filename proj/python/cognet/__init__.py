"""Contextual object inpainting (C++ core with numpy bindings)."""

import json

from ._cognet import (
    InvalidInput,
    IoError,
    NumericalError,
    ParseError,
    class_loss,
    feature_stats,
    frechet_distance,
    inpaint,
    sc_adain,
    semantic_map,
)
from . import _cognet

__all__ = [
    "InvalidInput",
    "IoError",
    "NumericalError",
    "ParseError",
    "class_loss",
    "default_train_config",
    "evaluate",
    "feature_stats",
    "frechet_distance",
    "generate_shapesworld",
    "grad_check",
    "inpaint",
    "prepare_coco",
    "sc_adain",
    "semantic_map",
    "train",
]


def generate_shapesworld(out, n, seed=0, canvas=64, classes=4, rho=1.0, split="train"):
    """Writes a ShapesWorld split to `out` and returns its config."""
    return json.loads(_cognet.generate_shapesworld(str(out), n, seed, canvas, classes, rho, split))


def prepare_coco(annotations, images, out, min_frac=0.02, max_frac=0.5, border=1, size=None):
    return json.loads(_cognet.prepare_coco(str(annotations), str(images), str(out), min_frac, max_frac, border, size))


def default_train_config():
    return json.loads(_cognet._default_train_config())


def train(config=None, **overrides):
    """Runs training. `config` is a (partial) training config dict; keyword
    arguments override top-level keys. Returns the last step's metrics and the
    final checkpoint path."""
    cfg = default_train_config()
    for src in (config or {}, overrides):
        for key, value in src.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = str(value) if hasattr(value, "__fspath__") else value
    return json.loads(_cognet._train(json.dumps(cfg)))


def evaluate(data, checkpoint="", extractor="", out="", max_images=512, seed=0, identity=False, hard=False):
    return json.loads(_cognet._evaluate(str(checkpoint), str(data), str(extractor), str(out), max_images, seed,
                                        identity, hard))


def grad_check(seed=0):
    return json.loads(_cognet._grad_check(seed))
