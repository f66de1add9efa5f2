"""Profile exposure ratings: calibration, baselines and learned raters."""

import json

from . import _core
from ._core import DegenerateError, ValidationError, ad_index, band, cohen_band, focal_rating, pearson

__all__ = [
    "DegenerateError",
    "ValidationError",
    "ad_index",
    "band",
    "calibrate",
    "cohen_band",
    "evaluate",
    "focal_rating",
    "pearson",
    "rate",
    "synth",
    "train",
]


def synth(config, out_dir):
    """Generate a synthetic dataset into out_dir; returns its hash."""
    return _core.synth(json.dumps(config), str(out_dir))


def calibrate(dataset_dir, situation, situations_dir=None):
    return json.loads(_core.calibrate(str(dataset_dir), situation, situations_dir and str(situations_dir)))


def train(dataset_dir, situation, method, grid=None, preset="quick", seed=0, situations_dir=None):
    grid_json = json.dumps(grid) if grid is not None else None
    text = _core.train(str(dataset_dir), situation, method, grid_json, preset, seed,
                       situations_dir and str(situations_dir))
    return json.loads(text)


def evaluate(dataset_dir, models, split="VALIDATION"):
    return json.loads(_core.evaluate(str(dataset_dir), [json.dumps(m) for m in models], split))


def rate(model, profile):
    """Rating of one profile, or None when no photo carries signal."""
    return _core.rate(json.dumps(model), json.dumps(profile))
