"""Configuration-driven deep reinforcement learning (C++ core)."""

import json as _json

from . import _drlkit
from ._drlkit import (
    IoError,
    NumericError,
    PcaModel,
    SchemaError,
    ShapeError,
    average_files,
    discounted_returns,
    gae,
    load_pca,
    pca_fit,
    read_scores,
    select_latent_dim,
)

__all__ = [
    "Env", "IoError", "NumericError", "PcaModel", "SchemaError", "ShapeError", "average_files", "config_hash",
    "default_config", "discounted_returns", "finalize_config", "gae", "load_pca", "pca_fit", "read_scores",
    "select_latent_dim", "train",
]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def default_config():
    """The defaults table as a dict."""
    return _json.loads(_drlkit.default_config())


def finalize_config(config):
    """Validate a run config and return it with all defaults applied."""
    return _json.loads(_drlkit.finalize_config(_text(config)))


def config_hash(config):
    return _drlkit.config_hash(_text(config))


def train(config, name="run", seed=None, score_path=""):
    """Run one training. Returns a dict whose "records" entry is an (n, 4)
    array of transitions, episode, score, walltime."""
    return _drlkit.train(_text(config), name, seed, str(score_path))


class Env(_drlkit.Env):
    """A built-in environment; `params` is the environment section of a run
    config without its type (extra, obs_transform, lift)."""

    def __init__(self, type, params=None, seed=0):
        super().__init__(type, _json.dumps(params or {}), seed)
