"""Formation diffusion policy: planners, formation control, training and evaluation.

Configs, environments, episode records and reports cross the boundary as
plain dicts; matrices come back as numpy arrays.
"""

import json

from . import _core
from ._core import (
    CheckpointError,
    ConfigError,
    DataError,
    EnvironmentGenerationError,
    Error,
    InvalidAction,
    InvalidArgument,
    SamplingError,
    TrainingError,
    cosine_alpha_bars,
    distance_errors,
    formation_command,
    rigidity_matrix,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "EnvironmentGenerationError",
    "Error",
    "InvalidAction",
    "InvalidArgument",
    "SamplingError",
    "TrainingError",
    "cosine_alpha_bars",
    "default_config",
    "distance_errors",
    "episode_metrics",
    "evaluate",
    "formation_command",
    "generate_dataset",
    "render_svg",
    "rigidity_matrix",
    "rollout",
    "sample_environment",
    "train",
]


def _dump(config):
    if config is None:
        return ""
    return json.dumps(config)


def default_config():
    return json.loads(_core.default_config())


def sample_environment(seed, config=None):
    return json.loads(_core.sample_environment(seed, _dump(config)))


def rollout(policy, seed, config=None, checkpoint=None, candidates=None):
    """Runs one episode and returns its record."""
    return json.loads(_core.rollout(policy, seed, _dump(config), checkpoint, candidates))


def episode_metrics(record):
    return json.loads(_core.episode_metrics(json.dumps(record)))


def evaluate(policy, episodes, seed=1000000, jobs=1, config=None, checkpoint=None, candidates=None):
    """Returns (report dict, csv text) for `episodes` seeded episodes."""
    report, csv = _core.evaluate(policy, episodes, seed, jobs, _dump(config), checkpoint, candidates)
    return json.loads(report), csv


def generate_dataset(episodes, seed, out, jobs=1, config=None):
    return _core.generate_dataset(episodes, seed, str(out), jobs, _dump(config))


def train(data, out, config=None, steps=0):
    """Trains on an NDJSON dataset and writes a checkpoint; returns (step losses, validation losses)."""
    return _core.train(str(data), str(out), _dump(config), steps)


def render_svg(record):
    return _core.render_svg(json.dumps(record))
