"""Cooperative soft actor critic on multi-room mazes.

Configs and layouts cross the boundary as JSON text; the helpers below take
and return plain dicts.
"""

import json

from ._core import (
    ConfigError,
    MazeEnv,
    Rng,
    bellman_targets,
    code_version,
    convex_combine,
    latest_checkpoint,
    normalize_over_batch,
    trailing_mean,
)
from . import _core

__all__ = [
    "ConfigError",
    "MazeEnv",
    "Rng",
    "bellman_targets",
    "code_version",
    "config",
    "convex_combine",
    "evaluate",
    "export_trajectories",
    "latest_checkpoint",
    "maze_layout",
    "normalize_over_batch",
    "train",
    "trailing_mean",
    "validate_maze",
]


def config(scale="desk", **overrides):
    """Full, validated config dict: the preset for `scale` plus overrides."""
    text = json.dumps({"scale": scale, **overrides})
    return json.loads(_core.parse_config(text))


def maze_layout(rooms, scale=1.0):
    return json.loads(_core.maze_layout(rooms, scale))


def validate_maze(layout):
    return _core.validate_maze(json.dumps(layout))


def train(cfg, out_dir, resume=True, on_epoch=None):
    return _core.train(json.dumps(cfg), str(out_dir), resume, on_epoch)


def evaluate(checkpoint, episodes=100, seed=0):
    return _core.evaluate(str(checkpoint), episodes, seed)


def export_trajectories(checkpoint, count=20, critic=2, seed=0):
    return _core.export_trajectories(str(checkpoint), count, critic, seed)
