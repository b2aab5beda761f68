"""Optimal stopping on the random-walk skeleton of Brownian motion."""

import json

from ._dtstop import (
    ConfigError,
    DomainError,
    Error,
    ExitTime,
    InstanceTooLarge,
    __version__,
    plan,
    run_json,
    sample_path,
    transition_density,
    transition_prob,
)


def run(config, threads=1, write_files=False):
    """Run a configuration (dict in the CLI's JSON layout) and return the run record."""
    return json.loads(run_json(json.dumps(config), threads, write_files))


def solve(epsilon=0.5, paths=10000, seed=1, **sections):
    """Least-squares estimate; extra keyword sections merge into the config."""
    config = {"command": "solve", "seed": seed, "skeleton": {"epsilon": epsilon}, "solver": {"paths": paths}}
    for key, value in sections.items():
        config.setdefault(key, {}).update(value)
    return run(config)["results"]


def oracle(epsilon=0.5, nodes=32, **sections):
    """Quadrature-tree value for d = 1 and at most six periods."""
    config = {"command": "oracle", "skeleton": {"epsilon": epsilon}, "oracle": {"nodes": nodes, "refine": False}}
    for key, value in sections.items():
        config.setdefault(key, {}).update(value)
    return run(config)["results"]


__all__ = [
    "ConfigError",
    "DomainError",
    "Error",
    "ExitTime",
    "InstanceTooLarge",
    "__version__",
    "oracle",
    "plan",
    "run",
    "run_json",
    "sample_path",
    "solve",
    "transition_density",
    "transition_prob",
]
