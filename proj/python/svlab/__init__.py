"""Python access to the svlab simulators, ID estimator and inner-model training."""

import json

from . import _core
from ._core import ContractError, Error, NumericalError, count_active_dims, dof_round, hamiltonian, simulate

__all__ = [
    "ContractError",
    "Error",
    "NumericalError",
    "count_active_dims",
    "default_config",
    "desk_config",
    "dof_round",
    "hamiltonian",
    "mle_id",
    "simulate",
    "system_defaults",
    "train",
    "validate_config",
]


def system_defaults(kind):
    return json.loads(_core.system_defaults(kind))


def mle_id(points, k1=10, k2=20):
    """Levina-Bickel estimate for an (n, d) array; returns a dict."""
    return json.loads(_core.mle_id_json(points, k1, k2))


def default_config():
    return json.loads(_core.default_config_json())


def desk_config(system, variant, seed=0):
    return json.loads(_core.desk_config_json(system, variant, seed))


def validate_config(config):
    """Resolved copy of a config dict; raises on unknown keys or bad values."""
    return json.loads(_core.validate_config_json(json.dumps(config)))


def train(config, run_dir=""):
    """Train one inner model in vectors mode; returns the run report dict."""
    return json.loads(_core.train_json(json.dumps(config), str(run_dir)))
