"""Python access to the confdyn core: models, trajectories, the verify suite."""

import json

from ._confdyn import (
    ConfdynError,
    conformality_ratio,
    model_parameters,
    models,
    run_config,
    simulate,
    vector_field,
)
from ._confdyn import verify as _verify


def verify(scope="all", seed=7, jobs=1):
    """Run a verify scope and return the parsed report."""
    return json.loads(_verify(scope, seed, jobs))


__all__ = [
    "ConfdynError",
    "conformality_ratio",
    "model_parameters",
    "models",
    "run_config",
    "simulate",
    "vector_field",
    "verify",
]
