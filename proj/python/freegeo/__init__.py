"""Python access to the freegeo library."""

import json

from ._freegeo import (
    ConfigError,
    DimensionError,
    ParseError,
    __version__,
    empirical_w2,
    evaluate,
    experiment_names,
    gaussian_gibbs_entropy,
    gibbs_entropy,
    gue,
    knn_entropy,
    log_energy_integral,
    normalize_formula,
    sample_gibbs,
    semicircular_entropy,
    w2_1d,
)
from ._freegeo import run_experiment as _run_experiment


def run_experiment(experiment, **overrides):
    """Run a lab experiment and return the report as a dict.

    Keyword values are passed as config text; lists may be given as Python
    sequences.
    """
    text = {}
    for key, value in overrides.items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(repr(float(v)) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        text[key] = str(value)
    return json.loads(_run_experiment(experiment, text))


__all__ = [
    "ConfigError",
    "DimensionError",
    "ParseError",
    "__version__",
    "empirical_w2",
    "evaluate",
    "experiment_names",
    "gaussian_gibbs_entropy",
    "gibbs_entropy",
    "gue",
    "knn_entropy",
    "log_energy_integral",
    "normalize_formula",
    "run_experiment",
    "sample_gibbs",
    "semicircular_entropy",
    "w2_1d",
]
