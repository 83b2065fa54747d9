"""Self-normalized high-dimensional CLT toolkit."""

import json

import numpy as np

from . import _snclt
from ._snclt import (
    ConfigError,
    DegeneracyError,
    IoError,
    eta,
    g,
    max_cdf_diag,
    nazarov_band_bound,
    sample_max,
    self_normalized,
    sidak_threshold,
    smoothed_indicator,
    tilted_sum,
    truncate,
    ustat,
)

__all__ = [
    "ConfigError",
    "DegeneracyError",
    "IoError",
    "bound",
    "eta",
    "g",
    "generate_sample",
    "levels",
    "load_report",
    "max_cdf_diag",
    "nazarov_band_bound",
    "run_ks_cell",
    "sample_max",
    "self_normalized",
    "sidak_threshold",
    "simulate",
    "smoothed_indicator",
    "tilted_sum",
    "truncate",
    "ustat",
]


def _text(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def generate_sample(spec, n, seed):
    """n x d sample from a distribution spec (dict or JSON text)."""
    return _snclt.generate_sample(_text(spec), n, seed)


def levels(source, n=None, mode="per_coordinate"):
    """Truncation levels and moment report, from a spec or from an n x d array."""
    if isinstance(source, (dict, str)):
        if n is None:
            raise ConfigError("n is required for a distribution spec")
        return json.loads(_snclt.levels_from_spec(_text(source), n, mode))
    return json.loads(_snclt.levels_from_data(np.asarray(source, dtype=float), n, mode))


def bound(inputs):
    """Bound report for a dict of bound inputs (n, d, mu1, mu3, tail_prob, ...)."""
    return json.loads(_snclt.bound(_text(inputs)))


def run_ks_cell(config, n):
    return json.loads(_snclt.run_ks_cell(_text(config), n))


def simulate(config, format="json"):
    """Run every cell of the config; returns the decoded JSON report or CSV text."""
    out = _snclt.simulate(_text(config), format)
    return json.loads(out) if format == "json" else out


def load_report(path):
    return json.loads(_snclt.load_report(str(path)))
