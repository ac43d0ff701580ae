"""Extremes of the symmetric exclusion process: kernels, closed-form theory and simulation."""

import json

from ._ssep import (
    CapabilityError,
    ConfigError,
    DomainError,
    Profile,
    TruncationError,
    duality_occupation,
    exact_law_of_N,
    gauss_partial_moment,
    independent_gap,
    level,
    mean_N_exact,
    run_command,
    ss_bound,
    truncation_depth,
    walk_pmf,
    walk_tail,
)
from . import _ssep


def report(profile, t, x, trunc_eps=1e-4):
    """Closed-form quantities at (t, x) as a dict."""
    return json.loads(_ssep.report_json(profile, t, x, trunc_eps))


def experiment(manifest, replicas, seed, threads=1):
    """Replicas of the first (t, level) point of a YAML manifest; aggregated statistics as a dict."""
    return json.loads(_ssep.experiment_json(manifest, replicas, seed, threads))


__all__ = [
    "CapabilityError",
    "ConfigError",
    "DomainError",
    "Profile",
    "TruncationError",
    "duality_occupation",
    "exact_law_of_N",
    "experiment",
    "gauss_partial_moment",
    "independent_gap",
    "level",
    "mean_N_exact",
    "report",
    "run_command",
    "ss_bound",
    "truncation_depth",
    "walk_pmf",
    "walk_tail",
]
