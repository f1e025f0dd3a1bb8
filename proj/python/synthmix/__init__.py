"""Python bindings for the synthmix moment-dynamics library."""

import json as _json

from . import _core
from ._core import (
    DivergenceError,
    SynthmixError,
    block_diag,
    build_operators,
    check_lemma1,
    cli_main,
    kron,
    pinv,
    run_preset,
    spectral_radius,
)

__version__ = _core.__version__

__all__ = [
    "DivergenceError",
    "SynthmixError",
    "block_diag",
    "build_operators",
    "check_lemma1",
    "cli_main",
    "conditional_moments",
    "estimate_moments",
    "kron",
    "limits",
    "pinv",
    "run_preset",
    "spectral_radius",
    "trajectory",
]


def _dump(config):
    return _json.dumps(config if config is not None else {})


def conditional_moments(config=None):
    """List of (M_t, C_t) pairs for t = 0..T."""
    return _core._conditional_moments(_dump(config))


def trajectory(config=None):
    """Per-generation metric records for one scenario."""
    return _json.loads(_core._trajectory(_dump(config)))


def limits(config=None):
    """Limit metric records; raises DivergenceError when rho(Q) >= 1."""
    return _json.loads(_core._limits(_dump(config)))


def estimate_moments(config=None, n_reps=2000, base_seed=1, generation=None, condition_on_initial=True, threads=0):
    """Monte Carlo moments of the stacked estimates at one generation."""
    if generation is None:
        generation = (config or {}).get("horizon", 5)
    return _core._estimate_moments(_dump(config), n_reps, base_seed, generation, condition_on_initial, threads)
