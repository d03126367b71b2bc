"""Simulation of SDEs whose drift reads an exponentially fading past."""

from ._core import (
    ConfigError,
    Drift,
    IntegrationError,
    Past,
    Trajectory,
    __version__,
    check_conditions,
    couple,
    girsanov,
    growth_diagnostic,
    increment_tail_bound,
    moment_bound,
    replay_residual,
    rn_density_ensemble,
    run,
    simulate,
    simulate_with_increments,
    stationary,
    w1_distance,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
