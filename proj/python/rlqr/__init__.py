"""Feedforward policies with a provable linear region around the origin.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from ._core import (
    ConfigError,
    DimensionMismatch,
    Infeasible,
    InitFailure,
    Network,
    NonConvergent,
    Unstabilizable,
    fit_critic_last_layer,
    init_bias_shifted,
    init_network,
    lqr,
    rollout,
    run_cli,
    tool_version,
)

__version__ = tool_version

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "Infeasible",
    "InitFailure",
    "Network",
    "NonConvergent",
    "Unstabilizable",
    "fit_critic_last_layer",
    "init_bias_shifted",
    "init_network",
    "lqr",
    "rollout",
    "run_cli",
    "tool_version",
]
