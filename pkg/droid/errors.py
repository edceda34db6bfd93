"""
Exceptions raised by the testbed.

Each error also derives from the closest built-in so callers may catch
``ValueError`` / ``RuntimeError`` without importing this module.
"""


class DroidError(Exception):
    """Base class of all testbed errors."""


class InvalidConfigError(DroidError, ValueError):
    """A configuration value is invalid. The message names the field."""


class UnknownKeyError(InvalidConfigError):
    """A configuration document contains a key that is not recognised."""


class InvalidInputError(DroidError, ValueError):
    """Arguments with mismatched sizes, time steps or names."""


class OutOfWorkspaceError(DroidError, ValueError):
    """A Cartesian target lies outside the reachable annulus of the arm."""


class InfeasibleDistributionError(DroidError, RuntimeError):
    """Positivity-constrained sampling hit its redraw cap."""


class SimulationDivergedError(DroidError, RuntimeError):
    """The simulator produced a non-finite state."""


class DivergedUpdateError(DroidError, RuntimeError):
    """A PPO update produced a non-finite loss or a broken ratio identity."""


class StageDependencyError(DroidError, RuntimeError):
    """A pipeline stage is missing the artifacts of a previous stage."""


class OutDirLockedError(DroidError, RuntimeError):
    """Another process owns the output directory."""
