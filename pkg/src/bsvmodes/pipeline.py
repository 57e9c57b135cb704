"""Scenario to Schmidt modes: picks the cylindrical or the joint-harmonic solver."""

from __future__ import annotations

from dataclasses import replace

from bsvmodes.config import Setup, default_grid
from bsvmodes.kernel import DEFAULT_HARMONIC_LOSS_TOL, sample_joint_kernel, sample_kernel
from bsvmodes.schmidt import joint_schmidt, radial_schmidt


def with_grid(setup: Setup, n_points: int | None = None, n_max: int | None = None) -> Setup:
    """Copy of ``setup`` with grid sizes overridden where given."""
    grid = setup.grid
    if n_points is not None:
        grid = replace(grid, n_points=int(n_points))
    if n_max is not None:
        grid = replace(grid, n_max=int(n_max))
    return Setup(setup.pump, setup.segments, setup.gain, grid)


def solve_modes(setup: Setup, harmonic_loss_tol: float = DEFAULT_HARMONIC_LOSS_TOL):
    """Sample the amplitude on the configured grid and decompose it.

    Walk-off-free stacks use one radial problem per harmonic; stacks with
    walk-off use the joint (harmonic, radius) problem.
    """
    grid = default_grid(setup)
    if setup.has_walkoff:
        return joint_schmidt(sample_joint_kernel(setup, grid, harmonic_loss_tol))
    return radial_schmidt(sample_kernel(setup, grid, harmonic_loss_tol))


def principal_axis(setup: Setup) -> str:
    """Cut direction for 1-D spectra: the walk-off plane (x) when present, else y."""
    return "x" if setup.has_walkoff else "y"
