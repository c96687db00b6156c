"""Discrete Ricci flow laboratory.

Exact toric MMP with scaling (rational arithmetic end to end), adaptive
implicit potential flows on the torus with degenerate densities, semilinear
fixed-point solves, and the axisymmetric conformal flow on the round sphere.

Fields cross the boundary as square numpy arrays on the cell-centered grid
x_i = (i + 1/2)/n; exact rationals cross as canonical "p/q" strings; flow and
sphere configs are the same strict dicts the `ricci-mmp` CLI accepts.
"""

from ._core import (
    SchemaError,
    build_density,
    canonical_divisor,
    curvature_potential,
    is_ample,
    is_nef,
    mmp_trace,
    nef_threshold,
    random_blowup_pair,
    rough_initial_potential,
    run_flow,
    run_scenario,
    run_sphere_flow,
    self_intersections,
    solve_linear_ma,
    solve_semilinear_ma,
    spectral_laplacian,
    sphere_extinction,
    suites,
)

__all__ = [
    "SchemaError",
    "build_density",
    "canonical_divisor",
    "curvature_potential",
    "is_ample",
    "is_nef",
    "mmp_trace",
    "nef_threshold",
    "random_blowup_pair",
    "rough_initial_potential",
    "run_flow",
    "run_scenario",
    "run_sphere_flow",
    "self_intersections",
    "solve_linear_ma",
    "solve_semilinear_ma",
    "spectral_laplacian",
    "sphere_extinction",
    "suites",
]

__version__ = "0.1.0"
