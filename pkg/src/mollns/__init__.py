"""Pseudo-spectral laboratory for the mollified Navier-Stokes approximation.

The torus solver integrates

    v_t + J_m[v] . grad v + grad p = nu * Lap v,   div v = 0,

and the diagnostics evaluate the weighted energy identities, the defect
functionals and their alpha -> 0 extrapolations on the recorded ledgers.
"""

from mollns.spectral import (
    GridSpec,
    MollifierSpec,
    SpectralField,
    forward_transform,
    gradient_norm,
    inverse_transform,
    leray_project,
    mollify,
    norm_inf,
    norm_q,
    stokes_laplacian,
)
from mollns.solver import (
    SimConfig,
    TimeSeriesLedger,
    grad_energy_rate,
    nonlinear_term,
    pressure,
    rhs,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "MollifierSpec",
    "SpectralField",
    "SimConfig",
    "TimeSeriesLedger",
    "forward_transform",
    "inverse_transform",
    "leray_project",
    "mollify",
    "gradient_norm",
    "stokes_laplacian",
    "norm_q",
    "norm_inf",
    "nonlinear_term",
    "pressure",
    "rhs",
    "grad_energy_rate",
    "run",
]
