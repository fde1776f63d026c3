"""Discrete Green functions of Stokes systems with measurable coefficients."""

from .coefficients import (CoefficientField, bmo_modulus, check_ellipticity, diffeo, identity,
                           layered, make_coefficients, perturbed, step_profile)
from .discretization import FieldPair, SaddleSystem, adjoint_system, assemble_stokes
from .geometry import (Annulus, Ball, Complement, ExteriorBox, GeometryError, HalfAnnulus,
                       HalfBall, HalfSpaceBox, WholeSpaceBox, build_domain, dist_to_boundary,
                       region_nodes)
from .green import (GreenFunction, adjoint_green, averaged_green, green_extrapolated,
                    mollified_source, oseen_tensor, representation_reconstruct)
from .solver import (SolveReport, SolverError, check_divergence_solvability, solve_divergence,
                     solve_stokes)

__version__ = "0.1.0"

__all__ = [
    "Annulus", "Ball", "CoefficientField", "Complement", "ExteriorBox", "FieldPair",
    "GeometryError", "GreenFunction", "HalfAnnulus", "HalfBall", "HalfSpaceBox",
    "SaddleSystem", "SolveReport", "SolverError", "WholeSpaceBox", "adjoint_green",
    "adjoint_system", "assemble_stokes", "averaged_green", "bmo_modulus", "build_domain",
    "check_divergence_solvability", "check_ellipticity", "diffeo", "dist_to_boundary",
    "green_extrapolated", "identity", "layered", "make_coefficients", "mollified_source",
    "oseen_tensor", "perturbed", "region_nodes", "representation_reconstruct",
    "solve_divergence", "solve_stokes", "step_profile",
]
