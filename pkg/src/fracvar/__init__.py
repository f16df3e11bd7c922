"""Discrete asymmetric fractional calculus of variations.

One-dimensional fractional operators (``frac1d``), box domains and fields
(``domain``), componentwise fractional gradients (``fracfield``), discrete
actions and Euler-Lagrange residuals (``varcalc``) and a variational
convection-diffusion solver with a classical reference (``cdsolve``).
"""
from __future__ import annotations

from fracvar.cases import CASE_IDS, Case, get_case
from fracvar.cdsolve import (
    CDCoefficients,
    SolveResult,
    SolverError,
    cd_lagrangian,
    convergence_study,
    equivalence_check,
    reference_solve,
    variational_solve,
)
from fracvar.domain import BoundaryClass, BoxDomain, Rule, SpaceTimeField, SpatialField
from fracvar.frac1d import (
    Direction,
    FracOrder,
    Samples1D,
    Scheme,
    TimeGrid,
    caputo_deriv,
    rl_deriv,
    rl_integral,
)
from fracvar.report import CheckReport
from fracvar.varcalc import AsymmetricState, Lagrangian, gradient_check

__all__ = [
    "CASE_IDS", "AsymmetricState", "BoundaryClass", "BoxDomain", "CDCoefficients", "Case",
    "CheckReport", "Direction", "FracOrder", "Lagrangian", "Rule", "Samples1D", "Scheme",
    "SolveResult", "SolverError", "SpaceTimeField", "SpatialField", "TimeGrid",
    "caputo_deriv", "cd_lagrangian", "convergence_study", "equivalence_check", "get_case",
    "gradient_check", "reference_solve", "rl_deriv", "rl_integral", "variational_solve",
]
