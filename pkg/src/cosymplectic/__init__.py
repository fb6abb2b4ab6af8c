"""Numerical toolkit for cosymplectic Hamiltonian systems with symmetry.

Modules: ``core`` (charts, fields, brackets), ``symmetry`` (momentum maps and
reduction), ``dynamics`` (integrators), ``equilibria`` (relative equilibria),
``stability`` (energy-momentum classification), ``quantum`` (finite-level
Schrodinger systems), ``threebody`` (restricted three-body problem) and ``cli``.
"""
from .core import (DarbouxChart, DimensionError, DomainError, Report, ScalarField, evolution_field,
                   gradient_field, hamiltonian_field, parse_field, poisson_bracket, quadratic_field)
from .dynamics import IntegratorConfig, Trajectory, integrate
from .symmetry import LieAlgebraSpec, SymmetryAction

__version__ = "0.1.0"

__all__ = [
    "DarbouxChart", "DimensionError", "DomainError", "Report", "ScalarField", "evolution_field",
    "gradient_field", "hamiltonian_field", "parse_field", "poisson_bracket", "quadratic_field",
    "IntegratorConfig", "Trajectory", "integrate", "LieAlgebraSpec", "SymmetryAction",
]
