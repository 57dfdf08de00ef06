"""Deformed Kepler-Coulomb system on a conformally flat curved space.

H = |q| p^2 / (2 (eta + |q|)) - k / (eta + |q|) in N dimensions, with its
classical integrals, orbit integration, closed-form quantum spectrum, an
independent radial finite-difference oracle and grid checks of the quantum
symmetry operators.
"""
from __future__ import annotations

from .errors import (CollisionError, ConvergenceError, DegenerateSampleError,
                     DeformedKeplerError, DomainError, SingularOriginError)
from .model import HypersphericalPoint, ModelParams, PhaseState, eval_hamiltonian

__all__ = [
    "CollisionError",
    "ConvergenceError",
    "DegenerateSampleError",
    "DeformedKeplerError",
    "DomainError",
    "HypersphericalPoint",
    "ModelParams",
    "PhaseState",
    "SingularOriginError",
    "eval_hamiltonian",
]

__version__ = "0.1.0"
