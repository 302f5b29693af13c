"""Eigenvalues and bifurcation for the mixed operator -u'' + (-Delta)^s u on an interval
with Dirichlet and nonlocal Neumann exterior sets."""

from __future__ import annotations

__version__ = "0.1.0"

from .assembly import AssembledSystem, assemble, rayleigh_quotient
from .domain import DomainConfig, Mesh1D, NodeRole, build_mesh, validate_config
from .frackernel import FracKernel, compute_normalization_constant
from .spectral import EigenPair, Spectrum, solve_smallest

__all__ = [
    "AssembledSystem",
    "DomainConfig",
    "EigenPair",
    "FracKernel",
    "Mesh1D",
    "NodeRole",
    "Spectrum",
    "assemble",
    "build_mesh",
    "compute_normalization_constant",
    "rayleigh_quotient",
    "solve_smallest",
    "validate_config",
]
