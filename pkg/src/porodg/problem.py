"""Wiring of mesh + coefficients + BCs into a ready-to-step discrete problem."""

from dataclasses import dataclass

from .assembly import (BoundaryConditions, RhsAssembler, assemble_operators)
from .basis import DgSpace
from .dg_forms import DEFAULT_ALPHA, compute_penalties, compute_trace_weights


@dataclass
class DiscreteProblem:
    """Everything needed to time-step one configuration."""

    mesh: object
    space: DgSpace
    coeffs: object
    weights: object
    penalties: object
    bc: BoundaryConditions
    ops: object
    rhs: RhsAssembler


def setup_problem(mesh, degree, coeffs, bc=None, sources=None, dirichlet=None,
                  alpha=DEFAULT_ALPHA, legacy_boundary_zeta=False, space=None):
    """Build space, face tables, operators and the cached RHS assembler."""
    coeffs.validate()
    if space is None:
        space = DgSpace(mesh, degree)
    if bc is None:
        bc = BoundaryConditions()
    weights = compute_trace_weights(mesh, coeffs)
    penalties = compute_penalties(space, coeffs, weights, alpha=alpha,
                                  legacy_boundary_zeta=legacy_boundary_zeta)
    ops = assemble_operators(space, coeffs, penalties, weights, bc)
    rhs = RhsAssembler(space, coeffs, penalties, bc, sources, dirichlet)
    return DiscreteProblem(mesh, space, coeffs, weights, penalties, bc, ops, rhs)
