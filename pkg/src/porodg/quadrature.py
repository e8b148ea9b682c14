"""Gauss quadrature on reference segments and triangles.

Volume integrals on polygonal elements are evaluated on their simplicial
sub-triangulation, so a triangle rule plus a segment rule cover everything
the assembly needs.  Rules are constructed for a requested polynomial
exactness degree; weights are strictly positive by construction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    """Points/weights on a reference cell, exact up to ``degree``."""

    points: np.ndarray   # (n, d) on the reference cell
    weights: np.ndarray  # (n,), all positive
    degree: int          # polynomial exactness


def segment_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact for polynomials of ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = roots_legendre(n)
    pts = 0.5 * (x + 1.0)
    return QuadratureRule(pts.reshape(-1, 1), 0.5 * w, 2 * n - 1)


def triangle_rule(degree):
    """Conical-product Gauss rule on the unit reference triangle.

    The triangle is {(x, y): x, y >= 0, x + y <= 1}; the rule collapses a
    tensor Gauss-Legendre x Gauss-Jacobi grid through x = a(1-b), y = b and
    is exact for total degree 2n-1 with n points per direction.
    """
    n = max(1, (degree + 2) // 2)
    xa, wa = roots_legendre(n)
    xb, wb = roots_jacobi(n, 1, 0)     # weight (1-x) absorbs the Jacobian
    a = 0.5 * (xa + 1.0)
    b = 0.5 * (xb + 1.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(0.5 * wa, 0.25 * wb)
    pts = np.column_stack([(A * (1.0 - B)).ravel(), B.ravel()])
    return QuadratureRule(pts, W.ravel(), 2 * n - 1)


def map_to_triangle(rule, v0, v1, v2):
    """Push a reference triangle rule to the physical triangle (v0, v1, v2)."""
    v0 = np.asarray(v0, dtype=float)
    e1 = np.asarray(v1, dtype=float) - v0
    e2 = np.asarray(v2, dtype=float) - v0
    pts = v0 + np.outer(rule.points[:, 0], e1) + np.outer(rule.points[:, 1], e2)
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    return pts, rule.weights * jac


def map_to_segment(rule, p0, p1):
    """Push a reference segment rule to the physical segment (p0, p1)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t = rule.points[:, 0]
    pts = p0 + np.outer(t, p1 - p0)
    return pts, rule.weights * np.linalg.norm(p1 - p0)


def polygon_rule(triangles, degree):
    """Quadrature over a sub-triangulated polygon.

    ``triangles`` is an (nt, 3, 2) array of physical triangle vertices; the
    returned points/weights integrate polynomials of total ``degree`` exactly
    over their union.
    """
    ref = triangle_rule(degree)
    pts = []
    wts = []
    for tri in triangles:
        p, w = map_to_triangle(ref, tri[0], tri[1], tri[2])
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)
