"""Broken polynomial spaces on polygonal elements.

Each element carries monomials on its bounding box, orthonormalized against
the element L2 inner product, so local mass matrices are identities and
projections need no solves.  All basis values and gradients at volume and
face quadrature points are cached at construction; assembly never
re-evaluates polynomials.
"""

import numpy as np

from .errors import AssemblyError, SpaceConstructionError
from .quadrature import polygon_rule, segment_rule, map_to_segment


def local_dim(degree):
    """Dimension of the scalar polynomial space of total ``degree`` in 2D."""
    return (degree + 1) * (degree + 2) // 2


def monomial_exponents(degree):
    """Bounding-box monomial exponents, graded by total degree."""
    return [(d - q, q) for d in range(degree + 1) for q in range(d + 1)]


class DgSpace:
    """Fully discontinuous scalar space on a :class:`~porodg.mesh.PolyMesh`.

    Parameters
    ----------
    mesh : PolyMesh
    degree : int or (n_elements,) int array
        Element-wise polynomial degree, >= 1.

    The vector-valued space is handled through the DOF layout: for element
    ``e`` with scalar offset ``s`` and ``m`` local functions, the vector
    DOFs occupy ``[2s, 2s + 2m)`` with component 0 first.
    """

    def __init__(self, mesh, degree):
        self.mesh = mesh
        degrees = np.broadcast_to(np.asarray(degree, dtype=int), (mesh.n_elements,))
        if (degrees < 1).any():
            raise SpaceConstructionError("polynomial degree must be >= 1")
        self.degrees = degrees.copy()
        self.nloc = np.array([local_dim(l) for l in self.degrees])
        self.offsets = np.concatenate([[0], np.cumsum(self.nloc)])
        self.n_scalar = int(self.offsets[-1])
        self.n_vector = 2 * self.n_scalar

        self._build_boxes()
        self._build_local_bases()
        self._build_face_caches()

    # -- local bases -------------------------------------------------------

    def _build_boxes(self):
        ne = self.mesh.n_elements
        self.box_center = np.empty((ne, 2))
        self.box_scale = np.empty((ne, 2))
        for e, loop in enumerate(self.mesh.elements):
            v = self.mesh.vertices[loop]
            lo, hi = v.min(axis=0), v.max(axis=0)
            self.box_center[e] = 0.5 * (lo + hi)
            self.box_scale[e] = np.maximum(0.5 * (hi - lo), 1e-300)

    def _monomials(self, e, pts, with_grad=False):
        X = (pts[:, 0] - self.box_center[e, 0]) / self.box_scale[e, 0]
        Y = (pts[:, 1] - self.box_center[e, 1]) / self.box_scale[e, 1]
        exps = monomial_exponents(self.degrees[e])
        l = self.degrees[e]
        # power tables up to l (value) and l-1 reused for derivatives
        XP = np.vstack([X ** p for p in range(l + 1)])
        YP = np.vstack([Y ** p for p in range(l + 1)])
        vals = np.empty((len(pts), len(exps)))
        for j, (p, q) in enumerate(exps):
            vals[:, j] = XP[p] * YP[q]
        if not with_grad:
            return vals
        grads = np.zeros((len(pts), len(exps), 2))
        sx, sy = self.box_scale[e]
        for j, (p, q) in enumerate(exps):
            if p > 0:
                grads[:, j, 0] = p * XP[p - 1] * YP[q] / sx
            if q > 0:
                grads[:, j, 1] = q * XP[p] * YP[q - 1] / sy
        return vals, grads

    def _build_local_bases(self):
        mesh = self.mesh
        self.coef = []          # monomial -> orthonormal transformation
        self.vol_points = []
        self.vol_weights = []
        self.vol_basis = []     # (nq, m)
        self.vol_grad = []      # (nq, m, 2)
        for e in range(mesh.n_elements):
            deg = int(self.degrees[e])
            pts, w = polygon_rule(mesh.sub_triangles[e], 2 * deg + 2)
            mono, mono_g = self._monomials(e, pts, with_grad=True)
            V = mono * np.sqrt(w)[:, None]
            _, R = np.linalg.qr(V)
            d = np.diag(R)
            if np.abs(d).min() < 1e-12 * max(np.abs(d).max(), 1e-300):
                raise SpaceConstructionError(
                    f"element {e}: Gram matrix numerically singular")
            R = R * np.sign(d)[:, None]   # fix signs for determinism
            coef = _inv_upper(R)
            self.coef.append(coef)
            self.vol_points.append(pts)
            self.vol_weights.append(w)
            self.vol_basis.append(mono @ coef)
            self.vol_grad.append(np.einsum("qmd,mj->qjd", mono_g, coef))

    def _build_face_caches(self):
        mesh = self.mesh
        I, B = mesh.interior, mesh.boundary
        self.iface_points, self.iface_weights = [], []
        self.iface_basis_plus, self.iface_grad_plus = [], []
        self.iface_basis_minus, self.iface_grad_minus = [], []
        for f in range(len(I)):
            kp, km = int(I.elem_plus[f]), int(I.elem_minus[f])
            deg = 2 * int(max(self.degrees[kp], self.degrees[km])) + 2
            p0, p1 = mesh.face_endpoints(int(I.vertex_a[f]), int(I.vertex_b[f]))
            pts, w = map_to_segment(segment_rule(deg), p0, p1)
            self.iface_points.append(pts)
            self.iface_weights.append(w)
            bp, gp = self.eval_basis(kp, pts, with_grad=True)
            bm, gm = self.eval_basis(km, pts, with_grad=True)
            self.iface_basis_plus.append(bp)
            self.iface_grad_plus.append(gp)
            self.iface_basis_minus.append(bm)
            self.iface_grad_minus.append(gm)
        self.bface_points, self.bface_weights = [], []
        self.bface_basis, self.bface_grad = [], []
        for f in range(len(B)):
            k = int(B.elem[f])
            deg = 2 * int(self.degrees[k]) + 2
            p0, p1 = mesh.face_endpoints(int(B.vertex_a[f]), int(B.vertex_b[f]))
            pts, w = map_to_segment(segment_rule(deg), p0, p1)
            self.bface_points.append(pts)
            self.bface_weights.append(w)
            b, g = self.eval_basis(k, pts, with_grad=True)
            self.bface_basis.append(b)
            self.bface_grad.append(g)

    # -- DOF maps ------------------------------------------------------------

    def scalar_dofs(self, e):
        return np.arange(self.offsets[e], self.offsets[e + 1])

    def vector_dofs(self, e):
        s, m = self.offsets[e], self.nloc[e]
        return np.arange(2 * s, 2 * s + 2 * m)

    # -- evaluation ----------------------------------------------------------

    def eval_basis(self, e, pts, with_grad=False):
        """Orthonormal basis (and gradients) of element ``e`` at ``pts``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if with_grad:
            mono, mono_g = self._monomials(e, pts, with_grad=True)
            return mono @ self.coef[e], np.einsum("qmd,mj->qjd", mono_g, self.coef[e])
        return self._monomials(e, pts) @ self.coef[e]

    def eval_scalar(self, dofs, e, pts):
        return self.eval_basis(e, pts) @ dofs[self.scalar_dofs(e)]

    def eval_scalar_grad(self, dofs, e, pts):
        _, g = self.eval_basis(e, pts, with_grad=True)
        return np.einsum("qjd,j->qd", g, dofs[self.scalar_dofs(e)])

    def eval_vector(self, dofs, e, pts):
        b = self.eval_basis(e, pts)
        m = self.nloc[e]
        loc = dofs[self.vector_dofs(e)]
        return np.column_stack([b @ loc[:m], b @ loc[m:]])

    def eval_vector_grad(self, dofs, e, pts):
        """Jacobian du_i/dx_j as an (npts, 2, 2) array with indices [i, j]."""
        _, g = self.eval_basis(e, pts, with_grad=True)
        m = self.nloc[e]
        loc = dofs[self.vector_dofs(e)]
        J = np.empty((len(g), 2, 2))
        J[:, 0, :] = np.einsum("qjd,j->qd", g, loc[:m])
        J[:, 1, :] = np.einsum("qjd,j->qd", g, loc[m:])
        return J

    def eval_divergence(self, dofs, e, pts):
        J = self.eval_vector_grad(dofs, e, pts)
        return J[:, 0, 0] + J[:, 1, 1]

    def eval_symgrad(self, dofs, e, pts):
        J = self.eval_vector_grad(dofs, e, pts)
        return 0.5 * (J + np.swapaxes(J, 1, 2))

    # -- projections and integrals --------------------------------------------

    def project_scalar(self, fn):
        """L2 projection of ``fn(points) -> (n,)`` onto the scalar space."""
        out = np.zeros(self.n_scalar)
        for e in range(self.mesh.n_elements):
            w, b = self.vol_weights[e], self.vol_basis[e]
            out[self.scalar_dofs(e)] = (w * fn(self.vol_points[e])) @ b
        return out

    def project_vector(self, fn):
        """L2 projection of ``fn(points) -> (n, 2)`` onto the vector space."""
        out = np.zeros(self.n_vector)
        for e in range(self.mesh.n_elements):
            w, b = self.vol_weights[e], self.vol_basis[e]
            vals = np.asarray(fn(self.vol_points[e]))
            m = self.nloc[e]
            dofs = self.vector_dofs(e)
            out[dofs[:m]] = (w * vals[:, 0]) @ b
            out[dofs[m:]] = (w * vals[:, 1]) @ b
        return out

    def integrate_element(self, e, fn):
        """Integral of ``fn(points)`` over element ``e`` with the cached rule."""
        return float(np.dot(self.vol_weights[e], fn(self.vol_points[e])))

    def integrate(self, fn):
        return sum(self.integrate_element(e, fn) for e in range(self.mesh.n_elements))

    def element_rule(self, e, degree):
        """Fresh quadrature of given exactness on element ``e`` (not cached)."""
        return polygon_rule(self.mesh.sub_triangles[e], degree)


def eval_broken(space, dofs, point, element, kind="value"):
    """Point evaluation of a broken field restricted to one element.

    ``kind`` selects value / gradient / divergence / symgrad; vector kinds
    expect a vector DOF layout.  Points outside the element are rejected.
    """
    from .mesh import _point_in_polygon

    p = np.asarray(point, dtype=float)
    poly = space.mesh.vertices[space.mesh.elements[element]]
    if not _point_in_polygon(p, poly):
        raise AssemblyError(f"point {point} is outside element {element}")
    pts = p.reshape(1, 2)
    if kind == "value":
        return space.eval_scalar(dofs, element, pts)[0]
    if kind == "gradient":
        return space.eval_scalar_grad(dofs, element, pts)[0]
    if kind == "vector":
        return space.eval_vector(dofs, element, pts)[0]
    if kind == "divergence":
        return space.eval_divergence(dofs, element, pts)[0]
    if kind == "symgrad":
        return space.eval_symgrad(dofs, element, pts)[0]
    raise ValueError(f"unknown evaluation kind {kind!r}")


def _inv_upper(R):
    from scipy.linalg import solve_triangular

    return solve_triangular(R, np.eye(len(R)), lower=False)
