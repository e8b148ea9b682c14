"""Independent reference implementations used to cross-check the solver.

Everything here is deliberately written the slow, literal way: Duffy-mapped
tensor Gauss rules instead of collapsed Jacobi rules, Green's-theorem edge
integrals for polygon monomials, and dense operator assembly that loops
over global basis-function pairs and evaluates each bilinear form exactly
as written.
"""

import numpy as np


# -- independent quadrature ----------------------------------------------------

def duffy_triangle_rule(n):
    """Tensor Gauss-Legendre rule pushed through the Duffy map.

    (a, b) in [0,1]^2 -> (x, y) = (a, b(1-a)) with Jacobian (1-a); exact for
    total degree 2n - 2 on the reference triangle.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    A, B = np.meshgrid(x, x, indexing="ij")
    WA, WB = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel()])
    wts = (WA * WB * (1.0 - A)).ravel()
    return pts, wts


def polygon_quad(mesh, e, n=8):
    """Quadrature over element ``e`` built on its fan with the Duffy rule."""
    ref_pts, ref_w = duffy_triangle_rule(n)
    pts, wts = [], []
    for tri in mesh.sub_triangles[e]:
        v0, e1, e2 = tri[0], tri[1] - tri[0], tri[2] - tri[0]
        jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
        pts.append(v0 + np.outer(ref_pts[:, 0], e1) + np.outer(ref_pts[:, 1], e2))
        wts.append(ref_w * jac)
    return np.vstack(pts), np.concatenate(wts)


def segment_gauss(p0, p1, n=8):
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    pts = np.asarray(p0) + np.outer(t, np.asarray(p1) - np.asarray(p0))
    return pts, 0.5 * w * np.linalg.norm(np.asarray(p1) - np.asarray(p0))


def greens_monomial_integral(vertices, p, q):
    """Exact integral of x^p y^q over a polygon via the divergence theorem.

    Uses int_K x^p y^q dA = 1/(p+1) * sum_edges int x^{p+1} y^q n_x ds with
    exact 1D Gauss integration along each straight edge.
    """
    vertices = np.asarray(vertices, dtype=float)
    total = 0.0
    npt = (p + q + 4) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npt)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    for i in range(len(vertices)):
        a, b = vertices[i], vertices[(i + 1) % len(vertices)]
        edge = b - a
        length = np.hypot(*edge)
        if length == 0.0:
            continue
        normal_x = edge[1] / length
        pts = a + np.outer(t, edge)
        total += np.dot(w, pts[:, 0] ** (p + 1) * pts[:, 1] ** q) \
            * length * normal_x / (p + 1)
    return total


# -- dense operator oracles -------------------------------------------------------

def _vector_basis(space, e, pts):
    """Per local vector dof: (value (nq,2), symgrad (nq,2,2), div (nq,))."""
    b, g = space.eval_basis(e, pts, with_grad=True)
    m = space.nloc[e]
    out = []
    for c in range(2):
        for j in range(m):
            val = np.zeros((len(pts), 2))
            val[:, c] = b[:, j]
            grad = np.zeros((len(pts), 2, 2))
            grad[:, c, :] = g[:, j, :]
            eps = 0.5 * (grad + np.swapaxes(grad, 1, 2))
            div = grad[:, 0, 0] + grad[:, 1, 1]
            out.append((val, eps, div))
    return out


def _scalar_basis(space, e, pts):
    b, g = space.eval_basis(e, pts, with_grad=True)
    return [(b[:, j], g[:, j, :]) for j in range(space.nloc[e])]


def _face_sides(mesh, f):
    I = mesh.interior
    kp, km = int(I.elem_plus[f]), int(I.elem_minus[f])
    p0, p1 = mesh.face_endpoints(int(I.vertex_a[f]), int(I.vertex_b[f]))
    return kp, km, p0, p1, I.normal[f]


def _omega(cp, cm):
    s = cp + cm
    if s <= 0.0:
        return 0.5, 0.5
    return cm / s, cp / s


def dense_mass(space, weight, vector=False):
    n = space.n_vector if vector else space.n_scalar
    M = np.zeros((n, n))
    for e in range(space.mesh.n_elements):
        pts, w = polygon_quad(space.mesh, e)
        if vector:
            basis = _vector_basis(space, e, pts)
            dofs = space.vector_dofs(e)
            for i, (vi, _, _) in enumerate(basis):
                for j, (vj, _, _) in enumerate(basis):
                    M[dofs[i], dofs[j]] += weight[e] * np.dot(
                        w, (vi * vj).sum(axis=1))
        else:
            basis = _scalar_basis(space, e, pts)
            dofs = space.scalar_dofs(e)
            for i, (bi, _) in enumerate(basis):
                for j, (bj, _) in enumerate(basis):
                    M[dofs[i], dofs[j]] += weight[e] * np.dot(w, bi * bj)
    return M


def dense_elasticity(space, coeffs, penalties, bc, viscous=False, nq=8):
    """Literal evaluation of the strain form plus its face terms."""
    mesh = space.mesh
    ce = 2.0 * coeffs.mu * (coeffs.delta1 if viscous else 1.0)
    pkey = "sigma_d1" if viscous else "sigma"
    n = space.n_vector
    A = np.zeros((n, n))
    for e in range(mesh.n_elements):
        pts, w = polygon_quad(mesh, e, nq)
        basis = _vector_basis(space, e, pts)
        dofs = space.vector_dofs(e)
        for i, (_, ei, _) in enumerate(basis):
            for j, (_, ej, _) in enumerate(basis):
                A[dofs[i], dofs[j]] += ce[e] * np.dot(
                    w, (ei * ej).sum(axis=(1, 2)))

    for f in range(len(mesh.interior)):
        kp, km, p0, p1, nrm = _face_sides(mesh, f)
        pts, w = segment_gauss(p0, p1, nq)
        bp = _vector_basis(space, kp, pts)
        bm = _vector_basis(space, km, pts)
        wp, wm = _omega(ce[kp], ce[km])
        sigma = penalties.interior[pkey][f]
        entries = [(space.vector_dofs(kp)[i], v, e_, +1.0, wp, ce[kp])
                   for i, (v, e_, _) in enumerate(bp)]
        entries += [(space.vector_dofs(km)[i], v, e_, -1.0, wm, ce[km])
                    for i, (v, e_, _) in enumerate(bm)]
        for gi, vi, ei, si, wi, ci in entries:
            jump_i = si * np.einsum("qa,b->qab", vi, nrm)
            flux_i = wi * ci * ei
            for gj, vj, ej, sj, wj, cj in entries:
                jump_j = sj * np.einsum("qa,b->qab", vj, nrm)
                flux_j = wj * cj * ej
                val = sigma * np.dot(w, (jump_i * jump_j).sum(axis=(1, 2)))
                avg_i_dot_jump_j = np.einsum("qab,qab->q", flux_i, jump_j)
                avg_j_dot_jump_i = np.einsum("qab,qab->q", flux_j, jump_i)
                val -= np.dot(w, avg_i_dot_jump_j + avg_j_dot_jump_i)
                A[gi, gj] += val

    u_mask = bc.u_dirichlet_mask(mesh)
    B = mesh.boundary
    for f in range(len(B)):
        if not u_mask[f]:
            continue
        k = int(B.elem[f])
        p0, p1 = mesh.face_endpoints(int(B.vertex_a[f]), int(B.vertex_b[f]))
        pts, w = segment_gauss(p0, p1, nq)
        nrm = B.normal[f]
        basis = _vector_basis(space, k, pts)
        dofs = space.vector_dofs(k)
        sigma = penalties.boundary[pkey][f]
        for i, (vi, ei, _) in enumerate(basis):
            jump_i = np.einsum("qa,b->qab", vi, nrm)
            for j, (vj, ej, _) in enumerate(basis):
                jump_j = np.einsum("qa,b->qab", vj, nrm)
                val = sigma * np.dot(w, (jump_i * jump_j).sum(axis=(1, 2)))
                val -= ce[k] * np.dot(w, np.einsum("qab,qab->q", ei, jump_j))
                val -= ce[k] * np.dot(w, np.einsum("qab,qab->q", ej, jump_i))
                A[dofs[i], dofs[j]] += val
    return A


def dense_div(space, coeffs, penalties, bc, viscous=False, nq=8):
    mesh = space.mesh
    cd = coeffs.lam * (coeffs.delta2 if viscous else 1.0)
    pkey = "xi_d2" if viscous else "xi"
    n = space.n_vector
    A = np.zeros((n, n))
    for e in range(mesh.n_elements):
        pts, w = polygon_quad(mesh, e, nq)
        basis = _vector_basis(space, e, pts)
        dofs = space.vector_dofs(e)
        for i, (_, _, di) in enumerate(basis):
            for j, (_, _, dj) in enumerate(basis):
                A[dofs[i], dofs[j]] += cd[e] * np.dot(w, di * dj)

    for f in range(len(mesh.interior)):
        kp, km, p0, p1, nrm = _face_sides(mesh, f)
        pts, w = segment_gauss(p0, p1, nq)
        wp, wm = _omega(cd[kp], cd[km])
        xi = penalties.interior[pkey][f]
        entries = [(space.vector_dofs(kp)[i], v, d, +1.0, wp, cd[kp])
                   for i, (v, _, d) in enumerate(_vector_basis(space, kp, pts))]
        entries += [(space.vector_dofs(km)[i], v, d, -1.0, wm, cd[km])
                    for i, (v, _, d) in enumerate(_vector_basis(space, km, pts))]
        for gi, vi, di, si, wi, ci in entries:
            jn_i = si * (vi @ nrm)
            for gj, vj, dj, sj, wj, cj in entries:
                jn_j = sj * (vj @ nrm)
                val = xi * np.dot(w, jn_i * jn_j)
                val -= np.dot(w, (wj * cj * dj) * jn_i + (wi * ci * di) * jn_j)
                A[gi, gj] += val

    u_mask = bc.u_dirichlet_mask(mesh)
    B = mesh.boundary
    for f in range(len(B)):
        if not u_mask[f]:
            continue
        k = int(B.elem[f])
        p0, p1 = mesh.face_endpoints(int(B.vertex_a[f]), int(B.vertex_b[f]))
        pts, w = segment_gauss(p0, p1, nq)
        nrm = B.normal[f]
        basis = _vector_basis(space, k, pts)
        dofs = space.vector_dofs(k)
        xi = penalties.boundary[pkey][f]
        for i, (vi, _, di) in enumerate(basis):
            jn_i = vi @ nrm
            for j, (vj, _, dj) in enumerate(basis):
                jn_j = vj @ nrm
                val = xi * np.dot(w, jn_i * jn_j)
                val -= cd[k] * np.dot(w, dj * jn_i + di * jn_j)
                A[dofs[i], dofs[j]] += val
    return A


def dense_diffusion(space, coeffs, penalties, bc, nq=8):
    mesh = space.mesh
    n = space.n_scalar
    A = np.zeros((n, n))
    for e in range(mesh.n_elements):
        pts, w = polygon_quad(mesh, e, nq)
        basis = _scalar_basis(space, e, pts)
        dofs = space.scalar_dofs(e)
        for i, (_, gi) in enumerate(basis):
            for j, (_, gj) in enumerate(basis):
                A[dofs[i], dofs[j]] += np.dot(
                    w, np.einsum("qa,ab,qb->q", gi, coeffs.D[e], gj))

    for f in range(len(mesh.interior)):
        kp, km, p0, p1, nrm = _face_sides(mesh, f)
        pts, w = segment_gauss(p0, p1, nq)
        eta_p = float(nrm @ coeffs.D[kp] @ nrm)
        eta_m = float(nrm @ coeffs.D[km] @ nrm)
        wp, wm = _omega(eta_p, eta_m)
        zeta = penalties.interior["zeta"][f]
        entries = [(space.scalar_dofs(kp)[i], b, g, +1.0, wp, coeffs.D[kp])
                   for i, (b, g) in enumerate(_scalar_basis(space, kp, pts))]
        entries += [(space.scalar_dofs(km)[i], b, g, -1.0, wm, coeffs.D[km])
                    for i, (b, g) in enumerate(_scalar_basis(space, km, pts))]
        for gi_, bi, gradi, si, wi, Di in entries:
            flux_i = wi * (gradi @ Di.T @ nrm)
            for gj_, bj, gradj, sj, wj, Dj in entries:
                flux_j = wj * (gradj @ Dj.T @ nrm)
                val = zeta * np.dot(w, si * bi * sj * bj)
                val -= np.dot(w, flux_i * sj * bj + flux_j * si * bi)
                A[gi_, gj_] += val

    p_mask = bc.phi_dirichlet_mask(mesh)
    B = mesh.boundary
    for f in range(len(B)):
        if not p_mask[f]:
            continue
        k = int(B.elem[f])
        p0, p1 = mesh.face_endpoints(int(B.vertex_a[f]), int(B.vertex_b[f]))
        pts, w = segment_gauss(p0, p1, nq)
        nrm = B.normal[f]
        basis = _scalar_basis(space, k, pts)
        dofs = space.scalar_dofs(k)
        zeta = penalties.boundary["zeta"][f]
        for i, (bi, gi) in enumerate(basis):
            flux_i = gi @ coeffs.D[k].T @ nrm
            for j, (bj, gj) in enumerate(basis):
                flux_j = gj @ coeffs.D[k].T @ nrm
                val = zeta * np.dot(w, bi * bj)
                val -= np.dot(w, flux_i * bj + flux_j * bi)
                A[dofs[i], dofs[j]] += val
    return A


def dense_coupling(space, coeffs, bc, scale=None, nq=8):
    mesh = space.mesh
    g = coeffs.gamma * (scale if scale is not None else 1.0)
    C = np.zeros((space.n_scalar, space.n_vector))
    for e in range(mesh.n_elements):
        pts, w = polygon_quad(mesh, e, nq)
        sbasis = _scalar_basis(space, e, pts)
        vbasis = _vector_basis(space, e, pts)
        sdofs = space.scalar_dofs(e)
        vdofs = space.vector_dofs(e)
        for i, (bi, _) in enumerate(sbasis):
            for j, (_, _, dj) in enumerate(vbasis):
                C[sdofs[i], vdofs[j]] += g[e] * np.dot(w, bi * dj)

    for f in range(len(mesh.interior)):
        kp, km, p0, p1, nrm = _face_sides(mesh, f)
        pts, w = segment_gauss(p0, p1, nq)
        s_entries = [(space.scalar_dofs(kp)[i], b)
                     for i, (b, _) in enumerate(_scalar_basis(space, kp, pts))]
        s_entries += [(space.scalar_dofs(km)[i], b)
                      for i, (b, _) in enumerate(_scalar_basis(space, km, pts))]
        v_entries = [(space.vector_dofs(kp)[j], v, +1.0, g[kp])
                     for j, (v, _, _) in enumerate(_vector_basis(space, kp, pts))]
        v_entries += [(space.vector_dofs(km)[j], v, -1.0, g[km])
                      for j, (v, _, _) in enumerate(_vector_basis(space, km, pts))]
        for gi_, bi in s_entries:
            for gj_, vj, sj, gj_coef in v_entries:
                jn_j = sj * gj_coef * (vj @ nrm)
                C[gi_, gj_] -= np.dot(w, 0.5 * bi * jn_j)

    u_mask = bc.u_dirichlet_mask(mesh)
    B = mesh.boundary
    for f in range(len(B)):
        if not u_mask[f]:
            continue
        k = int(B.elem[f])
        p0, p1 = mesh.face_endpoints(int(B.vertex_a[f]), int(B.vertex_b[f]))
        pts, w = segment_gauss(p0, p1, nq)
        nrm = B.normal[f]
        sbasis = _scalar_basis(space, k, pts)
        vbasis = _vector_basis(space, k, pts)
        sdofs = space.scalar_dofs(k)
        vdofs = space.vector_dofs(k)
        for i, (bi, _) in enumerate(sbasis):
            for j, (vj, _, _) in enumerate(vbasis):
                C[sdofs[i], vdofs[j]] -= g[k] * np.dot(w, bi * (vj @ nrm))
    return C
