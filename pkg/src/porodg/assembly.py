"""Sparse assembly of the semi-discrete operators and right-hand sides.

Volume terms are element-block products of cached basis/gradient tables;
face terms couple the two neighbouring element blocks through jumps and
coefficient-weighted averages.  Everything accumulates into coordinate
triplets in a fixed element/face order and compresses to CSR, so repeated
assembly of the same problem is bit-identical.

Right-hand sides exploit that every supported source and boundary datum is
time-separable: each spatial profile is projected (or lifted) once and the
per-step vector is a small linear combination of cached vectors.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryConditions:
    """Boundary condition kind per tag for each unknown.

    ``u`` and ``phi`` map tag -> {"dirichlet", "neumann"}; tags not listed
    fall back to the per-unknown default.  Neumann faces simply drop every
    face term of that unknown (natural, homogeneous-data treatment).
    """

    u: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)
    default_u: str = DIRICHLET
    default_phi: str = DIRICHLET

    def __post_init__(self):
        for mapping in (self.u, self.phi):
            for tag, kind in mapping.items():
                if kind not in (DIRICHLET, NEUMANN):
                    raise ConfigError(f"unknown boundary condition {kind!r} "
                                      f"for tag {tag!r}")
        if self.default_u not in (DIRICHLET, NEUMANN) \
                or self.default_phi not in (DIRICHLET, NEUMANN):
            raise ConfigError("boundary condition defaults must be "
                              "'dirichlet' or 'neumann'")

    def u_dirichlet_mask(self, mesh):
        return np.array([self.u.get(t, self.default_u) == DIRICHLET
                         for t in mesh.boundary.tag], dtype=bool)

    def phi_dirichlet_mask(self, mesh):
        return np.array([self.phi.get(t, self.default_phi) == DIRICHLET
                         for t in mesh.boundary.tag], dtype=bool)


class _Triplets:
    """COO accumulation buffer with deterministic insertion order."""

    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, block):
        r, c = np.meshgrid(rows, cols, indexing="ij")
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(np.asarray(block, dtype=float).ravel())

    def tocsr(self, shape):
        if not self.rows:
            return sp.csr_matrix(shape)
        mat = sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=shape)
        return mat.tocsr()


def _wdot(w, A, B):
    """(A^T diag(w) B) for (nq, m) tables."""
    return A.T @ (w[:, None] * B)


def _strain_normal_table(G, n):
    """E[q, j, c, d] = (eps(phi_j e_c) n)_d from a gradient table."""
    Gx, Gy = G[:, :, 0], G[:, :, 1]
    nx, ny = n
    E = np.empty(G.shape[:2] + (2, 2))
    E[:, :, 0, 0] = Gx * nx + 0.5 * Gy * ny
    E[:, :, 0, 1] = 0.5 * Gy * nx
    E[:, :, 1, 0] = 0.5 * Gx * ny
    E[:, :, 1, 1] = 0.5 * Gx * nx + Gy * ny
    return E


# -- mass matrices -------------------------------------------------------------

def assemble_mass(space, weight, vector=False):
    """Element-wise weighted L2 mass matrix (block diagonal, SPD for w > 0)."""
    weight = np.broadcast_to(np.asarray(weight, dtype=float),
                             (space.mesh.n_elements,))
    buf = _Triplets()
    for e in range(space.mesh.n_elements):
        B, w = space.vol_basis[e], space.vol_weights[e]
        Me = weight[e] * _wdot(w, B, B)
        if vector:
            dofs = space.vector_dofs(e)
            m = space.nloc[e]
            buf.add(dofs[:m], dofs[:m], Me)
            buf.add(dofs[m:], dofs[m:], Me)
        else:
            dofs = space.scalar_dofs(e)
            buf.add(dofs, dofs, Me)
    n = space.n_vector if vector else space.n_scalar
    return buf.tocsr((n, n))


# -- vector-field stiffness forms ----------------------------------------------

def _elasticity_volume(space, coeff, buf):
    for e in range(space.mesh.n_elements):
        G, w = space.vol_grad[e], space.vol_weights[e]
        Gx, Gy = G[:, :, 0], G[:, :, 1]
        c = coeff[e]
        K11 = 2.0 * c * _wdot(w, Gx, Gx) + c * _wdot(w, Gy, Gy)
        K22 = 2.0 * c * _wdot(w, Gy, Gy) + c * _wdot(w, Gx, Gx)
        K12 = c * _wdot(w, Gy, Gx)
        dofs = space.vector_dofs(e)
        m = space.nloc[e]
        buf.add(dofs[:m], dofs[:m], K11)
        buf.add(dofs[m:], dofs[m:], K22)
        buf.add(dofs[:m], dofs[m:], K12)
        buf.add(dofs[m:], dofs[:m], K12.T)


def _div_volume(space, coeff, buf):
    for e in range(space.mesh.n_elements):
        G, w = space.vol_grad[e], space.vol_weights[e]
        dofs = space.vector_dofs(e)
        m = space.nloc[e]
        for c in range(2):
            for d in range(2):
                blk = coeff[e] * _wdot(w, G[:, :, c], G[:, :, d])
                buf.add(dofs[c * m:(c + 1) * m], dofs[d * m:(d + 1) * m], blk)


def _vector_face_block(buf, dofs, signs, B, E, G, w, n, omega, coeff, sigma, xi,
                       with_elasticity, with_div):
    """Interior/boundary face contributions of the elasticity and div forms.

    ``dofs``/``signs``/``B``/``E``/``G``/``omega``/``coeff`` are per-side
    sequences (two sides interior, one side boundary); E is the strain-normal
    table w.r.t. the plus normal ``n``.
    """
    nsides = len(dofs)
    for a in range(nsides):        # test side
        for b in range(nsides):    # trial side
            sa, sb = signs[a], signs[b]
            mass = _wdot(w, B[a], B[b])
            ma, mb = B[a].shape[1], B[b].shape[1]
            blk = np.zeros((2 * ma, 2 * mb))
            if with_elasticity:
                pen = sigma * sa * sb * mass
                blk[:ma, :mb] += pen
                blk[ma:, mb:] += pen
                cons = np.einsum("q,qi,qjcd->dicj", w, B[a], E[b],
                                 optimize=True) * (sa * omega[b] * coeff[b][0])
                adj = np.einsum("q,qj,qidc->dicj", w, B[b], E[a],
                                optimize=True) * (sb * omega[a] * coeff[a][0])
                blk -= (cons + adj).reshape(2 * ma, 2 * mb)
            if with_div:
                nn = np.outer(n, n)
                for c in range(2):
                    for d in range(2):
                        blk[c * ma:(c + 1) * ma, d * mb:(d + 1) * mb] += \
                            xi * sa * sb * nn[c, d] * mass
                cons = np.einsum("q,qi,qjc->icj", w, B[a], G[b][:, :, :2],
                                 optimize=True) * (sa * omega[b] * coeff[b][1])
                cons = np.einsum("d,icj->dicj", n, cons)
                adj = np.einsum("q,qj,qid->jdi", w, B[b], G[a][:, :, :2],
                                optimize=True) * (sb * omega[a] * coeff[a][1])
                adj = np.einsum("c,jdi->dicj", n, adj)
                blk -= (cons + adj).reshape(2 * ma, 2 * mb)
            buf.add(dofs[a], dofs[b], blk)


def _assemble_vector_form(space, coeffs, penalties, weights, bc,
                          with_elasticity, with_div, viscous):
    """Shared driver for the four vector-field stiffness operators."""
    mesh = space.mesh
    buf = _Triplets()
    if viscous:
        ce = 2.0 * coeffs.mu * coeffs.delta1
        cd = coeffs.lam * coeffs.delta2
        wkey_e, wkey_d = "mu_delta1", "lam_delta2"
        pkey_e, pkey_d = "sigma_d1", "xi_d2"
    else:
        ce = 2.0 * coeffs.mu
        cd = coeffs.lam
        wkey_e, wkey_d = "mu", "lam"
        pkey_e, pkey_d = "sigma", "xi"

    if with_elasticity:
        _elasticity_volume(space, 0.5 * ce, buf)   # volume carries 2*mu directly
    if with_div:
        _div_volume(space, cd, buf)

    I = mesh.interior
    for f in range(len(I)):
        kp, km = int(I.elem_plus[f]), int(I.elem_minus[f])
        n = I.normal[f]
        w = space.iface_weights[f]
        Bp, Bm = space.iface_basis_plus[f], space.iface_basis_minus[f]
        Gp, Gm = space.iface_grad_plus[f], space.iface_grad_minus[f]
        _vector_face_block(
            buf,
            dofs=(space.vector_dofs(kp), space.vector_dofs(km)),
            signs=(1.0, -1.0),
            B=(Bp, Bm),
            E=(_strain_normal_table(Gp, n), _strain_normal_table(Gm, n)),
            G=(Gp, Gm),
            w=w, n=n,
            omega=(weights.omega_plus[wkey_e][f] if with_elasticity
                   else weights.omega_plus[wkey_d][f],
                   weights.omega_minus[wkey_e][f] if with_elasticity
                   else weights.omega_minus[wkey_d][f]),
            coeff=((ce[kp], cd[kp]), (ce[km], cd[km])),
            sigma=penalties.interior[pkey_e][f],
            xi=penalties.interior[pkey_d][f],
            with_elasticity=with_elasticity,
            with_div=with_div,
        )

    B = mesh.boundary
    dir_mask = bc.u_dirichlet_mask(mesh)
    for f in range(len(B)):
        if not dir_mask[f]:
            continue
        k = int(B.elem[f])
        n = B.normal[f]
        w = space.bface_weights[f]
        Bb, Gb = space.bface_basis[f], space.bface_grad[f]
        _vector_face_block(
            buf,
            dofs=(space.vector_dofs(k),),
            signs=(1.0,),
            B=(Bb,),
            E=(_strain_normal_table(Gb, n),),
            G=(Gb,),
            w=w, n=n,
            omega=(1.0,),
            coeff=((ce[k], cd[k]),),
            sigma=penalties.boundary[pkey_e][f],
            xi=penalties.boundary[pkey_d][f],
            with_elasticity=with_elasticity,
            with_div=with_div,
        )
    return buf.tocsr((space.n_vector, space.n_vector))


def assemble_elasticity(space, coeffs, penalties, weights, bc, viscous=False):
    """Strain form: (2 mu eps(u), eps(v)) with its WSIP face terms.

    ``viscous=True`` assembles the Kelvin-Voigt variant with coefficient
    2 mu delta1, weights omega_{mu delta1} and penalty sigma_{delta1}.
    """
    return _assemble_vector_form(space, coeffs, penalties, weights, bc,
                                 with_elasticity=True, with_div=False,
                                 viscous=viscous)


def assemble_div(space, coeffs, penalties, weights, bc, viscous=False):
    """Divergence form: (lambda div u, div v) with its WSIP face terms."""
    return _assemble_vector_form(space, coeffs, penalties, weights, bc,
                                 with_elasticity=False, with_div=True,
                                 viscous=viscous)


# -- scalar diffusion ------------------------------------------------------------

def assemble_diffusion(space, coeffs, penalties, weights, bc):
    """Diffusion form: (D grad phi, grad psi) with weighted face terms."""
    mesh = space.mesh
    buf = _Triplets()
    for e in range(mesh.n_elements):
        G, w = space.vol_grad[e], space.vol_weights[e]
        blk = np.einsum("qid,de,qje,q->ij", G, coeffs.D[e], G, w, optimize=True)
        dofs = space.scalar_dofs(e)
        buf.add(dofs, dofs, blk)

    I = mesh.interior
    for f in range(len(I)):
        kp, km = int(I.elem_plus[f]), int(I.elem_minus[f])
        n = I.normal[f]
        w = space.iface_weights[f]
        Bp, Bm = space.iface_basis_plus[f], space.iface_basis_minus[f]
        Dn = (space.iface_grad_plus[f] @ (coeffs.D[kp] @ n),
              space.iface_grad_minus[f] @ (coeffs.D[km] @ n))
        dofs = (space.scalar_dofs(kp), space.scalar_dofs(km))
        signs = (1.0, -1.0)
        Bs = (Bp, Bm)
        om = (weights.omega_plus["dnn"][f], weights.omega_minus["dnn"][f])
        zeta = penalties.interior["zeta"][f]
        for a in range(2):
            for b in range(2):
                blk = zeta * signs[a] * signs[b] * _wdot(w, Bs[a], Bs[b])
                blk -= signs[a] * om[b] * _wdot(w, Bs[a], Dn[b])
                blk -= signs[b] * om[a] * _wdot(w, Dn[a], Bs[b])
                buf.add(dofs[a], dofs[b], blk)

    B = mesh.boundary
    dir_mask = bc.phi_dirichlet_mask(mesh)
    for f in range(len(B)):
        if not dir_mask[f]:
            continue
        k = int(B.elem[f])
        w = space.bface_weights[f]
        Bb = space.bface_basis[f]
        Dn = space.bface_grad[f] @ (coeffs.D[k] @ B.normal[f])
        dofs = space.scalar_dofs(k)
        blk = penalties.boundary["zeta"][f] * _wdot(w, Bb, Bb)
        blk -= _wdot(w, Bb, Dn)
        blk -= _wdot(w, Dn, Bb)
        buf.add(dofs, dofs, blk)
    return buf.tocsr((space.n_scalar, space.n_scalar))


# -- pressure/displacement coupling ----------------------------------------------

def assemble_coupling(space, coeffs, bc, scale=None):
    """Coupling form (gamma div u, psi) - sum_F int {psi} [[gamma u]]_n.

    Returns the (n_scalar x n_vector) matrix; ``scale`` multiplies gamma
    element-wise (used with tau2 for the inertial coupling block).
    """
    mesh = space.mesh
    g = coeffs.gamma * (scale if scale is not None else 1.0)
    buf = _Triplets()
    for e in range(mesh.n_elements):
        B, G, w = space.vol_basis[e], space.vol_grad[e], space.vol_weights[e]
        sd = space.scalar_dofs(e)
        vd = space.vector_dofs(e)
        m = space.nloc[e]
        for c in range(2):
            buf.add(sd, vd[c * m:(c + 1) * m], g[e] * _wdot(w, B, G[:, :, c]))

    I = mesh.interior
    for f in range(len(I)):
        kp, km = int(I.elem_plus[f]), int(I.elem_minus[f])
        n = I.normal[f]
        w = space.iface_weights[f]
        Bs = (space.iface_basis_plus[f], space.iface_basis_minus[f])
        sdofs = (space.scalar_dofs(kp), space.scalar_dofs(km))
        vdofs = (space.vector_dofs(kp), space.vector_dofs(km))
        ms = (space.nloc[kp], space.nloc[km])
        signs = (1.0, -1.0)
        gs = (g[kp], g[km])
        for a in range(2):          # test (scalar, arithmetic average)
            for b in range(2):      # trial (vector, normal jump)
                mass = _wdot(w, Bs[a], Bs[b])
                for c in range(2):
                    blk = -0.5 * signs[b] * gs[b] * n[c] * mass
                    buf.add(sdofs[a], vdofs[b][c * ms[b]:(c + 1) * ms[b]], blk)

    B = mesh.boundary
    dir_mask = bc.u_dirichlet_mask(mesh)
    for f in range(len(B)):
        if not dir_mask[f]:
            continue
        k = int(B.elem[f])
        n = B.normal[f]
        w = space.bface_weights[f]
        Bb = space.bface_basis[f]
        sd = space.scalar_dofs(k)
        vd = space.vector_dofs(k)
        m = space.nloc[k]
        mass = _wdot(w, Bb, Bb)
        for c in range(2):
            buf.add(sd, vd[c * m:(c + 1) * m], -g[k] * n[c] * mass)
    return buf.tocsr((space.n_scalar, space.n_vector))


# -- monolithic operator bundle ---------------------------------------------------

@dataclass(frozen=True)
class BlockOperators:
    """All sparse operators of the coupled semi-discrete system."""

    M_u: sp.csr_matrix          # rho-weighted vector mass
    M_phi_tau1: sp.csr_matrix   # d0 tau1 scalar mass
    M_phi: sp.csr_matrix        # d0 scalar mass
    A_e: sp.csr_matrix
    A_e_d1: sp.csr_matrix
    A_div: sp.csr_matrix
    A_div_d2: sp.csr_matrix
    A_phi: sp.csr_matrix
    C: sp.csr_matrix            # (n_scalar, n_vector)
    C_tau2: sp.csr_matrix
    n_u: int
    n_phi: int

    @property
    def A_u(self):
        return self.A_e + self.A_div

    @property
    def A_u_delta(self):
        return self.A_e_d1 + self.A_div_d2


def assemble_operators(space, coeffs, penalties, weights, bc):
    """Assemble every block operator of the coupled system."""
    return BlockOperators(
        M_u=assemble_mass(space, coeffs.rho, vector=True),
        M_phi_tau1=assemble_mass(space, coeffs.d0 * coeffs.tau1),
        M_phi=assemble_mass(space, coeffs.d0),
        A_e=assemble_elasticity(space, coeffs, penalties, weights, bc),
        A_e_d1=assemble_elasticity(space, coeffs, penalties, weights, bc,
                                   viscous=True),
        A_div=assemble_div(space, coeffs, penalties, weights, bc),
        A_div_d2=assemble_div(space, coeffs, penalties, weights, bc,
                              viscous=True),
        A_phi=assemble_diffusion(space, coeffs, penalties, weights, bc),
        C=assemble_coupling(space, coeffs, bc),
        C_tau2=assemble_coupling(space, coeffs, bc, scale=coeffs.tau2),
        n_u=space.n_vector,
        n_phi=space.n_scalar,
    )


def dg_norm_matrices(space, coeffs, penalties, bc, viscous=False):
    """Volume + penalty quadratic forms of the broken energy norms.

    Returns ``(N_u, N_phi)`` with ``x^T N x`` equal to the squared dG norm
    (no consistency terms).  ``viscous=True`` switches the displacement norm
    to the delta-weighted variant.
    """
    mesh = space.mesh
    if viscous:
        ce, cd = 2.0 * coeffs.mu * coeffs.delta1, coeffs.lam * coeffs.delta2
        pk_e, pk_d = "sigma_d1", "xi_d2"
    else:
        ce, cd = 2.0 * coeffs.mu, coeffs.lam
        pk_e, pk_d = "sigma", "xi"
    buf_u = _Triplets()
    _elasticity_volume(space, 0.5 * ce, buf_u)
    _div_volume(space, cd, buf_u)

    buf_phi = _Triplets()
    for e in range(mesh.n_elements):
        G, w = space.vol_grad[e], space.vol_weights[e]
        blk = np.einsum("qid,de,qje,q->ij", G, coeffs.D[e], G, w, optimize=True)
        buf_phi.add(space.scalar_dofs(e), space.scalar_dofs(e), blk)

    I = mesh.interior
    for f in range(len(I)):
        kp, km = int(I.elem_plus[f]), int(I.elem_minus[f])
        n = I.normal[f]
        w = space.iface_weights[f]
        Bs = (space.iface_basis_plus[f], space.iface_basis_minus[f])
        vdofs = (space.vector_dofs(kp), space.vector_dofs(km))
        sdofs = (space.scalar_dofs(kp), space.scalar_dofs(km))
        ms = (space.nloc[kp], space.nloc[km])
        signs = (1.0, -1.0)
        sig = penalties.interior[pk_e][f]
        xi = penalties.interior[pk_d][f]
        zeta = penalties.interior["zeta"][f]
        nn = np.outer(n, n)
        for a in range(2):
            for b in range(2):
                mass = _wdot(w, Bs[a], Bs[b]) * (signs[a] * signs[b])
                blk = np.zeros((2 * ms[a], 2 * ms[b]))
                blk[:ms[a], :ms[b]] += sig * mass
                blk[ms[a]:, ms[b]:] += sig * mass
                for c in range(2):
                    for d in range(2):
                        blk[c * ms[a]:(c + 1) * ms[a], d * ms[b]:(d + 1) * ms[b]] \
                            += xi * nn[c, d] * mass
                buf_u.add(vdofs[a], vdofs[b], blk)
                buf_phi.add(sdofs[a], sdofs[b], zeta * mass)

    B = mesh.boundary
    u_mask = bc.u_dirichlet_mask(mesh)
    p_mask = bc.phi_dirichlet_mask(mesh)
    for f in range(len(B)):
        k = int(B.elem[f])
        n = B.normal[f]
        w = space.bface_weights[f]
        Bb = space.bface_basis[f]
        mass = _wdot(w, Bb, Bb)
        m = space.nloc[k]
        if u_mask[f]:
            vd = space.vector_dofs(k)
            blk = np.zeros((2 * m, 2 * m))
            sig = penalties.boundary[pk_e][f]
            xi = penalties.boundary[pk_d][f]
            blk[:m, :m] += sig * mass
            blk[m:, m:] += sig * mass
            nn = np.outer(n, n)
            for c in range(2):
                for d in range(2):
                    blk[c * m:(c + 1) * m, d * m:(d + 1) * m] += xi * nn[c, d] * mass
            buf_u.add(vd, vd, blk)
        if p_mask[f]:
            sd = space.scalar_dofs(k)
            buf_phi.add(sd, sd, penalties.boundary["zeta"][f] * mass)
    return (buf_u.tocsr((space.n_vector, space.n_vector)),
            buf_phi.tocsr((space.n_scalar, space.n_scalar)))


# -- right-hand sides ---------------------------------------------------------------

@dataclass
class DirichletData:
    """Time-separable Dirichlet data for the two unknowns.

    ``u_parts`` is a list of (TimeFactor, spatial) with spatial mapping
    (n, 2) points to (n, 2) displacement data; ``phi_parts`` analogous with
    scalar values.  Data applies on every Dirichlet-tagged face of the
    respective unknown.
    """

    u_parts: list = field(default_factory=list)
    phi_parts: list = field(default_factory=list)


class RhsAssembler:
    """Caches source projections and boundary liftings; evaluates F(t), G(t).

    The momentum load combines volume sources with the symmetric-Nitsche
    lifting of the displacement data through the four displacement forms;
    the generalized-pressure load adds the diffusion lifting and the
    coupling boundary terms, which see the first and second time derivative
    of the displacement data.
    """

    def __init__(self, space, coeffs, penalties, bc, sources=None,
                 dirichlet=None):
        self.space = space
        self.n_u = space.n_vector
        self.n_phi = space.n_scalar
        self._f_parts = []    # (TimeFactor, vector)
        self._g_parts = []    # (TimeFactor, vector)
        sources = sources if sources is not None else _empty_sources()
        for part in sources.parts:
            if part.f_spatial is not None:
                self._f_parts.append(
                    (part.temporal.value, space.project_vector(part.f_spatial)))
            if part.g_spatial is not None:
                self._g_parts.append(
                    (part.temporal.value, space.project_scalar(part.g_spatial)))
        if dirichlet is not None:
            self._add_liftings(coeffs, penalties, bc, dirichlet)

    def _add_liftings(self, coeffs, penalties, bc, dirichlet):
        space = self.space
        mesh = space.mesh
        B = mesh.boundary
        u_mask = bc.u_dirichlet_mask(mesh)
        p_mask = bc.phi_dirichlet_mask(mesh)
        for temporal, spatial in dirichlet.u_parts:
            L0 = np.zeros(self.n_u)     # elastic + div liftings, value(t)
            L1 = np.zeros(self.n_u)     # viscous counterparts, d1(t)
            G0 = np.zeros(self.n_phi)   # coupling lifting, d1(t)
            G1 = np.zeros(self.n_phi)   # inertial coupling lifting, d2(t)
            for f in range(len(B)):
                if not u_mask[f]:
                    continue
                k = int(B.elem[f])
                n = B.normal[f]
                w = space.bface_weights[f]
                Bb, Gb = space.bface_basis[f], space.bface_grad[f]
                E = _strain_normal_table(Gb, n)
                g = np.atleast_2d(np.asarray(spatial(space.bface_points[f]),
                                             dtype=float))
                gn = g @ n
                m = space.nloc[k]
                vd = space.vector_dofs(k)
                sd = space.scalar_dofs(k)
                for ce, cd, sig, xi, out in (
                        (2.0 * coeffs.mu[k], coeffs.lam[k],
                         penalties.boundary["sigma"][f],
                         penalties.boundary["xi"][f], L0),
                        (2.0 * coeffs.mu[k] * coeffs.delta1[k],
                         coeffs.lam[k] * coeffs.delta2[k],
                         penalties.boundary["sigma_d1"][f],
                         penalties.boundary["xi_d2"][f], L1)):
                    for c in range(2):
                        rows = vd[c * m:(c + 1) * m]
                        out[rows] += sig * ((w * g[:, c]) @ Bb)
                        out[rows] -= ce * np.einsum(
                            "q,qid,qd->i", w, E[:, :, c, :], g, optimize=True)
                        out[rows] += xi * n[c] * ((w * gn) @ Bb)
                        out[rows] -= cd * ((w * gn) @ Gb[:, :, c])
                G0[sd] -= coeffs.gamma[k] * ((w * gn) @ Bb)
                G1[sd] -= coeffs.gamma[k] * coeffs.tau2[k] * ((w * gn) @ Bb)
            self._f_parts.append((_derived(temporal, 0), L0))
            self._f_parts.append((_derived(temporal, 1), L1))
            self._g_parts.append((_derived(temporal, 1), G0))
            self._g_parts.append((_derived(temporal, 2), G1))
        for temporal, spatial in dirichlet.phi_parts:
            Lp = np.zeros(self.n_phi)
            for f in range(len(B)):
                if not p_mask[f]:
                    continue
                k = int(B.elem[f])
                w = space.bface_weights[f]
                Bb = space.bface_basis[f]
                Dn = space.bface_grad[f] @ (coeffs.D[k] @ B.normal[f])
                gp = np.asarray(spatial(space.bface_points[f]), dtype=float)
                sd = space.scalar_dofs(k)
                Lp[sd] += penalties.boundary["zeta"][f] * ((w * gp) @ Bb)
                Lp[sd] -= (w * gp) @ Dn
            self._g_parts.append((_derived(temporal, 0), Lp))

    def forcing_u(self, t):
        out = np.zeros(self.n_u)
        for temporal, vec in self._f_parts:
            out += temporal(t) * vec
        return out

    def forcing_phi(self, t):
        out = np.zeros(self.n_phi)
        for temporal, vec in self._g_parts:
            out += temporal(t) * vec
        return out

    def forcing(self, t):
        return np.concatenate([self.forcing_u(t), self.forcing_phi(t)])


def _derived(temporal, order):
    return (temporal.value, temporal.d1, temporal.d2)[order]


def _empty_sources():
    from .models import SourceSet

    return SourceSet()


def assemble_rhs(space, coeffs, penalties, bc, sources, dirichlet, t):
    """One-shot (F(t), G(t)); see :class:`RhsAssembler` for the cached form."""
    rhs = RhsAssembler(space, coeffs, penalties, bc, sources, dirichlet)
    return rhs.forcing_u(t), rhs.forcing_phi(t)
