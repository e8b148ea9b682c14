"""Manufactured solutions, error norms, convergence sweeps, energy diagnostics.

Forcing terms and boundary data of the manufactured cases are derived
symbolically from the exact solutions by substituting them into the strong
two-field system, so every coefficient combination (including the
degenerate robustness regimes) gets consistent data automatically.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .assembly import assemble_mass, dg_norm_matrices
from .errors import ConfigError
from .mesh import generate_voronoi
from .models import CoefficientField, SourcePart, SourceSet, TimeFactor, preset
from .problem import setup_problem
from .timestepping import IntegratorConfig, LinearSolver, run_transient

_X, _Y, _T = sp.symbols("x y t")


def _lambdify_point_fn(exprs, shape):
    """Vectorized evaluator (n,2) points -> array of given trailing shape."""
    flat = [sp.lambdify((_X, _Y), e, "numpy") for e in np.ravel(exprs)]

    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cols = [np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float),
                                (len(pts),)).astype(float)
                for f in flat]
        out = np.stack(cols, axis=-1)
        return out.reshape((len(pts),) + shape)

    return fn


@dataclass
class ManufacturedCase:
    """Exact solution bundle: forcing, boundary data, and field evaluators."""

    name: str
    coeff_values: dict
    sources: SourceSet
    dirichlet: object
    _u_spatial: object = field(repr=False, default=None)
    _phi_spatial: object = field(repr=False, default=None)
    _eps_spatial: object = field(repr=False, default=None)
    _div_spatial: object = field(repr=False, default=None)
    _gradphi_spatial: object = field(repr=False, default=None)
    _t_u: TimeFactor = field(repr=False, default=None)
    _t_phi: TimeFactor = field(repr=False, default=None)

    def build_coeffs(self, n_elements):
        return preset("unified", n_elements, **self.coeff_values)

    def _tu(self, t, deriv):
        return (self._t_u.value, self._t_u.d1, self._t_u.d2)[deriv](t)

    def _tphi(self, t, deriv):
        return (self._t_phi.value, self._t_phi.d1, self._t_phi.d2)[deriv](t)

    def u(self, pts, t, deriv=0):
        return self._tu(t, deriv) * self._u_spatial(pts)

    def phi(self, pts, t, deriv=0):
        return self._tphi(t, deriv) * self._phi_spatial(pts)

    def eps_u(self, pts, t):
        return self._tu(t, 0) * self._eps_spatial(pts)

    def div_u(self, pts, t):
        return self._tu(t, 0) * self._div_spatial(pts)

    def grad_phi(self, pts, t):
        return self._tphi(t, 0) * self._gradphi_spatial(pts)


def _build_case(name, u_exprs, phi_expr, t_u_expr, t_phi_expr, values):
    """Derive forcing and data for exact (u, phi) = (T_u(t) U(x), T_phi(t) P(x)).

    The momentum forcing is
    f = rho u'' - div(2 mu eps(u) + 2 mu d1 eps(u')) - grad(lam div u
        + lam d2 div u') + grad(gamma phi)
    and the pressure forcing is
    g = d0 (phi' + tau1 phi'') + gamma (div u' + tau2 div u'')
        - div(D grad phi),
    each exactly time-separable because the system is linear with constant
    coefficients.
    """
    rho, mu, lam = values["rho"], values["mu"], values["lam"]
    d1, d2, gam = values["delta1"], values["delta2"], values["gamma"]
    d0, tau1, tau2 = values["d0"], values["tau1"], values["tau2"]
    D = np.asarray(values["D"], dtype=float)
    if D.ndim == 0:
        D = float(D) * np.eye(2)

    U = sp.Matrix(u_exprs)
    P = sp.sympify(phi_expr)
    eps = sp.Matrix([
        [sp.diff(U[0], _X), (sp.diff(U[0], _Y) + sp.diff(U[1], _X)) / 2],
        [(sp.diff(U[0], _Y) + sp.diff(U[1], _X)) / 2, sp.diff(U[1], _Y)],
    ])
    divU = sp.diff(U[0], _X) + sp.diff(U[1], _Y)
    gradP = sp.Matrix([sp.diff(P, _X), sp.diff(P, _Y)])

    def div_tensor(S):
        return sp.Matrix([sp.diff(S[0, 0], _X) + sp.diff(S[0, 1], _Y),
                          sp.diff(S[1, 0], _X) + sp.diff(S[1, 1], _Y)])

    L_el = div_tensor(2 * mu * eps) + lam * sp.Matrix(
        [sp.diff(divU, _X), sp.diff(divU, _Y)])
    L_vis = div_tensor(2 * mu * d1 * eps) + lam * d2 * sp.Matrix(
        [sp.diff(divU, _X), sp.diff(divU, _Y)])
    grad_gamma_P = gam * gradP
    DgradP = sp.Matrix(D.tolist()) * gradP
    div_D_gradP = sp.diff(DgradP[0], _X) + sp.diff(DgradP[1], _Y)

    t_u = TimeFactor.from_sympy(t_u_expr, _T)
    t_phi = TimeFactor.from_sympy(t_phi_expr, _T)
    tf = TimeFactor.from_sympy  # shorthand

    def vec(exprs):
        return _lambdify_point_fn(list(exprs), (2,))

    def scal(expr):
        return _lambdify_point_fn([expr], ())

    parts = [
        SourcePart(TimeFactor(t_u.d2), f_spatial=vec(rho * U)),
        SourcePart(TimeFactor(t_u.value), f_spatial=vec(-L_el)),
        SourcePart(TimeFactor(t_u.d1), f_spatial=vec(-L_vis)),
        SourcePart(TimeFactor(t_phi.value), f_spatial=vec(grad_gamma_P)),
        SourcePart(TimeFactor(t_phi.d1), g_spatial=scal(d0 * P)),
        SourcePart(TimeFactor(t_phi.d2), g_spatial=scal(d0 * tau1 * P)),
        SourcePart(TimeFactor(t_u.d1), g_spatial=scal(gam * divU)),
        SourcePart(TimeFactor(t_u.d2), g_spatial=scal(gam * tau2 * divU)),
        SourcePart(TimeFactor(t_phi.value), g_spatial=scal(-div_D_gradP)),
    ]
    from .assembly import DirichletData

    dirichlet = DirichletData(
        u_parts=[(t_u, vec(U))],
        phi_parts=[(t_phi, scal(P))],
    )
    return ManufacturedCase(
        name=name,
        coeff_values=values,
        sources=SourceSet(parts),
        dirichlet=dirichlet,
        _u_spatial=vec(U),
        _phi_spatial=scal(P),
        _eps_spatial=_lambdify_point_fn(list(eps), (2, 2)),
        _div_spatial=scal(divU),
        _gradphi_spatial=vec(gradP),
        _t_u=t_u,
        _t_phi=t_phi,
    )


#: Coefficient set of the convergence experiments: everything 1, D = I.
CONVERGENCE_COEFFS = {
    "rho": 1.0, "mu": 1.0, "lam": 1.0, "delta1": 1.0, "delta2": 1.0,
    "gamma": 1.0, "d0": 1.0, "D": 1.0, "tau1": 1.0, "tau2": 1.0,
}


def manufactured_case(name, coeff_overrides=None, nu_u=1.0, nu_phi=1.0):
    """Named manufactured solutions used by the verification experiments.

    - ``trig``: smooth trigonometric fields (space convergence tests),
    - ``linear``: fields linear in space (time-integrator tests; exactly
      representable at any degree >= 1),
    - ``scaled``: the trig fields scaled by ``nu_u`` and ``nu_phi``.
    """
    values = dict(CONVERGENCE_COEFFS)
    if coeff_overrides:
        unknown = set(coeff_overrides) - set(values)
        if unknown:
            raise ConfigError(f"unknown coefficients {sorted(unknown)}")
        values.update(coeff_overrides)
    trig_u = [_X ** 2 * sp.sin(sp.pi * _X) * sp.sin(sp.pi * _Y),
              -_X ** 2 * sp.sin(sp.pi * _X) * sp.sin(sp.pi * _Y)]
    trig_phi = _X ** 2 * sp.cos(sp.pi * _X / 2) * sp.sin(sp.pi * _X)
    t_u = sp.sin(2 * sp.pi * _T)
    t_phi = sp.sin(sp.sqrt(2) * sp.pi * _T)
    if name == "trig":
        return _build_case(name, trig_u, trig_phi, t_u, t_phi, values)
    if name == "linear":
        return _build_case(name, [_X + _Y, 3 * _X - 5 * _Y], 10 * _X + 6 * _Y,
                           t_u, t_phi, values)
    if name == "scaled":
        return _build_case(name, [nu_u * e for e in trig_u], nu_phi * trig_phi,
                           t_u, t_phi, values)
    raise ConfigError(f"unknown manufactured case {name!r}")


# -- error norms ----------------------------------------------------------------

def compute_errors(space, U, Phi, case, t, coeffs, penalties, bc):
    """L2 and broken-energy errors of (U, Phi) against the exact solution.

    Volume terms use an overkill rule (exactness 2l + 4); face terms use the
    cached face rules.  The displacement energy norm combines the
    2mu-weighted strain, the lambda-weighted divergence and the sigma/xi
    penalty jumps; the pressure norm combines the D-weighted gradient and
    the zeta jumps.  Faces where the corresponding unknown has a Neumann
    condition carry no jump terms.
    """
    mesh = space.mesh
    eu_l2 = eu_dg = ep_l2 = ep_dg = 0.0
    for e in range(mesh.n_elements):
        pts, w = space.element_rule(e, 2 * int(space.degrees[e]) + 4)
        b, g = space.eval_basis(e, pts, with_grad=True)
        m = space.nloc[e]
        vd, sd = space.vector_dofs(e), space.scalar_dofs(e)
        uh = np.column_stack([b @ U[vd[:m]], b @ U[vd[m:]]])
        du = uh - case.u(pts, t)
        eu_l2 += np.dot(w, (du ** 2).sum(axis=1))
        Jx = np.einsum("qjd,j->qd", g, U[vd[:m]])
        Jy = np.einsum("qjd,j->qd", g, U[vd[m:]])
        eps_h = np.empty((len(pts), 2, 2))
        eps_h[:, 0, 0] = Jx[:, 0]
        eps_h[:, 1, 1] = Jy[:, 1]
        eps_h[:, 0, 1] = eps_h[:, 1, 0] = 0.5 * (Jx[:, 1] + Jy[:, 0])
        deps = eps_h - case.eps_u(pts, t)
        ddiv = (Jx[:, 0] + Jy[:, 1]) - case.div_u(pts, t)
        eu_dg += 2.0 * coeffs.mu[e] * np.dot(w, (deps ** 2).sum(axis=(1, 2)))
        eu_dg += coeffs.lam[e] * np.dot(w, ddiv ** 2)
        ph = b @ Phi[sd]
        dphi = ph - case.phi(pts, t)
        ep_l2 += np.dot(w, dphi ** 2)
        dgrad = np.einsum("qjd,j->qd", g, Phi[sd]) - case.grad_phi(pts, t)
        ep_dg += np.dot(w, np.einsum("qd,de,qe->q", dgrad, coeffs.D[e], dgrad))

    I = mesh.interior
    for f in range(len(I)):
        kp, km = int(I.elem_plus[f]), int(I.elem_minus[f])
        n = I.normal[f]
        w = space.iface_weights[f]
        Bp, Bm = space.iface_basis_plus[f], space.iface_basis_minus[f]
        mp, mm = space.nloc[kp], space.nloc[km]
        vp, vm = space.vector_dofs(kp), space.vector_dofs(km)
        up = np.column_stack([Bp @ U[vp[:mp]], Bp @ U[vp[mp:]]])
        um = np.column_stack([Bm @ U[vm[:mm]], Bm @ U[vm[mm:]]])
        dj = up - um                      # exact solution is continuous
        eu_dg += penalties.interior["sigma"][f] * np.dot(w, (dj ** 2).sum(axis=1))
        eu_dg += penalties.interior["xi"][f] * np.dot(w, (dj @ n) ** 2)
        pp = Bp @ Phi[space.scalar_dofs(kp)]
        pm = Bm @ Phi[space.scalar_dofs(km)]
        ep_dg += penalties.interior["zeta"][f] * np.dot(w, (pp - pm) ** 2)

    B = mesh.boundary
    u_mask = bc.u_dirichlet_mask(mesh)
    p_mask = bc.phi_dirichlet_mask(mesh)
    for f in range(len(B)):
        k = int(B.elem[f])
        n = B.normal[f]
        w = space.bface_weights[f]
        Bb = space.bface_basis[f]
        pts = space.bface_points[f]
        m = space.nloc[k]
        if u_mask[f]:
            vd = space.vector_dofs(k)
            ub = np.column_stack([Bb @ U[vd[:m]], Bb @ U[vd[m:]]])
            du = ub - case.u(pts, t)
            eu_dg += penalties.boundary["sigma"][f] * np.dot(w, (du ** 2).sum(axis=1))
            eu_dg += penalties.boundary["xi"][f] * np.dot(w, (du @ n) ** 2)
        if p_mask[f]:
            dphi = Bb @ Phi[space.scalar_dofs(k)] - case.phi(pts, t)
            ep_dg += penalties.boundary["zeta"][f] * np.dot(w, dphi ** 2)
    return {
        "eu_l2": math.sqrt(eu_l2),
        "eu_dg": math.sqrt(eu_dg),
        "ephi_l2": math.sqrt(ep_l2),
        "ephi_dg": math.sqrt(ep_dg),
    }


def broken_norms(space, U, Phi, coeffs, penalties, bc):
    """dG norms of a discrete state (quadrature path, no operator matrices)."""
    zero = _ZeroCase()
    err = compute_errors(space, U, Phi, zero, 0.0, coeffs, penalties, bc)
    return err["eu_dg"], err["ephi_dg"], err["eu_l2"], err["ephi_l2"]


class _ZeroCase:
    def u(self, pts, t, deriv=0):
        return np.zeros((len(np.atleast_2d(pts)), 2))

    def phi(self, pts, t, deriv=0):
        return np.zeros(len(np.atleast_2d(pts)))

    def eps_u(self, pts, t):
        return np.zeros((len(np.atleast_2d(pts)), 2, 2))

    def div_u(self, pts, t):
        return np.zeros(len(np.atleast_2d(pts)))

    def grad_phi(self, pts, t):
        return np.zeros((len(np.atleast_2d(pts)), 2))


# -- transient driver for a manufactured configuration ----------------------------

def run_manufactured(mesh, degree, case, dt, t_final, scheme="auto",
                     observers=(), alpha=None):
    """Integrate one manufactured configuration and return (problem, state)."""
    from .dg_forms import DEFAULT_ALPHA

    coeffs = case.build_coeffs(mesh.n_elements)
    problem = setup_problem(mesh, degree, coeffs, sources=case.sources,
                            dirichlet=case.dirichlet,
                            alpha=alpha or DEFAULT_ALPHA)
    space = problem.space
    U0 = space.project_vector(lambda p: case.u(p, 0.0))
    Z0 = space.project_vector(lambda p: case.u(p, 0.0, deriv=1))
    Phi0 = space.project_scalar(lambda p: case.phi(p, 0.0))
    dPhi0 = space.project_scalar(lambda p: case.phi(p, 0.0, deriv=1))
    cfg = IntegratorConfig(dt=dt, t_final=t_final, scheme=scheme)
    state = run_transient(problem.ops, problem.rhs, cfg, U0, Z0, Phi0, dPhi0,
                          observers=observers)
    return problem, state


def errors_of_run(problem, state, case):
    return compute_errors(problem.space, state.U, state.Phi, case, state.t,
                          problem.coeffs, problem.penalties, problem.bc)


# -- convergence machinery ---------------------------------------------------------

@dataclass
class ErrorReport:
    """Errors per refinement level plus pairwise convergence rates."""

    kind: str                # h | p | dt | nu
    levels: np.ndarray       # 1/h, degree, dt, or nu values
    eu_l2: np.ndarray
    eu_dg: np.ndarray
    ephi_l2: np.ndarray
    ephi_dg: np.ndarray

    _COLUMNS = ("eu_l2", "eu_dg", "ephi_l2", "ephi_dg")

    def rates(self, column):
        """log(e_i / e_{i+1}) / log(h_i / h_{i+1}) between consecutive levels."""
        e = getattr(self, column)
        if self.kind == "h":
            h = 1.0 / self.levels
        elif self.kind == "dt":
            h = self.levels
        else:
            raise ConfigError(f"pairwise rates are not defined for {self.kind!r}")
        return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])

    def fit_rate(self, column):
        """Least-squares slope of log(e) against log(h) over all levels."""
        e = getattr(self, column)
        h = 1.0 / self.levels if self.kind == "h" else self.levels
        return float(np.polyfit(np.log(h), np.log(e), 1)[0])

    def loglinear_slope(self, column):
        """Slope of log(e) against the (linear) level axis (degree sweeps)."""
        return float(np.polyfit(self.levels, np.log(getattr(self, column)), 1)[0])

    def to_csv(self, path):
        header = {"h": "1/h", "p": "degree", "dt": "dt", "nu": "nu_phi"}[self.kind]
        cols = [f"{c}{suffix}" for c in self._COLUMNS for suffix in ("", "_rate")]
        lines = [",".join([header] + cols)]
        can_rate = self.kind in ("h", "dt")
        rates = {c: self.rates(c) if can_rate else None for c in self._COLUMNS}
        for i, lev in enumerate(self.levels):
            row = [f"{lev:.17g}"]
            for c in self._COLUMNS:
                row.append(f"{getattr(self, c)[i]:.17g}")
                if i == 0 or rates[c] is None:
                    row.append("")
                else:
                    row.append(f"{rates[c][i - 1]:.6g}")
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


#: Seeds giving a clean h_max progression for each element count (pinned so
#: convergence studies are reproducible across runs and machines).
MESH_SEQUENCE_SEEDS = {100: 3, 200: 1, 400: 1, 800: 1, 1600: 1}


def voronoi_sequence(sizes, domain=(0.0, 0.0, 1.0, 1.0), lloyd=50, seeds=None):
    """Deterministic family of unit-square Voronoi meshes for sweeps."""
    meshes = []
    for n in sizes:
        seed = (seeds or {}).get(n, MESH_SEQUENCE_SEEDS.get(n, 1))
        meshes.append(generate_voronoi(domain, n, lloyd_iters=lloyd, seed=seed))
    return meshes


def convergence_sweep(kind, case_name="trig", degree=3, sizes=(100, 200, 400),
                      degrees=(1, 2, 3, 4), dts=None, nus=None, dt=5e-5,
                      t_final=0.1, coeff_overrides=None, scheme="auto",
                      meshes=None, nu_u=1.0, nu_phi=1.0):
    """Run a refinement study and collect an :class:`ErrorReport`.

    ``kind`` selects the swept parameter: mesh size (``h``), polynomial
    degree (``p``), time step (``dt``) or pressure magnitude (``nu``).
    Every sweep needs at least three levels.
    """
    if kind == "h":
        meshes = meshes if meshes is not None else voronoi_sequence(sizes)
        levels_iter = meshes
    elif kind == "p":
        levels_iter = list(degrees)
    elif kind == "dt":
        levels_iter = list(dts if dts is not None else [1e-2 / 2 ** k
                                                        for k in range(4)])
    elif kind == "nu":
        levels_iter = list(nus if nus is not None
                           else [10.0 ** k for k in range(7)])
    else:
        raise ConfigError(f"unknown sweep kind {kind!r}")
    if len(levels_iter) < 3:
        raise ConfigError("a convergence sweep needs at least 3 levels")

    if kind != "nu":
        case = manufactured_case(case_name, coeff_overrides, nu_u=nu_u,
                                 nu_phi=nu_phi)
    base_mesh = None
    if kind in ("p", "dt", "nu"):
        base_mesh = meshes[0] if meshes else voronoi_sequence([100])[0]

    levels, rows = [], []
    for lev in levels_iter:
        if kind == "h":
            mesh, deg, dt_k = lev, degree, dt
        elif kind == "p":
            mesh, deg, dt_k = base_mesh, lev, dt
        elif kind == "dt":
            mesh, deg, dt_k = base_mesh, degree, lev
        else:
            case = manufactured_case("scaled", coeff_overrides, nu_u=nu_u,
                                     nu_phi=lev)
            mesh, deg, dt_k = base_mesh, degree, dt
        problem, state = run_manufactured(mesh, deg, case, dt_k, t_final,
                                          scheme=scheme)
        rows.append(errors_of_run(problem, state, case))
        if kind == "h":
            levels.append(1.0 / mesh.h_max)
        else:
            levels.append(lev)
    return ErrorReport(
        kind=kind,
        levels=np.asarray(levels, dtype=float),
        eu_l2=np.array([r["eu_l2"] for r in rows]),
        eu_dg=np.array([r["eu_dg"] for r in rows]),
        ephi_l2=np.array([r["ephi_l2"] for r in rows]),
        ephi_dg=np.array([r["ephi_dg"] for r in rows]),
    )


def convergence_rates(h, errors):
    """Observed orders between consecutive levels of e(h) ~ C h^p."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


# -- energy diagnostics -------------------------------------------------------------

class EnergyTrace:
    """Per-step energy observer.

    Records the squared norms of the stability diagnostics (kinetic term,
    displacement energy norms, relaxation-weighted pressure mass, pressure
    energy norm) plus a total discrete energy.  For spatially uniform
    tau1 = tau2 = tau the total is an exact Lyapunov function of the
    semi-discrete system,

        E = 1/2 (Z' M_u Z + U' (A_e + A_div) U + Phi' M_phi Phi)
            + tau/2 * q' A_phi^{-1} q,   q = M_phi dPhi/dt + C Z,

    which the trapezoidal-in-time schemes dissipate exactly under zero
    forcing; ``lyapunov_valid`` records whether that regime applies.
    """

    def __init__(self, problem):
        self.ops = problem.ops
        self.coeffs = problem.coeffs
        space, coeffs = problem.space, problem.coeffs
        self.N_u, self.N_phi = dg_norm_matrices(space, coeffs,
                                                problem.penalties, problem.bc)
        self.N_u_delta, _ = dg_norm_matrices(space, coeffs, problem.penalties,
                                             problem.bc, viscous=True)
        self.M_tau = assemble_mass(space, coeffs.tau1 * coeffs.tau2 * coeffs.d0)
        self.tau = coeffs.uniform_tau()
        self.lyapunov_valid = self.tau is not None
        self._aphi_solver = None
        self.rows = []

    def _chi_energy(self, state):
        if not self.tau or state.dPhi is None:
            return 0.0
        q = self.ops.M_phi @ state.dPhi + self.ops.C @ state.Z
        if self._aphi_solver is None:
            self._aphi_solver = LinearSolver(self.ops.A_phi)
        chi = self._aphi_solver.solve(q)
        return 0.5 * self.tau * float(chi @ q)

    def __call__(self, state):
        kin = float(state.Z @ (self.ops.M_u @ state.Z))
        u_dge = float(state.U @ (self.N_u @ state.U))
        u_dgd = float(state.U @ (self.N_u_delta @ state.U))
        phi_tau = float(state.Phi @ (self.M_tau @ state.Phi))
        phi_dg = float(state.Phi @ (self.N_phi @ state.Phi))
        if self.lyapunov_valid:
            total = 0.5 * (kin + float(state.U @ (self.ops.A_u @ state.U))
                           + float(state.Phi @ (self.ops.M_phi @ state.Phi)))
            total += self._chi_energy(state)
        else:
            total = kin + u_dge + u_dgd + phi_tau + phi_dg
        self.rows.append((state.t, kin, u_dge, u_dgd, phi_tau, phi_dg, total))

    @property
    def totals(self):
        return np.array([r[-1] for r in self.rows])

    def growth_flags(self, rel_tol=1e-8):
        """Steps where the total energy grew beyond the relative tolerance."""
        E = self.totals
        scale = max(E.max(initial=0.0), 1e-300)
        return np.nonzero(np.diff(E) > rel_tol * scale)[0] + 1

    def to_csv(self, path):
        header = "t,kinetic,u_dg_e,u_dg_delta,phi_tau_mass,phi_dg,total"
        lines = [header]
        for row in self.rows:
            lines.append(",".join(f"{v:.17g}" for v in row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


# -- post-processed flow fields ------------------------------------------------------

def filtration_field(space, Phi, coeffs):
    """Element means of the filtration velocity w = D grad(phi) and |w|."""
    mesh = space.mesh
    w_mean = np.empty((mesh.n_elements, 2))
    w_mag = np.empty(mesh.n_elements)
    for e in range(mesh.n_elements):
        w = space.vol_weights[e]
        grad = np.einsum("qjd,j->qd", space.vol_grad[e],
                         Phi[space.scalar_dofs(e)])
        flux = grad @ coeffs.D[e].T
        area = mesh.areas[e]
        w_mean[e] = (w[:, None] * flux).sum(axis=0) / area
        w_mag[e] = np.dot(w, np.linalg.norm(flux, axis=1)) / area
    return w_mean, w_mag


def _element_flux_norms(space, Phi, coeffs):
    out = np.empty(space.mesh.n_elements)
    for e in range(space.mesh.n_elements):
        w = space.vol_weights[e]
        grad = np.einsum("qjd,j->qd", space.vol_grad[e],
                         Phi[space.scalar_dofs(e)])
        flux = grad @ coeffs.D[e].T
        out[e] = np.dot(w, (flux ** 2).sum(axis=1))
    return out


def relative_flow_difference(space, coeffs_a, Phi_a, coeffs_b, Phi_b,
                             coeffs_ref, Phi_ref):
    """Per-element ||w_a - w_b||_K divided by the reference global flux norm."""
    mesh = space.mesh
    diff = np.empty(mesh.n_elements)
    for e in range(mesh.n_elements):
        w = space.vol_weights[e]
        ga = np.einsum("qjd,j->qd", space.vol_grad[e],
                       Phi_a[space.scalar_dofs(e)]) @ coeffs_a.D[e].T
        gb = np.einsum("qjd,j->qd", space.vol_grad[e],
                       Phi_b[space.scalar_dofs(e)]) @ coeffs_b.D[e].T
        diff[e] = math.sqrt(np.dot(w, ((ga - gb) ** 2).sum(axis=1)))
    ref = math.sqrt(_element_flux_norms(space, Phi_ref, coeffs_ref).sum())
    if ref == 0.0:
        warnings.warn("reference filtration norm is zero; "
                      "relative difference undefined")
        return np.full(mesh.n_elements, np.nan)
    return diff / ref


# -- semi-discrete residual (manufactured-solution consistency oracle) ----------------

def semidiscrete_residual(problem, case, t):
    """Residual of the projected exact solution in the semi-discrete system.

    Returns the Euclidean norms of the momentum and pressure residual rows;
    both decay under mesh refinement when forcing, lifting and operators
    are mutually consistent.
    """
    space, ops, rhs = problem.space, problem.ops, problem.rhs
    pu = [space.project_vector(lambda p: case.u(p, t, deriv=k)) for k in range(3)]
    pp = [space.project_scalar(lambda p: case.phi(p, t, deriv=k)) for k in range(3)]
    r_u = ops.M_u @ pu[2] + ops.A_u_delta @ pu[1] + ops.A_u @ pu[0] \
        - ops.C.T @ pp[0] - rhs.forcing_u(t)
    r_phi = ops.M_phi_tau1 @ pp[2] + ops.C_tau2 @ pu[2] + ops.M_phi @ pp[1] \
        + ops.C @ pu[1] + ops.A_phi @ pp[0] - rhs.forcing_phi(t)
    return float(np.linalg.norm(r_u)), float(np.linalg.norm(r_phi))
