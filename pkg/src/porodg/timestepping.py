"""Implicit time integration of the monolithic algebraic system.

Two schemes cover the two characters of the generalized-pressure equation:

- ``NewmarkIntegrator`` advances A X'' + B X' + C X = F(t) when both
  equations are second order in time (tau1 > 0).  One sparse solve per step
  with the constant matrix A + gamma dt B + beta dt^2 C, factorized once.
- ``NewmarkThetaIntegrator`` couples the same Newmark update for the
  displacement with a theta-method for the (parabolic, tau1 = 0) pressure
  equation.  Only the (U, Phi) block pair is solved; velocity and
  acceleration follow from the closing update formulas.

Both default to beta = 1/4, gamma = 1/2, theta = 1/2: unconditionally
stable and second-order accurate.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, SolverError

_RESIDUAL_TOL = 1e-10
_MAX_REFINE = 2


class LinearSolver:
    """Sparse direct solve with cached factorization and residual guarantee.

    The relative residual ||Ax - b|| / ||b|| is checked on every solve and
    polished by iterative refinement if needed; failure to reach 1e-10
    raises :class:`SolverError`.  With ``cache=False`` the matrix is
    re-factorized on every call (used to validate factorization reuse).
    """

    def __init__(self, matrix, cache=True):
        self.matrix = sp.csc_matrix(matrix)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise SolverError("matrix must be square")
        self.cache = cache
        self._lu = None

    def _factor(self):
        try:
            return splu(self.matrix)
        except RuntimeError as err:
            raise SolverError(f"sparse factorization failed: {err}") from None

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.cache:
            if self._lu is None:
                self._lu = self._factor()
            lu = self._lu
        else:
            lu = self._factor()
        x = lu.solve(b)
        if not np.isfinite(x).all():
            raise SolverError("linear solve produced non-finite values")
        norm_b = np.linalg.norm(b)
        if norm_b == 0.0:
            return np.zeros_like(b)
        for _ in range(_MAX_REFINE):
            r = b - self.matrix @ x
            if np.linalg.norm(r) <= _RESIDUAL_TOL * norm_b:
                return x
            x = x + lu.solve(r)
        r = b - self.matrix @ x
        if np.linalg.norm(r) <= _RESIDUAL_TOL * norm_b:
            return x
        raise SolverError(
            "linear solve residual "
            f"{np.linalg.norm(r) / norm_b:.3e} exceeds {_RESIDUAL_TOL:.0e}")


def solve_linear(matrix, b):
    """One-shot sparse solve with the :class:`LinearSolver` residual contract."""
    return LinearSolver(matrix).solve(b)


@dataclass
class IntegratorConfig:
    """Time grid and scheme parameters."""

    dt: float
    t_final: float
    beta: float = 0.25
    gamma: float = 0.5
    theta: float = 0.5
    scheme: str = "auto"   # auto | newmark | newmark-theta
    cache_factorization: bool = True

    def validate(self):
        if self.dt <= 0.0 or self.t_final <= 0.0:
            raise ConfigError("time step and final time must be positive")
        if not (0.0 <= 2.0 * self.beta <= 1.0):
            raise ConfigError("Newmark beta must satisfy 0 <= 2 beta <= 1")
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError("Newmark gamma must lie in [0, 1]")
        if not (0.0 <= self.theta <= 1.0):
            raise ConfigError("theta must lie in [0, 1]")
        if self.scheme not in ("auto", "newmark", "newmark-theta"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        return self

    @property
    def n_steps(self):
        n = int(round(self.t_final / self.dt))
        if abs(n * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ConfigError("t_final must be an integer multiple of dt")
        return n


@dataclass
class State:
    """Solution snapshot handed to observers (read-only by convention)."""

    t: float
    U: np.ndarray
    Z: np.ndarray            # dU/dt
    A: np.ndarray            # d2U/dt2
    Phi: np.ndarray
    dPhi: np.ndarray = None  # dPhi/dt, tracked only by the Newmark scheme
    ddPhi: np.ndarray = None


class NewmarkIntegrator:
    """Newmark-beta update for A X'' + B X' + C X = F(t).

    The acceleration ``L = X''`` is the implicit unknown of every step; the
    initial acceleration is computed consistently from the system at t = 0.
    """

    def __init__(self, A, B, C, rhs, cfg):
        self.A = sp.csr_matrix(A)
        self.B = sp.csr_matrix(B)
        self.C = sp.csr_matrix(C)
        self.rhs = rhs
        self.cfg = cfg
        dt, beta, gamma = cfg.dt, cfg.beta, cfg.gamma
        step_matrix = self.A + gamma * dt * self.B + beta * dt * dt * self.C
        self._step_solver = LinearSolver(step_matrix,
                                         cache=cfg.cache_factorization)
        self._init_solver = LinearSolver(self.A)
        self.t = 0.0
        self.X = None
        self.Y = None
        self.L = None

    def initialize(self, X0, Y0, t0=0.0):
        self.t = float(t0)
        self.X = np.asarray(X0, dtype=float).copy()
        self.Y = np.asarray(Y0, dtype=float).copy()
        b = self.rhs(self.t) - self.B @ self.Y - self.C @ self.X
        self.L = self._init_solver.solve(b)
        return self

    def step(self):
        dt, beta, gamma = self.cfg.dt, self.cfg.beta, self.cfg.gamma
        t_next = self.t + dt
        Xp = self.X + dt * self.Y + dt * dt * (0.5 - beta) * self.L
        Yp = self.Y + dt * (1.0 - gamma) * self.L
        b = self.rhs(t_next) - self.B @ Yp - self.C @ Xp
        L_next = self._step_solver.solve(b)
        self.X = Xp + beta * dt * dt * L_next
        self.Y = Yp + gamma * dt * L_next
        self.L = L_next
        self.t = t_next
        return self


class NewmarkThetaIntegrator:
    """Coupled Newmark-beta / theta-method stepper for the tau1 = 0 case.

    Solves the reduced 2x2 block system for (U, Phi) only, then closes the
    step with the velocity/acceleration update formulas.  ``n_u = 0``
    degenerates to a plain theta-method for the pressure equation (used by
    the scalar parabolic regression tests).
    """

    def __init__(self, M_u, M_phi, A_u, A_u_delta, A_phi, C, C_tau2,
                 rhs_u, rhs_phi, cfg):
        self.cfg = cfg
        dt, beta, gamma, theta = cfg.dt, cfg.beta, cfg.gamma, cfg.theta
        self.n_u = 0 if M_u is None else M_u.shape[0]
        self.n_phi = M_phi.shape[0]
        self.rhs_u = rhs_u
        self.rhs_phi = rhs_phi
        M_phi = sp.csr_matrix(M_phi)
        A_phi = sp.csr_matrix(A_phi)

        if self.n_u:
            M_u = sp.csr_matrix(M_u)
            A_u = sp.csr_matrix(A_u)
            A_ud = sp.csr_matrix(A_u_delta)
            C = sp.csr_matrix(C)
            C_t2 = sp.csr_matrix(C_tau2)
            a0 = 1.0 / (beta * dt * dt)
            a1 = gamma / (beta * dt)
            self._A_u, self._A_ud, self._C, self._C_t2 = A_u, A_ud, C, C_t2
            self._M_u = M_u
            self._R_uu = a0 * M_u + a1 * A_ud
            self._R_uz = (1.0 / (beta * dt)) * M_u - ((beta - gamma) / beta) * A_ud
            self._R_ua = ((1.0 - 2.0 * beta) / (2.0 * beta)) * M_u \
                - (dt * (2.0 * beta - gamma) / (2.0 * beta)) * A_ud
            self._C_u = (theta * a0) * (C_t2 + dt * gamma * C)
            self._C_z = (theta / (beta * dt)) * C_t2 \
                + ((theta * gamma - beta) / beta) * C
            self._C_a = ((theta - 2.0 * beta) / (2.0 * beta)) * C_t2 \
                + (theta * dt * (gamma - 2.0 * beta) / (2.0 * beta)) * C
            L = sp.bmat([
                [self._R_uu + A_u, -C.T],
                [self._C_u, (1.0 / dt) * M_phi + theta * A_phi],
            ], format="csc")
            self._mass_solver = LinearSolver(M_u)
        else:
            L = ((1.0 / dt) * M_phi + theta * A_phi).tocsc()
        self._R_pp = (1.0 / dt) * M_phi - (1.0 - theta) * A_phi
        self._step_solver = LinearSolver(L, cache=cfg.cache_factorization)

        self.t = 0.0
        self.U = self.Z = self.Acc = None
        self.Phi = None
        self._G_prev = None

    def initialize(self, U0, Z0, Phi0, t0=0.0):
        self.t = float(t0)
        self.Phi = np.asarray(Phi0, dtype=float).copy()
        if self.n_u:
            self.U = np.asarray(U0, dtype=float).copy()
            self.Z = np.asarray(Z0, dtype=float).copy()
            b = self.rhs_u(self.t) - self._A_ud @ self.Z - self._A_u @ self.U \
                + self._C.T @ self.Phi
            self.Acc = self._mass_solver.solve(b)
        else:
            self.U = np.zeros(0)
            self.Z = np.zeros(0)
            self.Acc = np.zeros(0)
        self._G_prev = self.rhs_phi(self.t)
        return self

    def step(self):
        cfg = self.cfg
        dt, beta, gamma, theta = cfg.dt, cfg.beta, cfg.gamma, cfg.theta
        t_next = self.t + dt
        G_next = self.rhs_phi(t_next)
        r_phi = theta * G_next + (1.0 - theta) * self._G_prev \
            + self._R_pp @ self.Phi
        if self.n_u:
            r_u = self.rhs_u(t_next) + self._R_uu @ self.U \
                + self._R_uz @ self.Z + self._R_ua @ self.Acc
            r_phi = r_phi + self._C_u @ self.U + self._C_z @ self.Z \
                + self._C_a @ self.Acc
            sol = self._step_solver.solve(np.concatenate([r_u, r_phi]))
            U_next = sol[:self.n_u]
            self.Phi = sol[self.n_u:]
            a0 = 1.0 / (beta * dt * dt)
            A_next = a0 * (U_next - self.U) - (1.0 / (beta * dt)) * self.Z \
                + ((2.0 * beta - 1.0) / (2.0 * beta)) * self.Acc
            self.Z = self.Z + dt * (gamma * A_next + (1.0 - gamma) * self.Acc)
            self.U = U_next
            self.Acc = A_next
        else:
            self.Phi = self._step_solver.solve(r_phi)
        self._G_prev = G_next
        self.t = t_next
        return self


def run_transient(ops, rhs, cfg, U0, Z0, Phi0, dPhi0=None, observers=()):
    """Advance the coupled system to ``cfg.t_final``; returns the final state.

    The scheme follows tau1: a positive relaxation time makes the pressure
    equation second order (monolithic Newmark); tau1 = 0 selects the coupled
    Newmark/theta scheme.  ``observers`` are called with a :class:`State`
    after initialization and after every step.
    """
    cfg.validate()
    hyperbolic_phi = ops.M_phi_tau1.nnz > 0 and \
        np.abs(ops.M_phi_tau1.data).max() > 0.0
    scheme = cfg.scheme
    if scheme == "auto":
        scheme = "newmark" if hyperbolic_phi else "newmark-theta"
    if scheme == "newmark" and not hyperbolic_phi:
        raise ConfigError("Newmark scheme requires tau1 > 0 (singular mass block)")
    if scheme == "newmark-theta" and hyperbolic_phi:
        raise ConfigError("Newmark-theta scheme requires tau1 = 0")

    n_u, n_phi = ops.n_u, ops.n_phi
    if scheme == "newmark":
        A_blk = sp.bmat([[ops.M_u, None], [ops.C_tau2, ops.M_phi_tau1]],
                        format="csr")
        B_blk = sp.bmat([[ops.A_u_delta, None], [ops.C, ops.M_phi]],
                        format="csr")
        C_blk = sp.bmat([[ops.A_u, -ops.C.T], [None, ops.A_phi]], format="csr")
        stepper = NewmarkIntegrator(A_blk, B_blk, C_blk,
                                    lambda t: rhs.forcing(t), cfg)
        X0 = np.concatenate([U0, Phi0])
        Y0 = np.concatenate([Z0, dPhi0 if dPhi0 is not None
                             else np.zeros(n_phi)])
        stepper.initialize(X0, Y0)

        def snapshot():
            return State(
                t=stepper.t,
                U=stepper.X[:n_u], Z=stepper.Y[:n_u], A=stepper.L[:n_u],
                Phi=stepper.X[n_u:], dPhi=stepper.Y[n_u:],
                ddPhi=stepper.L[n_u:])
    else:
        stepper = NewmarkThetaIntegrator(
            ops.M_u, ops.M_phi, ops.A_u, ops.A_u_delta, ops.A_phi,
            ops.C, ops.C_tau2, rhs.forcing_u, rhs.forcing_phi, cfg)
        stepper.initialize(U0, Z0, Phi0)

        def snapshot():
            return State(t=stepper.t, U=stepper.U, Z=stepper.Z, A=stepper.Acc,
                         Phi=stepper.Phi)

    state = snapshot()
    for obs in observers:
        obs(state)
    for _ in range(cfg.n_steps):
        stepper.step()
        state = snapshot()
        for obs in observers:
            obs(state)
    return state
