"""Face-level DG machinery: jumps, weighted averages, penalties.

The interior-penalty scheme weights face averages by the material
coefficient seen from each side, q -> (omega+, omega-) with
omega+ = q-/(q+ + q-), and scales penalties with the harmonic coefficient
gamma_q = q+ q-/(q+ + q-).  Degenerate coefficients extend continuously:
if a coefficient vanishes on one side the weighted average picks the other
side only and the penalty vanishes, so the whole face contribution of that
form drops out instead of dividing by zero.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError

#: Penalty scaling constants (alpha_1..alpha_5); 10 in every experiment.
DEFAULT_ALPHA = (10.0, 10.0, 10.0, 10.0, 10.0)

#: Physical quantities that carry face weights, in table order.
WEIGHTED_QUANTITIES = ("mu", "mu_delta1", "lam", "lam_delta2", "dnn")


# -- jump / average operators ------------------------------------------------

def jump_scalar(a_plus, a_minus, normal):
    """[[a]] = a+ n+ + a- n-  (vector valued), with n- = -n+."""
    a_plus = np.asarray(a_plus, dtype=float)
    a_minus = np.asarray(a_minus, dtype=float)
    return np.outer(a_plus - a_minus, normal)


def jump_vector(a_plus, a_minus, normal):
    """[[a]] = a+ (x) n+ + a- (x) n-  with (a (x) n)_ij = a_i n_j."""
    diff = np.asarray(a_plus, dtype=float) - np.asarray(a_minus, dtype=float)
    return np.einsum("qi,j->qij", np.atleast_2d(diff), np.asarray(normal))


def jump_normal(a_plus, a_minus, normal):
    """[[a]]_n = a+ . n+ + a- . n-."""
    diff = np.asarray(a_plus, dtype=float) - np.asarray(a_minus, dtype=float)
    return np.atleast_2d(diff) @ np.asarray(normal)


def boundary_jump_scalar(a, normal):
    """Boundary face: [[a]] = a n."""
    return np.outer(np.asarray(a, dtype=float), normal)


def boundary_jump_vector(a, normal):
    return np.einsum("qi,j->qij", np.atleast_2d(np.asarray(a, dtype=float)),
                     np.asarray(normal))


def boundary_jump_normal(a, normal):
    return np.atleast_2d(np.asarray(a, dtype=float)) @ np.asarray(normal)


def weighted_average(a_plus, a_minus, w_plus, w_minus):
    """{a}_omega = omega+ a+ + omega- a- (works for any trailing shape)."""
    return w_plus * np.asarray(a_plus, dtype=float) \
        + w_minus * np.asarray(a_minus, dtype=float)


def face_weights(q_plus, q_minus):
    """Weights and harmonic coefficient of a face quantity.

    Returns ``(omega_plus, omega_minus, gamma)``.  When both sides vanish
    the face contributes nothing: weights fall back to 1/2 and gamma to 0.
    """
    s = q_plus + q_minus
    if s <= 0.0:
        return 0.5, 0.5, 0.0
    return q_minus / s, q_plus / s, q_plus * q_minus / s


def normal_diffusivity(D, normal):
    """eta_Dn = n^T D n for a 2x2 diffusion tensor."""
    n = np.asarray(normal, dtype=float)
    return float(n @ np.asarray(D, dtype=float) @ n)


def spectral_bound(D):
    """|sqrt(D)|_2^2, i.e. the largest eigenvalue of the SPD tensor D."""
    return float(np.linalg.eigvalsh(np.asarray(D, dtype=float)).max())


# -- per-face weight and penalty tables ---------------------------------------

@dataclass(frozen=True)
class TraceWeights:
    """Per interior face: weights/harmonic coefficients for each quantity.

    Each entry of ``omega_plus``/``omega_minus``/``gamma`` is an
    ``(n_interior_faces,)`` array keyed by the quantity name; ``eta_plus`` and
    ``eta_minus`` hold the normal diffusivities that define the D weights.
    """

    omega_plus: dict
    omega_minus: dict
    gamma: dict
    eta_plus: np.ndarray
    eta_minus: np.ndarray


def compute_trace_weights(mesh, coeffs):
    """Build :class:`TraceWeights` from element-wise constant coefficients."""
    I = mesh.interior
    nf = len(I)
    qty_plus = {
        "mu": coeffs.mu[I.elem_plus],
        "mu_delta1": (coeffs.mu * coeffs.delta1)[I.elem_plus],
        "lam": coeffs.lam[I.elem_plus],
        "lam_delta2": (coeffs.lam * coeffs.delta2)[I.elem_plus],
    }
    qty_minus = {
        "mu": coeffs.mu[I.elem_minus],
        "mu_delta1": (coeffs.mu * coeffs.delta1)[I.elem_minus],
        "lam": coeffs.lam[I.elem_minus],
        "lam_delta2": (coeffs.lam * coeffs.delta2)[I.elem_minus],
    }
    eta_p = np.array([normal_diffusivity(coeffs.D[I.elem_plus[f]], I.normal[f])
                      for f in range(nf)])
    eta_m = np.array([normal_diffusivity(coeffs.D[I.elem_minus[f]], I.normal[f])
                      for f in range(nf)])
    qty_plus["dnn"] = eta_p
    qty_minus["dnn"] = eta_m

    omega_p, omega_m, gam = {}, {}, {}
    for name in WEIGHTED_QUANTITIES:
        wp = np.empty(nf)
        wm = np.empty(nf)
        g = np.empty(nf)
        for f in range(nf):
            wp[f], wm[f], g[f] = face_weights(qty_plus[name][f], qty_minus[name][f])
        omega_p[name], omega_m[name], gam[name] = wp, wm, g
    return TraceWeights(omega_p, omega_m, gam, eta_p, eta_m)


@dataclass(frozen=True)
class PenaltyTable:
    """Stabilization functions per face (interior and boundary blocks).

    ``interior``/``boundary`` map the penalty name (``sigma``, ``sigma_d1``,
    ``xi``, ``xi_d2``, ``zeta``) to per-face arrays.  Penalties are zero
    exactly where the underlying coefficient vanishes, so degenerate forms
    assemble to nothing.
    """

    interior: dict
    boundary: dict
    alpha: tuple


def compute_penalties(space, coeffs, weights=None, alpha=DEFAULT_ALPHA,
                      legacy_boundary_zeta=False):
    """Stabilization functions for all faces of ``space.mesh``.

    Interior faces use ``alpha_i * gamma_q * max(l^2/h)`` over the two
    neighbours; boundary faces use the element's own coefficient.  The
    boundary ``zeta`` scales proportionally to the spectral bound of D by
    default; ``legacy_boundary_zeta`` restores the reciprocal variant.
    """
    if np.any(np.asarray(alpha) <= 0.0):
        raise AssemblyError("penalty constants alpha must be positive")
    mesh = space.mesh
    if weights is None:
        weights = compute_trace_weights(mesh, coeffs)
    I, B = mesh.interior, mesh.boundary
    if (mesh.diameters <= 0).any():
        raise AssemblyError("nonpositive element diameter")

    l2h = space.degrees.astype(float) ** 2 / mesh.diameters
    cap = np.maximum(l2h[I.elem_plus], l2h[I.elem_minus])
    a1, a2, a3, a4, a5 = alpha
    interior = {
        "sigma": a1 * weights.gamma["mu"] * cap,
        "sigma_d1": a2 * weights.gamma["mu_delta1"] * cap,
        "xi": a3 * weights.gamma["lam"] * cap,
        "xi_d2": a4 * weights.gamma["lam_delta2"] * cap,
        "zeta": a5 * weights.gamma["dnn"] * cap,
    }

    lb = l2h[B.elem]
    dbar = np.array([spectral_bound(coeffs.D[k]) for k in B.elem])
    if legacy_boundary_zeta:
        zeta_b = np.where(dbar > 0.0, a5 * lb / np.where(dbar > 0.0, dbar, 1.0), 0.0)
    else:
        zeta_b = a5 * dbar * lb
    boundary = {
        "sigma": a1 * coeffs.mu[B.elem] * lb,
        "sigma_d1": a2 * (coeffs.mu * coeffs.delta1)[B.elem] * lb,
        "xi": a3 * coeffs.lam[B.elem] * lb,
        "xi_d2": a4 * (coeffs.lam * coeffs.delta2)[B.elem] * lb,
        "zeta": zeta_b,
    }
    return PenaltyTable(interior, boundary, tuple(alpha))
