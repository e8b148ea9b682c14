"""Physical coefficients, named model presets, and source terms.

The unified two-field system carries ten element-wise constant parameters
(rho, mu, lambda, delta1, delta2, gamma, d0, D, tau1, tau2); presets zero
the subsets that turn it into the classical Biot problem, the relaxed
thermoelastic problem, or the quasi-static poro-viscoelastic problem.
All source terms are time-separable, ``value(x, t) = temporal(t) *
spatial(x)``, which lets the assembler project each spatial profile once.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, MeshFormatError

PRESETS = ("poroelastic", "thermoelastic", "poro-viscoelastic", "unified")

#: SI base-dimension exponents (m, kg, s, K) of every model parameter, in the
#: poroelastic (P) and thermoelastic (T) readings.  Pa = kg/(m s^2).
PARAMETER_UNITS = {
    "P": {
        "rho": (-3, 1, 0, 0), "mu": (-1, 1, -2, 0), "lam": (-1, 1, -2, 0),
        "delta1": (0, 0, 1, 0), "delta2": (0, 0, 1, 0), "gamma": (0, 0, 0, 0),
        "d0": (1, -1, 2, 0), "D": (3, -1, 1, 0), "tau1": (0, 0, 1, 0),
        "tau2": (0, 0, 1, 0), "phi_field": (-1, 1, -2, 0),
    },
    "T": {
        "rho": (-3, 1, 0, 0), "mu": (-1, 1, -2, 0), "lam": (-1, 1, -2, 0),
        "delta1": (0, 0, 1, 0), "delta2": (0, 0, 1, 0), "gamma": (-1, 1, -2, -1),
        "d0": (-1, 1, -2, -2), "D": (1, 1, -1, -2), "tau1": (0, 0, 1, 0),
        "tau2": (0, 0, 1, 0), "phi_field": (0, 0, 0, 1),
    },
}


@dataclass
class CoefficientField:
    """Element-wise constant physical parameters on a fixed mesh.

    All scalars are ``(n_elements,)`` arrays; ``D`` is ``(n_elements, 2, 2)``
    and symmetric positive definite wherever diffusion is active.
    """

    rho: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    gamma: np.ndarray
    d0: np.ndarray
    D: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray

    @property
    def n_elements(self):
        return len(self.mu)

    def validate(self):
        if (self.mu <= 0.0).any():
            raise ConfigError("coefficient mu must be strictly positive")
        for name in ("rho", "lam", "delta1", "delta2", "gamma", "d0",
                     "tau1", "tau2"):
            if (getattr(self, name) < 0.0).any():
                raise ConfigError(f"coefficient {name} must be nonnegative")
        if np.abs(self.D - np.swapaxes(self.D, 1, 2)).max() > 1e-12 * max(
                np.abs(self.D).max(), 1e-300):
            raise ConfigError("coefficient D must be symmetric")
        eigs = np.linalg.eigvalsh(self.D)
        active = np.abs(self.D).reshape(self.n_elements, -1).max(axis=1) > 0.0
        if active.any() and eigs[active].min() <= 0.0:
            raise ConfigError("coefficient D must be positive definite where active")
        return self

    def warn_relaxation_order(self):
        """True when tau2 >= tau1 everywhere (the analysis-friendly regime)."""
        return bool((self.tau2 >= self.tau1 - 1e-15 * np.abs(self.tau1)).all())

    def uniform_tau(self):
        """The common scalar tau if tau1 == tau2 is constant, else None."""
        if np.ptp(self.tau1) == 0.0 and np.ptp(self.tau2) == 0.0 \
                and self.tau1[0] == self.tau2[0]:
            return float(self.tau1[0])
        return None


def _broadcast(value, n):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape == (n,):
        return arr.copy()
    raise ConfigError(f"coefficient shape {arr.shape} does not match {n} elements")


def _broadcast_tensor(value, n):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = out[:, 1, 1] = float(arr)
        return out
    if arr.shape == (2, 2):
        return np.broadcast_to(arr, (n, 2, 2)).copy()
    if arr.shape == (n,):
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = out[:, 1, 1] = arr
        return out
    if arr.shape == (n, 2, 2):
        return arr.copy()
    raise ConfigError(f"diffusion tensor shape {arr.shape} is not supported")


_PRESET_FORCED = {
    "poroelastic": {"delta1": 0.0, "delta2": 0.0, "tau1": 0.0, "tau2": 0.0},
    "thermoelastic": {"delta1": 0.0, "delta2": 0.0},
    "poro-viscoelastic": {"tau1": 0.0, "tau2": 0.0},
    "unified": {},
}


def preset(name, n_elements, tau=None, **overrides):
    """Coefficient field for a named model variant.

    ``tau`` sets both relaxation times of the thermoelastic preset.  Any
    parameter can be overridden (scalars, per-element arrays, or 2x2 / per-
    element tensors for ``D``); overriding a parameter the preset pins to
    zero is a configuration error.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    values = {
        "rho": 1.0, "mu": 1.0, "lam": 1.0, "delta1": 1.0, "delta2": 1.0,
        "gamma": 1.0, "d0": 1.0, "D": 1.0, "tau1": 1.0, "tau2": 1.0,
    }
    if tau is not None:
        if name != "thermoelastic":
            raise ConfigError("tau= applies to the thermoelastic preset only")
        values["tau1"] = values["tau2"] = float(tau)
    forced = _PRESET_FORCED[name]
    for key, val in overrides.items():
        if key not in values:
            raise ConfigError(f"unknown coefficient {key!r}")
        if key in forced and np.any(np.asarray(val, dtype=float) != forced[key]):
            raise ConfigError(
                f"preset {name!r} pins {key} = {forced[key]}; cannot override")
        values[key] = val
    values.update(forced)
    fields = {k: _broadcast(v, n_elements) for k, v in values.items() if k != "D"}
    fields["D"] = _broadcast_tensor(values["D"], n_elements)
    return CoefficientField(**fields).validate()


def darcy_relaxation_times(D, rho_f, porosity):
    """Relaxation times tau1 = tau2 = rho_f * d / porosity from isotropic D.

    ``D`` is an ``(n, 2, 2)`` per-element tensor that must be isotropic; the
    scalar diffusivity of each element feeds the closed form.
    """
    D = np.asarray(D, dtype=float)
    if not (np.abs(D[:, 0, 1]).max(initial=0.0) == 0.0
            and np.abs(D[:, 0, 0] - D[:, 1, 1]).max(initial=0.0) == 0.0):
        raise ConfigError("relaxation-time derivation requires isotropic D")
    if porosity <= 0.0 or porosity >= 1.0:
        raise ConfigError("porosity must lie in (0, 1)")
    return rho_f * D[:, 0, 0] / porosity


# -- raster ingestion --------------------------------------------------------

def load_raster(path):
    """Read ``raster NX NY`` text format; returns an (ny, nx) array.

    Values are whitespace-separated, row-major from the domain's lower-left
    corner; '#' starts a comment.
    """
    tokens = []
    first_line = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if first_line is None:
                first_line = (lineno, line.split())
            else:
                tokens.extend((lineno, t) for t in line.split())
    if first_line is None:
        raise MeshFormatError("empty raster file", line=1)
    lineno, fields = first_line
    if len(fields) != 3 or fields[0] != "raster":
        raise MeshFormatError("expected header 'raster NX NY'", line=lineno)
    try:
        nx, ny = int(fields[1]), int(fields[2])
    except ValueError:
        raise MeshFormatError("raster dimensions must be integers",
                              line=lineno) from None
    if len(tokens) != nx * ny:
        raise MeshFormatError(
            f"expected {nx * ny} raster values, found {len(tokens)}",
            line=tokens[-1][0] if tokens else lineno)
    vals = np.empty(nx * ny)
    for i, (ln, tok) in enumerate(tokens):
        try:
            vals[i] = float(tok)
        except ValueError:
            raise MeshFormatError(f"bad raster value {tok!r}", line=ln) from None
    return vals.reshape(ny, nx)


def raster_field(raster, nx, ny, positive=False):
    """Flatten an (ny, nx) raster into the cartesian element ordering."""
    raster = np.asarray(raster, dtype=float)
    if raster.shape != (ny, nx):
        raise ConfigError(
            f"raster shape {raster.shape} does not match the {nx} x {ny} mesh")
    vals = raster.reshape(-1)   # row-major from lower-left == element order
    if positive and (vals <= 0.0).any():
        raise ConfigError("raster values must be strictly positive")
    return vals


def synthetic_channel_raster(nx, ny, background=1e-3, channel=1.0, width=0.2,
                             center=0.5):
    """High-permeability vertical strip on a low-permeability background.

    Stand-in for benchmark permeability slices: a straight channel of the
    given relative ``width`` centered at relative x-position ``center``.
    """
    x = (np.arange(nx) + 0.5) / nx
    col = np.where(np.abs(x - center) <= 0.5 * width, channel, background)
    return np.tile(col, (ny, 1))


# -- time factors and source terms --------------------------------------------

class TimeFactor:
    """Scalar time dependence with the two derivatives the lifting needs."""

    def __init__(self, value, d1=None, d2=None):
        self.value = value
        self.d1 = d1 if d1 is not None else _fd(value)
        self.d2 = d2 if d2 is not None else _fd(self.d1)

    @classmethod
    def constant(cls, c=1.0):
        return cls(lambda t: c, lambda t: 0.0, lambda t: 0.0)

    @classmethod
    def from_sympy(cls, expr, t):
        import sympy as sp

        fns = [sp.lambdify(t, sp.diff(expr, t, k), "math") for k in range(3)]
        return cls(*fns)


def _fd(fn, eps=1e-6):
    return lambda t: (fn(t + eps) - fn(t - eps)) / (2 * eps)


def pulse_history(amplitude, peak_frequency, shift):
    """Windowed-cosine source history h(t) = A cos(2 pi f (t-t0)) e^{-2 f^2 (t-t0)^2}."""
    import sympy as sp

    t = sp.symbols("t")
    arg = (t - shift) * peak_frequency
    expr = amplitude * sp.cos(2 * sp.pi * arg) * sp.exp(-2 * arg ** 2)
    return TimeFactor.from_sympy(expr, t)


class Mollifier:
    """Compactly supported radial bump of unit integral.

    rho(x) = c/r^2 * exp(-1 / (1 - (|x - x0| / r)^2)) inside the support
    radius ``r`` and zero outside; ``c`` normalizes the 2D integral to one.
    """

    def __init__(self, center, radius):
        if radius <= 0.0:
            raise ConfigError("mollifier radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        mass, _ = quad(lambda s: math.exp(-1.0 / (1.0 - s * s)) * s, 0.0, 1.0,
                       epsabs=1e-15, epsrel=1e-14)
        self._c = 1.0 / (2.0 * math.pi * mass)

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - self.center
        s2 = (d ** 2).sum(axis=1) / self.radius ** 2
        out = np.zeros(len(pts))
        inside = s2 < 1.0
        out[inside] = self._c / self.radius ** 2 * np.exp(-1.0 / (1.0 - s2[inside]))
        return out

    def gradient(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - self.center
        s2 = (d ** 2).sum(axis=1) / self.radius ** 2
        out = np.zeros_like(pts)
        inside = s2 < 1.0
        g = np.zeros(len(pts))
        # d/ds2 exp(-1/(1-s2)) = -exp(...)/(1-s2)^2 ; chain through s2 = |d|^2/r^2
        g[inside] = -self._c / self.radius ** 2 \
            * np.exp(-1.0 / (1.0 - s2[inside])) / (1.0 - s2[inside]) ** 2
        out[inside] = (2.0 / self.radius ** 2) * g[inside, None] * d[inside]
        return out


@dataclass
class SourcePart:
    """One separable source contribution: temporal(t) * spatial(points)."""

    temporal: TimeFactor
    f_spatial: object = None   # callable (n,2) points -> (n,2), or None
    g_spatial: object = None   # callable (n,2) points -> (n,), or None


@dataclass
class SourceSet:
    """Sum of separable volume sources for the two equations."""

    parts: list = field(default_factory=list)

    def eval_f(self, pts, t):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros((len(pts), 2))
        for p in self.parts:
            if p.f_spatial is not None:
                out += p.temporal.value(t) * np.asarray(p.f_spatial(pts))
        return out

    def eval_g(self, pts, t):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts))
        for p in self.parts:
            if p.g_spatial is not None:
                out += p.temporal.value(t) * np.asarray(p.g_spatial(pts))
        return out


def point_force_source(location, direction, radius, history):
    """Mollified point force: f(x, t) = h(t) * direction * bump(x)."""
    bump = Mollifier(location, radius)
    direction = np.asarray(direction, dtype=float)

    def f_spatial(pts):
        return np.outer(bump(pts), direction)

    return SourcePart(history, f_spatial=f_spatial)


def moment_tensor_source(location, tensor, radius, history):
    """Mollified moment-tensor force f_i = -h(t) M_ij d_j bump(x).

    The divergence acting on the point distribution is moved onto the
    mollifier analytically, so the assembled load is smooth.
    """
    bump = Mollifier(location, radius)
    M = np.asarray(tensor, dtype=float)
    if M.shape != (2, 2):
        raise ConfigError("moment tensor must be 2x2")

    def f_spatial(pts):
        return -bump.gradient(pts) @ M.T

    return SourcePart(history, f_spatial=f_spatial)


def injection_source(injectors, absorbers, width, ramp_rate=5.0, scale=0.1):
    """Smooth injection/absorption wells with a tanh ramp-in.

    g(x, t) = scale * tanh(ramp_rate t) * (sum_i e^{-|x-c_i|^2/width}
    - sum_j e^{-|x-a_j|^2/width}) with injector centers ``c_i`` and absorber
    centers ``a_j``.
    """
    import sympy as sp

    injectors = [np.asarray(c, dtype=float) for c in injectors]
    absorbers = [np.asarray(c, dtype=float) for c in absorbers]

    def g_spatial(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts))
        for c in injectors:
            out += np.exp(-((pts - c) ** 2).sum(axis=1) / width)
        for c in absorbers:
            out -= np.exp(-((pts - c) ** 2).sum(axis=1) / width)
        return scale * out

    t = sp.symbols("t")
    temporal = TimeFactor.from_sympy(sp.tanh(ramp_rate * t), t)
    return SourcePart(temporal, g_spatial=g_spatial)


def source_eval(sources, pts, t):
    """Evaluate the combined (f, g) of a :class:`SourceSet` at points/time."""
    return sources.eval_f(pts, t), sources.eval_g(pts, t)
