"""Run configuration: INI-style parsing and cross-module validation.

A run file has sections [mesh], [coefficients], [sources], [bc], [time],
[output]; all physical values are SI.  Parsing is strict: unknown keys,
inconsistent scheme/relaxation-time combinations, or probes outside the
domain are configuration errors naming the offending entry.
"""

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from .assembly import BoundaryConditions
from .errors import ConfigError
from .mesh import generate_cartesian, generate_voronoi, load_mesh
from .models import (SourceSet, darcy_relaxation_times, injection_source,
                     load_raster, moment_tensor_source, point_force_source,
                     preset, pulse_history, raster_field)

_MESH_KEYS = {"kind", "n", "domain", "lloyd", "seed", "nx", "ny", "path",
              "degree"}
_COEFF_KEYS = {"preset", "rho", "mu", "lambda", "delta1", "delta2", "gamma",
               "d0", "d", "tau", "tau1", "tau2", "tau_from_darcy", "rho_f",
               "porosity", "d_scale"}
_TIME_KEYS = {"dt", "t_final", "beta", "gamma", "theta", "scheme"}
_OUTPUT_KEYS = {"dir", "snapshots", "probes"}
_SOURCE_KEYS = {"point_force", "moment", "injection"}


@dataclass
class RunConfig:
    """Validated run description (mesh source, physics, time grid, outputs)."""

    mesh_kind: str
    mesh_params: dict
    degree: int
    coefficients: dict
    source_specs: list
    bc: BoundaryConditions
    dt: float
    t_final: float
    beta: float = 0.25
    gamma_n: float = 0.5
    theta: float = 0.5
    scheme: str = "auto"
    out_dir: str = "out"
    snapshots: list = field(default_factory=list)
    probes: list = field(default_factory=list)

    def resolve_out_dir(self):
        root = os.environ.get("PORODG_OUTPUT_ROOT")
        if root and not os.path.isabs(self.out_dir):
            return os.path.join(root, self.out_dir)
        return self.out_dir


def _floats(text):
    return [float(tok) for tok in text.replace(",", " ").split()]


def _check_keys(section, keys, allowed, per_tag_prefixes=()):
    for key in keys:
        base = key.split(".", 1)[0]
        if key in allowed or base in per_tag_prefixes:
            continue
        raise ConfigError(f"[{section}] unknown key {key!r}")


def parse_config(path):
    """Parse and structurally validate a run configuration file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    if not cp.has_section("mesh"):
        raise ConfigError("[mesh] section is required")
    mesh = dict(cp.items("mesh"))
    _check_keys("mesh", mesh, _MESH_KEYS)
    kind = mesh.get("kind", "voronoi")
    if kind not in ("voronoi", "cartesian", "file"):
        raise ConfigError(f"[mesh] unknown kind {kind!r}")
    domain = tuple(_floats(mesh.get("domain", "0 0 1 1")))
    if len(domain) != 4 or domain[2] <= domain[0] or domain[3] <= domain[1]:
        raise ConfigError("[mesh] domain must be 'x0 y0 x1 y1' with positive area")
    params = {"domain": domain}
    if kind == "voronoi":
        params["n"] = int(mesh.get("n", "100"))
        params["lloyd"] = int(mesh.get("lloyd", "50"))
        params["seed"] = int(mesh.get("seed", "0"))
    elif kind == "cartesian":
        try:
            params["nx"] = int(mesh["nx"])
            params["ny"] = int(mesh["ny"])
        except KeyError as err:
            raise ConfigError(f"[mesh] cartesian grids need {err}") from None
    else:
        if "path" not in mesh:
            raise ConfigError("[mesh] kind=file needs path=")
        params["path"] = mesh["path"]
    degree = int(mesh.get("degree", "1"))
    if degree < 1:
        raise ConfigError("[mesh] degree must be >= 1")

    coeffs = dict(cp.items("coefficients")) if cp.has_section("coefficients") \
        else {}
    _check_keys("coefficients", coeffs, _COEFF_KEYS)

    sources = []
    if cp.has_section("sources"):
        for key, value in cp.items("sources"):
            base = key.split(".", 1)[0]
            if base not in _SOURCE_KEYS:
                raise ConfigError(f"[sources] unknown source kind {key!r}")
            sources.append((base, value))

    bc_u, bc_phi = {}, {}
    default_u = default_phi = "dirichlet"
    if cp.has_section("bc"):
        for key, value in cp.items("bc"):
            value = value.strip().lower()
            if value not in ("dirichlet", "neumann"):
                raise ConfigError(f"[bc] {key}: unknown condition {value!r}")
            if key == "u":
                default_u = value
            elif key == "phi":
                default_phi = value
            elif key.startswith("u."):
                bc_u[key[2:]] = value
            elif key.startswith("phi."):
                bc_phi[key[4:]] = value
            else:
                raise ConfigError(f"[bc] unknown key {key!r}")
    bc = BoundaryConditions(u=bc_u, phi=bc_phi, default_u=default_u,
                            default_phi=default_phi)

    if not cp.has_section("time"):
        raise ConfigError("[time] section is required")
    time = dict(cp.items("time"))
    _check_keys("time", time, _TIME_KEYS)
    try:
        dt = float(time["dt"])
        t_final = float(time["t_final"])
    except KeyError as err:
        raise ConfigError(f"[time] missing {err}") from None

    out = dict(cp.items("output")) if cp.has_section("output") else {}
    _check_keys("output", out, _OUTPUT_KEYS)
    snapshots = _floats(out.get("snapshots", ""))
    probes = []
    for spec in out.get("probes", "").split(";"):
        spec = spec.strip()
        if not spec:
            continue
        fields = spec.split()
        if len(fields) != 3:
            raise ConfigError(f"[output] probe {spec!r}: expected 'NAME x y'")
        probes.append((fields[0], (float(fields[1]), float(fields[2]))))

    return RunConfig(
        mesh_kind=kind, mesh_params=params, degree=degree,
        coefficients=coeffs, source_specs=sources, bc=bc,
        dt=dt, t_final=t_final,
        beta=float(time.get("beta", "0.25")),
        gamma_n=float(time.get("gamma", "0.5")),
        theta=float(time.get("theta", "0.5")),
        scheme=time.get("scheme", "auto"),
        out_dir=out.get("dir", "out"),
        snapshots=snapshots,
        probes=probes,
    )


def build_mesh(cfg):
    p = cfg.mesh_params
    if cfg.mesh_kind == "voronoi":
        return generate_voronoi(p["domain"], p["n"], lloyd_iters=p["lloyd"],
                                seed=p["seed"])
    if cfg.mesh_kind == "cartesian":
        return generate_cartesian(p["domain"], p["nx"], p["ny"])
    return load_mesh(p["path"])


def build_coefficients(cfg, mesh, d_scale=1.0):
    """Coefficient field from the [coefficients] section.

    ``D`` accepts a scalar, a 'dxx dxy dyy' triple, or ``raster:FILE`` for
    cartesian meshes; ``d_scale`` multiplies the diffusion field (the
    permeability-scaling CLI flag).  ``tau_from_darcy = true`` derives both
    relaxation times from D, rho_f and porosity.
    """
    raw = cfg.coefficients
    name = raw.get("preset", "unified")
    n = mesh.n_elements
    overrides = {}
    for key, target in (("rho", "rho"), ("mu", "mu"), ("lambda", "lam"),
                        ("delta1", "delta1"), ("delta2", "delta2"),
                        ("gamma", "gamma"), ("d0", "d0"),
                        ("tau1", "tau1"), ("tau2", "tau2")):
        if key in raw:
            overrides[target] = float(raw[key])
    d_spec = raw.get("d", "1")
    if d_spec.startswith("raster:"):
        if cfg.mesh_kind != "cartesian":
            raise ConfigError("[coefficients] raster D needs a cartesian mesh")
        raster = load_raster(d_spec.split(":", 1)[1])
        vals = raster_field(raster, cfg.mesh_params["nx"],
                            cfg.mesh_params["ny"], positive=True)
        overrides["D"] = vals * float(raw.get("d_scale", 1.0)) * d_scale
    else:
        comps = _floats(d_spec)
        if len(comps) == 1:
            overrides["D"] = comps[0] * d_scale
        elif len(comps) == 3:
            overrides["D"] = np.array([[comps[0], comps[1]],
                                       [comps[1], comps[2]]]) * d_scale
        else:
            raise ConfigError("[coefficients] D must be scalar or 'dxx dxy dyy'")
    tau = float(raw["tau"]) if "tau" in raw else None
    coeffs = preset(name, n, tau=tau, **overrides)
    if raw.get("tau_from_darcy", "false").strip().lower() in ("1", "true", "yes"):
        rho_f = float(raw.get("rho_f", "1000"))
        porosity = float(raw.get("porosity", "0.1"))
        taus = darcy_relaxation_times(coeffs.D, rho_f, porosity)
        coeffs.tau1 = taus
        coeffs.tau2 = taus.copy()
        coeffs.validate()
    return coeffs


def build_sources(cfg, mesh):
    parts = []
    for kind, value in cfg.source_specs:
        vals = value.split(";")[0].split() if kind != "injection" else None
        if kind == "point_force":
            f = _floats(value)
            if len(f) != 8:
                raise ConfigError("[sources] point_force = x y dirx diry "
                                  "amplitude f0 t0 radius")
            x, y, dx, dy, a0, f0, t0, radius = f
            parts.append(point_force_source(
                (x, y), (dx, dy), radius, pulse_history(a0, f0, t0)))
        elif kind == "moment":
            f = _floats(value)
            if len(f) != 10:
                raise ConfigError("[sources] moment = x y mxx mxy myx myy "
                                  "amplitude f0 t0 radius")
            x, y, mxx, mxy, myx, myy, a0, f0, t0, radius = f
            parts.append(moment_tensor_source(
                (x, y), [[mxx, mxy], [myx, myy]], radius,
                pulse_history(a0, f0, t0)))
        elif kind == "injection":
            groups = [g.strip() for g in value.split(";") if g.strip()]
            head = _floats(groups[0])
            if len(head) != 3:
                raise ConfigError("[sources] injection = width ramp scale ; "
                                  "inj x y ; abs x y ...")
            width, ramp, scale = head
            injectors, absorbers = [], []
            for g in groups[1:]:
                fields = g.split()
                if len(fields) != 3 or fields[0] not in ("inj", "abs"):
                    raise ConfigError(f"[sources] bad injection well {g!r}")
                target = injectors if fields[0] == "inj" else absorbers
                target.append((float(fields[1]), float(fields[2])))
            parts.append(injection_source(injectors, absorbers, width,
                                          ramp_rate=ramp, scale=scale))
    return SourceSet(parts)


def validate_run(cfg, mesh, coeffs):
    """Cross-checks that need the built mesh and coefficients."""
    tau1_active = bool((coeffs.tau1 > 0.0).any())
    if cfg.scheme == "newmark" and not tau1_active:
        raise ConfigError("[time] scheme=newmark requires tau1 > 0")
    if cfg.scheme == "newmark-theta" and tau1_active:
        raise ConfigError("[time] scheme=newmark-theta requires tau1 = 0")
    if not coeffs.warn_relaxation_order():
        import warnings

        warnings.warn("tau2 < tau1 leaves the tested stability regime")
    for name, point in cfg.probes:
        if not mesh.contains(point):
            raise ConfigError(f"[output] probe {name} at {point} lies outside "
                              "the domain")
    for t in cfg.snapshots:
        if t < 0.0 or t > cfg.t_final + 1e-12:
            raise ConfigError(f"[output] snapshot time {t} outside [0, t_final]")
    tags = set(mesh.boundary.tag)
    for tag in list(cfg.bc.u) + list(cfg.bc.phi):
        if tag not in tags:
            raise ConfigError(f"[bc] tag {tag!r} does not exist on this mesh")
