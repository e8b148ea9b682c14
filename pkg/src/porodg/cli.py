"""Command-line drivers: mesh generation, transient runs, convergence sweeps.

Subcommands::

    porodg mesh   --voronoi 300 --domain 0,0,1,1 --seed 1 --out mesh.txt
    porodg mesh   --cartesian 60 220 --domain 0,0,366,671 --out grid.txt
    porodg run    config.ini [--out-dir DIR] [--scale-permeability F]
    porodg sweep  {h|p|dt|nu} [--degree L] [--sizes ...] [--out report.csv]
    porodg probe  RUNDIR --name P1 [--out series.csv]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import os
import sys


def _set_thread_env(argv):
    # must happen before numpy/scipy are imported anywhere below
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                        "MKL_NUM_THREADS"):
                os.environ[var] = argv[i + 1]


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    _set_thread_env(argv)

    from .errors import ConfigError, MeshFormatError, PorodgError, SolverError

    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MeshFormatError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except SolverError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except PorodgError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _build_parser():
    parser = argparse.ArgumentParser(prog="porodg", description=__doc__)
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/solver threads (set before startup)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate and save a mesh")
    p_mesh.add_argument("--voronoi", type=int, metavar="N")
    p_mesh.add_argument("--cartesian", type=int, nargs=2, metavar=("NX", "NY"))
    p_mesh.add_argument("--domain", default="0,0,1,1")
    p_mesh.add_argument("--seed", type=int, default=0)
    p_mesh.add_argument("--lloyd", type=int, default=50)
    p_mesh.add_argument("--out", default="mesh.txt")
    p_mesh.set_defaults(func=cmd_mesh)

    p_run = sub.add_parser("run", help="run a transient scenario")
    p_run.add_argument("config")
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--scale-permeability", type=float, default=1.0,
                       help="multiply the diffusion/permeability field")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the mesh seed from the config")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="convergence/robustness sweeps")
    p_sweep.add_argument("kind", choices=("h", "p", "dt", "nu"))
    p_sweep.add_argument("--case", default="trig",
                         choices=("trig", "linear", "scaled"))
    p_sweep.add_argument("--degree", type=int, default=3)
    p_sweep.add_argument("--sizes", type=int, nargs="+",
                         default=[100, 200, 400])
    p_sweep.add_argument("--degrees", type=int, nargs="+", default=[1, 2, 3, 4])
    p_sweep.add_argument("--dts", type=float, nargs="+", default=None)
    p_sweep.add_argument("--nus", type=float, nargs="+", default=None)
    p_sweep.add_argument("--dt", type=float, default=5e-5)
    p_sweep.add_argument("--t-final", type=float, default=0.1)
    p_sweep.add_argument("--nu-u", type=float, default=1.0)
    p_sweep.add_argument("--nu-phi", type=float, default=1.0)
    p_sweep.add_argument("--coeff", action="append", default=[],
                         metavar="NAME=VALUE",
                         help="override a model coefficient (repeatable)")
    p_sweep.add_argument("--scheme", default="auto",
                         choices=("auto", "newmark", "newmark-theta"))
    p_sweep.add_argument("--out", default="sweep.csv")
    p_sweep.set_defaults(func=cmd_sweep)

    p_probe = sub.add_parser("probe", help="extract a probe series from a run")
    p_probe.add_argument("rundir")
    p_probe.add_argument("--name", required=True)
    p_probe.add_argument("--out", default=None)
    p_probe.set_defaults(func=cmd_probe)
    return parser


def cmd_mesh(args):
    from .errors import ConfigError
    from .mesh import generate_cartesian, generate_voronoi, save_mesh

    domain = tuple(float(v) for v in args.domain.replace(",", " ").split())
    if len(domain) != 4 or domain[2] <= domain[0] or domain[3] <= domain[1]:
        raise ConfigError("--domain must be x0,y0,x1,y1 with positive area")
    if (args.voronoi is None) == (args.cartesian is None):
        raise ConfigError("choose exactly one of --voronoi N / --cartesian NX NY")
    if args.voronoi is not None:
        mesh = generate_voronoi(domain, args.voronoi, lloyd_iters=args.lloyd,
                                seed=args.seed)
    else:
        mesh = generate_cartesian(domain, *args.cartesian)
    save_mesh(mesh, args.out)
    print(f"wrote {mesh.n_elements} elements to {args.out}")
    return 0


def cmd_run(args):
    import numpy as np

    from .config import (build_coefficients, build_mesh, build_sources,
                         parse_config, validate_run)
    from .output import ProbeRecorder, SnapshotWriter
    from .problem import setup_problem
    from .timestepping import IntegratorConfig, run_transient
    from .verification import EnergyTrace

    cfg = parse_config(args.config)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    if args.seed is not None and cfg.mesh_kind == "voronoi":
        cfg.mesh_params["seed"] = args.seed
    out_dir = cfg.resolve_out_dir()
    os.makedirs(out_dir, exist_ok=True)

    mesh = build_mesh(cfg)
    coeffs = build_coefficients(cfg, mesh, d_scale=args.scale_permeability)
    validate_run(cfg, mesh, coeffs)
    sources = build_sources(cfg, mesh)
    problem = setup_problem(mesh, cfg.degree, coeffs, bc=cfg.bc,
                            sources=sources)

    snapshots = SnapshotWriter(problem.space, coeffs, cfg.snapshots, cfg.dt,
                               out_dir)
    probes = ProbeRecorder(problem.space, coeffs, cfg.probes)
    energy = EnergyTrace(problem)
    icfg = IntegratorConfig(dt=cfg.dt, t_final=cfg.t_final, beta=cfg.beta,
                            gamma=cfg.gamma_n, theta=cfg.theta,
                            scheme=cfg.scheme).validate()
    n_u, n_phi = problem.ops.n_u, problem.ops.n_phi
    run_transient(problem.ops, problem.rhs, icfg,
                  np.zeros(n_u), np.zeros(n_u), np.zeros(n_phi),
                  np.zeros(n_phi), observers=(snapshots, probes, energy))
    probes.to_csv(os.path.join(out_dir, "probes.csv"))
    energy.to_csv(os.path.join(out_dir, "energy.csv"))
    print(f"run complete: {len(snapshots.written)} snapshots, "
          f"{len(probes.rows)} probe rows in {out_dir}")
    return 0


def cmd_sweep(args):
    from .errors import ConfigError
    from .verification import convergence_sweep

    overrides = {}
    for spec in args.coeff:
        if "=" not in spec:
            raise ConfigError(f"--coeff expects NAME=VALUE, got {spec!r}")
        name, value = spec.split("=", 1)
        overrides[name.strip()] = float(value)
    report = convergence_sweep(
        args.kind, case_name=args.case, degree=args.degree, sizes=args.sizes,
        degrees=args.degrees, dts=args.dts, nus=args.nus, dt=args.dt,
        t_final=args.t_final, coeff_overrides=overrides or None,
        scheme=args.scheme, nu_u=args.nu_u, nu_phi=args.nu_phi)
    report.to_csv(args.out)
    print(f"wrote {len(report.levels)}-level {args.kind}-sweep to {args.out}")
    return 0


def cmd_probe(args):
    from .errors import ConfigError
    from .output import read_probe_series

    path = os.path.join(args.rundir, "probes.csv")
    if not os.path.exists(path):
        raise ConfigError(f"no probes.csv in {args.rundir}")
    series = read_probe_series(path, args.name)
    cols = list(series)
    lines = [",".join(cols)]
    n = len(series["t"])
    for i in range(n):
        lines.append(",".join(f"{series[c][i]:.17g}" for c in cols))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {n} rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
