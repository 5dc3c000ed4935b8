"""Command line entry point: ``lipschitz-lab <subcommand> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 2 configuration error, 3 every cell disconnected,
4 solver non-convergence in some cell.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import geometry as geo
from ..continuum import write_field_csv
from ..graph import build_graph, write_graph
from ..kernels import KernelAssumptionError, make_kernel, read_kernel_csv, validate_kernel
from .config import ConfigError, load_config, validate_config
from .experiment import (
    build_domain,
    build_kernel,
    probe_spacing,
    run_experiment,
    sample_cell,
    scaling_schedule,
)

EXIT_OK, EXIT_CONFIG, EXIT_DISCONNECTED, EXIT_UNCONVERGED = 0, 2, 3, 4
SOLVER_TASKS = ("infinity-harmonic", "mcshane-lower", "mcshane-upper")


def _config(args, **forced):
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if forced:
        cfg = validate_config(replace(cfg, **forced))
    return cfg


def _out(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report_exit(report, cfg):
    out = report.write(cfg.out)
    print(f"wrote {out / 'report.csv'}")
    if report.all_disconnected:
        return EXIT_DISCONNECTED
    if report.any_unconverged:
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_sample(args):
    cfg = _config(args)
    domain, out = build_domain(cfg), _out(cfg)
    for k, cell in enumerate(cfg.cells):
        cloud = sample_cell(cfg, domain, cell)
        geo.write_cloud_csv(out / f"cloud_{k}.csv", cloud)
        print(f"cloud_{k}.csv: n={len(cloud)}")
    return EXIT_OK


def cmd_graph(args):
    cfg = _config(args)
    domain, kernel, out = build_domain(cfg), build_kernel(cfg), _out(cfg)
    for k, cell in enumerate(cfg.cells):
        cloud = sample_cell(cfg, domain, cell)
        r = geo.fill_distance(domain, cloud, probe_spacing(cfg, domain, cloud, cell))
        s = scaling_schedule(cfg.schedule, cfg.schedule_K, cfg.schedule_alpha, r)
        graph = build_graph(cloud, kernel, s)
        write_graph(out / f"graph_{k}.csv", out / f"graph_{k}.json", graph)
        print(f"graph_{k}: n={graph.n} edges={graph.n_edges} r={r:.6g} s={s:.6g}")
    return EXIT_OK


def cmd_solve(args):
    cfg = _config(args)
    if cfg.task not in SOLVER_TASKS:
        cfg = _config(args, task="infinity-harmonic")
    return _report_exit(run_experiment(cfg, args.threads), cfg)


def cmd_groundstate(args):
    cfg = _config(args, task="ground-state")
    return _report_exit(run_experiment(cfg, args.threads), cfg)


def cmd_converge(args):
    cfg = _config(args)
    return _report_exit(run_experiment(cfg, args.threads), cfg)


def cmd_geodesic(args):
    cfg = _config(args)
    domain, out = build_domain(cfg), _out(cfg)
    if cfg.constraint_points:
        sources = np.array(cfg.constraint_points, dtype=float)
    else:
        sources = domain.sample_boundary(args.mesh_h / 2)
    field_ = geo.geodesic_distance_field(domain, sources, args.mesh_h, args.stencil)
    write_field_csv(out / "geodesic.csv", field_.nodes, field_.values)
    print(f"geodesic.csv: {len(field_.nodes)} nodes, max {np.max(field_.values[np.isfinite(field_.values)]):.6g}")
    return EXIT_OK


def cmd_validate_kernel(args):
    if args.table:
        kernel = read_kernel_csv(args.table, strict=False)
    else:
        kernel = make_kernel(args.kind)
    report = validate_kernel(kernel)
    print(json.dumps({"kind": kernel.kind, "K1": report.k1, "K2": report.k2, "K3": report.k3,
                      "sigma_eta": kernel.sigma, "notes": list(report.notes)}, indent=2))
    return EXIT_OK if report.ok else EXIT_CONFIG


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value experiment file")
    common.add_argument("--out", help="output directory (overrides 'out' in the config)")
    common.add_argument("--seed", type=int, help="base seed (overrides 'seed' in the config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for cells")

    parser = argparse.ArgumentParser(prog="lipschitz-lab", description="Lipschitz learning on geometric graphs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("sample", cmd_sample, "write the point clouds of every configured size"),
        ("graph", cmd_graph, "build and dump the geometric graphs"),
        ("solve", cmd_solve, "solve the constrained problem on every size"),
        ("groundstate", cmd_groundstate, "compute ground states on every size"),
        ("converge", cmd_converge, "run the configured convergence sweep"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
    p = sub.add_parser("geodesic", parents=[common], help="geodesic distance field to the constraint points")
    p.add_argument("--mesh-h", type=float, default=0.02)
    p.add_argument("--stencil", type=int, default=2)
    p.set_defaults(func=cmd_geodesic)
    p = sub.add_parser("validate-kernel", parents=[common], help="check the kernel assumptions")
    p.add_argument("--kind", default="indicator")
    p.add_argument("--table", help="CSV with header t,eta")
    p.set_defaults(func=cmd_validate_kernel)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, KernelAssumptionError, geo.GeometryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
