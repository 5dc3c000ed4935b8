"""Convergence sweeps: one row per sample size, machine-readable reports."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy
from scipy.spatial import cKDTree

from .. import continuum as cont
from .. import geometry as geo
from .. import solvers
from ..graph import (
    LabelSet,
    build_graph,
    connectivity,
    constrained_functional,
    discrete_functional,
    evaluate_extension,
    write_function,
)
from ..kernels import make_kernel, read_kernel_csv
from .config import ConfigError

COLUMNS = ("n", "r", "s", "r_over_s", "value", "sigma_eta", "target", "abs_err", "sup_err", "status", "wall_ms")


def scaling_schedule(kind, K, alpha, r):
    """Graph scale s for fill distance r. Only ``proportional`` keeps r/s from vanishing."""
    if K <= 0 or r <= 0:
        raise ValueError("K and r must be positive")
    if kind == "power":
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        return K * r**alpha
    if kind == "log":
        return K * r * math.log(math.e + 1.0 / r)
    if kind == "proportional":
        return K * r
    raise ValueError(f"unknown schedule {kind!r}")


def restrict_with_labels(graph, ref, labels=None):
    """Reference values at the vertices, overwritten by the labels on the constraint indices."""
    u = ref.eval(graph.cloud.points).copy()
    if labels is not None and len(labels.indices):
        u[labels.indices] = labels.values
    return u


# ---------------------------------------------------------------------------
# config -> objects


def build_domain(cfg):
    if cfg.domain == "unit-box":
        return geo.unit_box(cfg.domain_dim)
    if cfg.domain == "l-shape":
        return geo.l_shape()
    if cfg.domain == "box":
        return geo.scaled_box(cfg.domain_lo, cfg.domain_hi)
    return geo.polygon(cfg.domain_vertices)


def build_kernel(cfg):
    if cfg.kernel == "custom-table":
        return read_kernel_csv(cfg.kernel_file)
    return make_kernel(cfg.kernel)


def build_reference(cfg, domain):
    if cfg.reference == "linear":
        if len(cfg.reference_a) != domain.dim:
            raise ConfigError("reference.a must have one entry per dimension")
        return cont.linear(cfg.reference_a, cfg.reference_b)
    if cfg.reference == "lshape-power":
        return cont.lshape_power(cfg.reference_p)
    if cfg.reference == "distance-to-boundary":
        return cont.distance_to_boundary(domain)
    return None


def _cell_seed(cfg, size):
    return int(cfg.seed) ^ int(size)


def sample_cell(cfg, domain, cell):
    if cfg.sampling == "grid":
        return geo.sample_grid(domain, cell)
    if cfg.sampling == "uniform":
        return geo.sample_uniform(domain, int(cell), _cell_seed(cfg, cell))
    if cfg.sampling == "halton":
        return geo.sample_halton(domain, int(cell), _cell_seed(cfg, cell))
    return geo.read_cloud_csv(cfg.sampling_file)


def _nominal_spacing(cfg, domain, cloud):
    if cfg.sampling == "grid":
        return None
    return (domain.volume / len(cloud)) ** (1.0 / domain.dim)


def probe_spacing(cfg, domain, cloud, cell):
    if cfg.probe_h is not None:
        return cfg.probe_h
    if cfg.sampling == "grid":
        return cell / 2
    return _nominal_spacing(cfg, domain, cloud) / 2


def _boundary_samples(domain, r):
    # dense enough that the sampled d_H is within r/64 of the one against the whole boundary
    return domain.sample_boundary(r / 32)


def build_constraint(cfg, domain, cloud, r):
    """ConstraintGeometry for the configured constraint, plus explicit label values if any."""
    if cfg.constraint == "none":
        return None, None
    if cfg.constraint == "boundary":
        samples = _boundary_samples(domain, r)
        dist, _ = cKDTree(samples).query(cloud.points, k=1)
        idx = np.nonzero(dist <= r * (1 + 1e-9))[0]
        return geo.ConstraintGeometry(samples, idx), None
    if cfg.constraint == "two-points":
        pts, vals = np.array(cfg.constraint_points, dtype=float), None
    else:
        data = np.loadtxt(cfg.constraint_file, delimiter=",", skiprows=1, ndmin=2)
        pts = data[:, : domain.dim]
        vals = data[:, domain.dim] if data.shape[1] > domain.dim else None
    idx = geo.closest_point_projection(cloud, pts)
    idx, first = np.unique(idx, return_index=True)
    if vals is not None:
        vals = vals[first]
    return geo.ConstraintGeometry(pts, idx), vals


def build_labels(cfg, cloud, geom, file_values, ref):
    if geom is None:
        return None
    idx = geom.discrete_indices
    if cfg.task == "ground-state" or cfg.labels == "zero":
        vals = np.zeros(len(idx))
    elif cfg.labels == "values":
        if len(cfg.labels_values) != len(idx):
            raise ConfigError(f"labels.values has {len(cfg.labels_values)} entries for {len(idx)} labeled vertices")
        vals = np.array(cfg.labels_values)
    elif file_values is not None:
        vals = file_values
    else:
        vals = ref.eval(cloud.points[idx])
    return LabelSet(geom, vals)


# ---------------------------------------------------------------------------
# report


@dataclass
class ConvergenceReport:
    rows: list
    metadata: dict
    solutions: list = field(default_factory=list, repr=False)

    @property
    def statuses(self):
        return [row["status"] for row in self.rows]

    @property
    def all_disconnected(self):
        return bool(self.rows) and all(s == solvers.DISCONNECTED for s in self.statuses)

    @property
    def any_unconverged(self):
        return any(s == solvers.MAX_ITERATIONS for s in self.statuses)

    def column(self, name):
        return np.array([row[name] for row in self.rows], dtype=float)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for k, row in enumerate(self.rows):
            row = dict(row)
            sol = self.solutions[k] if k < len(self.solutions) else None
            if sol is not None:
                for name, arr in sol.items():
                    fname = f"{name}_{k}.csv"
                    write_function(out / fname, arr)
                    row[f"{name}_file"] = fname
            rows.append(row)
        payload = {"metadata": self.metadata, "columns": list(COLUMNS), "rows": [_jsonable(r) for r in rows]}
        with open(out / "report.json", "w") as fh:
            json.dump(payload, fh, indent=2)
        with open(out / "report.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for row in self.rows:
                writer.writerow([_fmt(row[c]) for c in COLUMNS])
        return out


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


# ---------------------------------------------------------------------------
# one cell


def _probes(domain, h):
    lo, hi = domain.bounding_box
    nodes = geo.lattice(lo, hi, h)
    return nodes[domain.closure_inside(nodes)]


def _continuum_distance(cfg, domain, ref, geom, probes, probe_h):
    if cfg.reference == "distance-to-boundary" and cfg.constraint == "boundary":
        return ref.eval(probes)
    field_ = cont.distance_to_constraint(domain, geom, probe_h)
    return field_.at(probes)


def run_cell(cfg, domain, kernel, ref, cell):
    t0 = time.perf_counter()
    cloud = sample_cell(cfg, domain, cell)
    probe_h = probe_spacing(cfg, domain, cloud, cell)
    r = geo.fill_distance(domain, cloud, probe_h)
    s = scaling_schedule(cfg.schedule, cfg.schedule_K, cfg.schedule_alpha, r)
    graph = build_graph(cloud, kernel, s)
    geom, file_values = build_constraint(cfg, domain, cloud, r)
    labels = build_labels(cfg, cloud, geom, file_values, ref)
    sigma = kernel.sigma
    extra = {"seed": _cell_seed(cfg, len(cloud)) if cfg.sampling in ("uniform", "halton") else None,
             "n_edges": graph.n_edges, "probe_h": probe_h}
    if geom is not None:
        extra["n_constraint"] = len(geom.discrete_indices)
        if len(geom.discrete_indices):
            dh = geo.hausdorff_distance(cloud.points[geom.discrete_indices], geom.continuum_set)
            extra["hausdorff"] = dh
            extra["hausdorff_over_s"] = dh / s
    sources = labels.indices if labels is not None and len(labels.indices) else np.array([0])
    reach = connectivity(graph, sources)
    status = solvers.CONVERGED if reach.connected else solvers.DISCONNECTED
    probes = _probes(domain, probe_h)
    value, target, sup_err, solution = np.nan, np.nan, np.nan, None

    if cfg.task == "ground-state":
        d_cont = _continuum_distance(cfg, domain, ref, geom, probes, probe_h)
        d_norm = solvers.lp_norm(d_cont, cfg.p)
        target = sigma / d_norm
        if reach.connected and len(labels.indices) < graph.n:
            gs = solvers.ground_state(graph, labels, cfg.p, cfg.norm, domain, probe_h)
            value = gs.eigenvalue
            sup_err = float(np.max(np.abs(evaluate_extension(graph, gs.state, probes) - d_cont / d_norm)))
            solution = {"state": gs.state, "distance": gs.distance}
            extra["norm"] = gs.norm
        else:
            status = solvers.DISCONNECTED
    else:
        if ref is not None:
            target = sigma * cont.continuum_functional(ref, domain, probe_h)
        if cfg.task == "functional":
            if ref is None:
                raise ConfigError("functional task needs a reference function")
            u = restrict_with_labels(graph, ref, labels)
            value = constrained_functional(graph, u, labels) if labels is not None else discrete_functional(graph, u)
            solution = {"function": u}
        elif cfg.task == "infinity-harmonic":
            rep = solvers.infinity_harmonic(graph, labels, cfg.tol, cfg.max_sweeps)
            value, status, u = rep.objective, rep.status, rep.solution
            extra.update(iterations=rep.iterations, residual=rep.residual)
            solution = {"function": u}
        else:
            u = None
            if reach.connected:
                side = "lower" if cfg.task == "mcshane-lower" else "upper"
                u = solvers.mcshane_extension(graph, labels, side)
                value = constrained_functional(graph, u, labels)
                solution = {"function": u}
        if cfg.task != "functional" and reach.connected:
            extra["lstar"] = solvers.optimal_lipschitz_constant(graph, labels)
        if ref is not None and solution is not None and status != solvers.DISCONNECTED:
            u = solution["function"]
            sup_err = float(np.max(np.abs(evaluate_extension(graph, u, probes) - ref.eval(probes))))

    row = {
        "n": len(cloud),
        "r": r,
        "s": s,
        "r_over_s": r / s,
        "value": float(value),
        "sigma_eta": sigma,
        "target": float(target),
        "abs_err": abs(float(value) - float(target)),
        "sup_err": sup_err,
        "status": status,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }
    row.update(extra)
    return row, solution


def _schedule_warnings(cfg, domain):
    out = []
    for cell in cfg.cells:
        if cfg.sampling == "grid":
            r = cell * math.sqrt(domain.dim) / 2
        elif cfg.sampling == "file":
            continue
        else:
            r = (domain.volume / cell) ** (1.0 / domain.dim)
        s = scaling_schedule(cfg.schedule, cfg.schedule_K, cfg.schedule_alpha, r)
        if r / s >= 1:
            out.append(f"estimated r/s = {r / s:.3g} >= 1 for size {cell}")
    return out


def run_experiment(cfg, threads=1):
    """Run every configured size; rows are ordered by size whatever the completion order."""
    domain = build_domain(cfg)
    kernel = build_kernel(cfg)
    ref = build_reference(cfg, domain)
    notes = _schedule_warnings(cfg, domain)
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    cells = list(cfg.cells)
    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: run_cell(cfg, domain, kernel, ref, c), cells))
    else:
        results = [run_cell(cfg, domain, kernel, ref, c) for c in cells]
    order = np.argsort([row["n"] for row, _ in results], kind="stable")
    rows = [results[k][0] for k in order]
    sols = [results[k][1] for k in order]
    meta = {
        "config": _jsonable(cfg.as_dict()),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "seeds": [row["seed"] for row in rows],
        "warnings": notes,
    }
    return ConvergenceReport(rows, meta, sols)


def hausdorff_audit(cfg):
    """Per size: d_H between constraint vertex positions and continuum samples, and d_H / s."""
    if cfg.constraint == "none":
        raise ConfigError("hausdorff audit needs a constraint")
    domain = build_domain(cfg)
    out = []
    for cell in cfg.cells:
        cloud = sample_cell(cfg, domain, cell)
        r = geo.fill_distance(domain, cloud, probe_spacing(cfg, domain, cloud, cell))
        s = scaling_schedule(cfg.schedule, cfg.schedule_K, cfg.schedule_alpha, r)
        geom, _ = build_constraint(cfg, domain, cloud, r)
        dh = geo.hausdorff_distance(cloud.points[geom.discrete_indices], geom.continuum_set)
        out.append({"n": len(cloud), "r": r, "s": s, "hausdorff": dh, "ratio": dh / s})
    return out
