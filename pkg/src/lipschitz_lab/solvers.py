"""Minimizers of the constrained graph Lipschitz problem and graph ground states.

Three minimizers are exposed: the graph infinity-harmonic extension and the
lower/upper McShane-Whitney extensions with respect to the graph metric. All of
them attain the optimal constant ``L*`` certified by ``optimal_lipschitz_constant``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numba
import numpy as np

from ._shortest import dijkstra
from .geometry import lattice
from .graph import (
    closest_point_projection,
    connectivity,
    constrained_functional,
    discrete_functional,
    graph_distance,
    write_function,
)

CONVERGED, MAX_ITERATIONS, DISCONNECTED = "converged", "max-iterations", "disconnected"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: np.ndarray
    objective: float
    iterations: int
    residual: float
    status: str

    def to_json(self, path, solution_path):
        write_function(solution_path, self.solution)
        with open(path, "w") as fh:
            json.dump(
                {
                    "status": self.status,
                    "objective": _finite_or_str(self.objective),
                    "iterations": self.iterations,
                    "residual": _finite_or_str(self.residual),
                    "solution_path": str(solution_path),
                },
                fh,
                indent=2,
            )


@dataclass(frozen=True, eq=False)
class GroundStateReport:
    state: np.ndarray
    eigenvalue: float
    p: float
    norm_kind: str
    distance: np.ndarray
    norm: float

    def to_json(self, path, solution_path):
        write_function(solution_path, self.state)
        with open(path, "w") as fh:
            json.dump(
                {
                    "status": CONVERGED,
                    "eigenvalue": self.eigenvalue,
                    "iterations": 1,
                    "residual": 0.0,
                    "p": self.p,
                    "norm_kind": self.norm_kind,
                    "solution_path": str(solution_path),
                },
                fh,
                indent=2,
            )


def _finite_or_str(x):
    return float(x) if np.isfinite(x) else str(x)


# ---------------------------------------------------------------------------
# infinity-harmonic extension


@numba.njit(cache=True)
def _local_root(u, nbrs, w):
    # root of t -> max w*(u_y - t) + min w*(u_y - t), continuous and strictly decreasing
    lo = np.inf
    hi = -np.inf
    wmin = np.inf
    wmax = -np.inf
    for k in range(nbrs.shape[0]):
        val = u[nbrs[k]]
        lo = min(lo, val)
        hi = max(hi, val)
        wmin = min(wmin, w[k])
        wmax = max(wmax, w[k])
    if wmin == wmax:
        # equal weights: the root is the midrange exactly
        return 0.5 * (lo + hi)
    while hi - lo > 1e-14:
        t = 0.5 * (lo + hi)
        if t <= lo or t >= hi:
            break
        mx = -np.inf
        mn = np.inf
        for k in range(nbrs.shape[0]):
            d = w[k] * (u[nbrs[k]] - t)
            mx = max(mx, d)
            mn = min(mn, d)
        if mx + mn > 0:
            lo = t
        else:
            hi = t
    return 0.5 * (lo + hi)


@numba.njit(cache=True)
def _gauss_seidel(indptr, indices, weights, u, fixed, stop, max_sweeps):
    n = u.shape[0]
    delta = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        delta = 0.0
        for v in range(n):
            if fixed[v] or indptr[v] == indptr[v + 1]:
                continue
            t = _local_root(u, indices[indptr[v] : indptr[v + 1]], weights[indptr[v] : indptr[v + 1]])
            delta = max(delta, abs(t - u[v]))
            u[v] = t
        if delta <= stop:
            break
    return sweeps, delta


def infinity_harmonic(graph, labels, tol=1e-8, max_sweeps=100_000):
    """Graph infinity-Laplace extension of the labels by Gauss-Seidel sweeps in index order.

    Each vertex update solves ``max_y w(u_y - t) + min_y w(u_y - t) = 0`` by bisection
    between the smallest and largest neighbor value (the midrange when all weights
    agree). Updates are measured in units of the functional, ``eta(0) * |du| / s``;
    sweeping stops once the largest of a sweep is at most ``tol`` and that value is
    reported as ``residual``.
    """
    idx = labels.indices
    if len(idx) == 0:
        raise SolverError("at least one label is required")
    u = np.full(graph.n, float(np.mean(labels.values)))  # constant labels are a fixed point
    u[idx] = labels.values
    fixed = np.zeros(graph.n, dtype=bool)
    fixed[idx] = True
    reach = connectivity(graph, idx)
    if not reach.connected:
        obj = constrained_functional(graph, u, labels)
        return SolveReport(u, obj, 0, np.inf, DISCONNECTED)
    unit = graph.kernel.eta0 / graph.scale
    sweeps, delta = _gauss_seidel(
        graph.indptr, graph.indices, graph.adj_weight, u, fixed, float(tol) / unit, int(max_sweeps)
    )
    delta *= unit
    status = CONVERGED if delta <= tol else MAX_ITERATIONS
    u.setflags(write=False)
    return SolveReport(u, constrained_functional(graph, u, labels), int(sweeps), float(delta), status)


def infinity_laplacian(graph, u):
    """max_y w(u_y - u_x) + min_y w(u_y - u_x) at every vertex (0 on isolated vertices)."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros(graph.n)
    rows = np.repeat(np.arange(graph.n), np.diff(graph.indptr))
    diff = graph.adj_weight * (u[graph.indices] - u[rows])
    has = np.diff(graph.indptr) > 0
    starts = graph.indptr[:-1][has]
    out[has] = np.maximum.reduceat(diff, starts) + np.minimum.reduceat(diff, starts)
    return out


# ---------------------------------------------------------------------------
# optimal constant and McShane-Whitney extensions


def _label_distances(graph, idx):
    """Graph distances between labeled vertices, one Dijkstra per labeled source."""
    out = np.empty((len(idx), len(idx)))
    for a, p in enumerate(idx):
        init = np.full(graph.n, np.inf)
        init[p] = 0.0
        out[a] = dijkstra(graph.indptr, graph.indices, graph.adj_cost, init)[idx]
    return out


def optimal_lipschitz_constant(graph, labels):
    """L* = max over labeled pairs of |g_p - g_q| / d_graph(p, q), the minimum of Phi_n,cons."""
    idx, g = labels.indices, labels.values
    if len(idx) < 2:
        return 0.0
    dist = _label_distances(graph, idx)
    off = ~np.eye(len(idx), dtype=bool)
    if np.isinf(dist[off]).any():
        raise SolverError("labeled vertices are not mutually reachable")
    diff = np.abs(g[:, None] - g[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diff[off] > 0, diff[off] / dist[off], 0.0)
    if np.isinf(ratio).any():
        raise SolverError("distinct labels on coincident vertices")
    return float(ratio.max())


def mcshane_extension(graph, labels, side="upper", lipschitz=None):
    """Extremal extension: upper min_p(g_p + L* d(x,p)), lower max_p(g_p - L* d(x,p))."""
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    idx, g = labels.indices, labels.values
    L = optimal_lipschitz_constant(graph, labels) if lipschitz is None else float(lipschitz)
    sign = 1.0 if side == "upper" else -1.0
    init = np.full(graph.n, np.inf)
    np.minimum.at(init, idx, sign * g)
    psi = dijkstra(graph.indptr, graph.indices, L * graph.adj_cost, init)
    if np.isinf(psi).any():
        raise SolverError("vertices unreachable from the labels")
    psi = sign * psi
    psi[idx] = g
    psi.setflags(write=False)
    return psi


# ---------------------------------------------------------------------------
# ground states


def voronoi_weights(graph, domain, probe_h):
    """Cell volume fractions of the closest point projection, by probe-lattice counting."""
    lo, hi = domain.bounding_box
    probes = lattice(lo, hi, probe_h)
    probes = probes[domain.closure_inside(probes)]
    counts = np.bincount(closest_point_projection(graph.cloud, probes), minlength=graph.n)
    return counts / counts.sum()


def lp_norm(u, p, weights=None):
    u = np.abs(np.asarray(u, dtype=np.float64))
    w = np.full(len(u), 1.0 / len(u)) if weights is None else np.asarray(weights)
    return float(np.sum(w * u**p) ** (1.0 / p))


def ground_state(graph, labels, p=2.0, norm_kind="empirical", domain=None, probe_h=None):
    """Normalized graph distance to the constraint vertices and its Rayleigh value.

    Requires zero labels. The state is ``d / ||d||_p`` and the eigenvalue
    ``Phi_n(state)``, which equals ``1 / ||d||_p``.
    """
    if not 1 <= p < np.inf:
        raise ValueError("p must lie in [1, inf)")
    idx = labels.indices
    if np.any(labels.values != 0):
        raise SolverError("ground states require zero labels")
    if len(idx) == 0 or len(idx) == graph.n:
        raise SolverError("need at least one constrained and one free vertex")
    d = graph_distance(graph, idx)
    bad = np.nonzero(np.isinf(d))[0]
    if len(bad):
        raise SolverError(f"vertex {bad[0]} is unreachable from the constraint set")
    if norm_kind == "empirical":
        weights = None
    elif norm_kind == "voronoi-weighted":
        if domain is None or probe_h is None:
            raise ValueError("voronoi-weighted norm needs a domain and probe_h")
        weights = voronoi_weights(graph, domain, probe_h)
    else:
        raise ValueError(f"unknown norm kind {norm_kind!r}")
    norm = lp_norm(d, p, weights)
    state = d / norm
    state.setflags(write=False)
    return GroundStateReport(state, discrete_functional(graph, state), float(p), norm_kind, d, norm)
