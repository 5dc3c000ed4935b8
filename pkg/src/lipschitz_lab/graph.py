"""Weighted geometric graphs at scale s, the discrete Lipschitz functionals and graph distances.

Edge weights are ``omega = eta(|x - y| / s)`` and edge costs ``s / omega``: the bound
``Phi_n(u) <= L`` holds exactly when ``|u_i - u_j| <= L * cost_ij`` on every edge, so
the graph metric with these costs is the dual object of the functional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._shortest import dijkstra
from .geometry import ConstraintGeometry, PointCloud, closest_point_projection


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    cloud: PointCloud
    scale: float
    kernel: object
    # edge list, i < j, lexicographically sorted
    i: np.ndarray
    j: np.ndarray
    dist: np.ndarray
    weight: np.ndarray
    cost: np.ndarray
    # symmetric CSR adjacency
    indptr: np.ndarray
    indices: np.ndarray
    adj_weight: np.ndarray
    adj_cost: np.ndarray

    @property
    def n(self):
        return len(self.cloud)

    @property
    def n_edges(self):
        return len(self.i)

    def neighbors(self, v):
        sl = slice(self.indptr[v], self.indptr[v + 1])
        return self.indices[sl], self.adj_weight[sl]


def _pair_dist(points, i, j):
    return np.sqrt(((points[i] - points[j]) ** 2).sum(axis=-1))


def _assemble(cloud, kernel, scale, i, j):
    pts = cloud.points
    dist = _pair_dist(pts, i, j)
    weight = kernel.eval(dist / scale)
    keep = weight > 0
    i, j, dist, weight = i[keep], j[keep], dist[keep], weight[keep]
    order = np.lexsort((j, i))
    i, j, dist, weight = i[order], j[order], dist[order], weight[order]
    cost = scale / weight
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    aw = np.concatenate([weight, weight])[order]
    ac = np.concatenate([cost, cost])[order]
    indptr = np.searchsorted(rows, np.arange(len(cloud) + 1)).astype(np.int64)
    arrays = (i, j, dist, weight, cost, indptr, cols, aw, ac)
    for a in arrays:
        a.setflags(write=False)
    return GeometricGraph(cloud, float(scale), kernel, *arrays)


def build_graph(cloud, kernel, scale):
    """All pairs with ``eta(|x - y| / scale) > 0``, found with a k-d tree range search."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if len(cloud) < 2:
        raise ValueError("graph construction needs at least two points")
    reach = scale * kernel.radius * (1 + 1e-9)
    pairs = cKDTree(cloud.points).query_pairs(reach, output_type="ndarray").astype(np.int64)
    if len(pairs) == 0:
        pairs = np.zeros((0, 2), dtype=np.int64)
    lo, hi = pairs.min(axis=1), pairs.max(axis=1)
    return _assemble(cloud, kernel, scale, lo, hi)


def build_graph_bruteforce(cloud, kernel, scale):
    """O(n^2) reference construction over every pair."""
    n = len(cloud)
    i, j = np.triu_indices(n, k=1)
    return _assemble(cloud, kernel, scale, i.astype(np.int64), j.astype(np.int64))


@dataclass(frozen=True, eq=False)
class LabelSet:
    geometry: ConstraintGeometry
    values: np.ndarray
    lipschitz_bound: float | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        if len(vals) != len(self.geometry.discrete_indices):
            raise ValueError("one label value per constraint index required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("label values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def indices(self):
        return self.geometry.discrete_indices

    @classmethod
    def from_indices(cls, cloud, indices, values, continuum_set=None, lipschitz_bound=None):
        indices = np.asarray(indices, dtype=np.int64)
        if continuum_set is None:
            continuum_set = cloud.points[indices] if len(indices) else np.zeros((0, cloud.dim))
        geom = ConstraintGeometry(continuum_set, indices)
        geom.validate(cloud)
        return cls(geom, values, lipschitz_bound)


def _check(graph, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (graph.n,):
        raise ValueError(f"graph function has shape {u.shape}, expected ({graph.n},)")
    return u


def discrete_functional(graph, u):
    """(1/s) * max over edges of omega * |u_i - u_j|; zero on edgeless graphs."""
    u = _check(graph, u)
    if graph.n_edges == 0:
        return 0.0
    return float(np.max(graph.weight * np.abs(u[graph.i] - u[graph.j])) / graph.scale)


def constrained_functional(graph, u, labels, constraint_tol=0.0):
    u = _check(graph, u)
    idx = labels.indices
    if len(idx) and np.max(np.abs(u[idx] - labels.values)) > constraint_tol:
        return np.inf
    return discrete_functional(graph, u)


def graph_distance(graph, source_indices):
    """Multi-source shortest-path distance with edge costs s/omega; ``inf`` where unreachable."""
    src = np.asarray(source_indices, dtype=np.int64).ravel()
    if len(src) == 0:
        raise ValueError("no sources")
    if src.min() < 0 or src.max() >= graph.n:
        raise ValueError("source index out of range")
    init = np.full(graph.n, np.inf)
    init[src] = 0.0
    return dijkstra(graph.indptr, graph.indices, graph.adj_cost, init)


def offset_distance(graph, source_indices, offsets):
    """min_p (offsets[p] + d_graph(x, p)), the shortest-path value with per-source start labels."""
    src = np.asarray(source_indices, dtype=np.int64).ravel()
    init = np.full(graph.n, np.inf)
    np.minimum.at(init, src, np.asarray(offsets, dtype=np.float64))
    return dijkstra(graph.indptr, graph.indices, graph.adj_cost, init)


@dataclass(frozen=True)
class ConnectivityReport:
    reachable_count: int
    unreachable_indices: np.ndarray

    @property
    def connected(self):
        return len(self.unreachable_indices) == 0


def connectivity(graph, source_indices):
    src = np.asarray(source_indices, dtype=np.int64).ravel()
    seen = np.zeros(graph.n, dtype=bool)
    seen[src] = True
    frontier = np.unique(src)
    while len(frontier):
        nbrs = _expand(graph, frontier)
        new = np.unique(nbrs[~seen[nbrs]])
        seen[new] = True
        frontier = new
    return ConnectivityReport(int(seen.sum()), np.nonzero(~seen)[0])


def _expand(graph, frontier):
    starts, stops = graph.indptr[frontier], graph.indptr[frontier + 1]
    lens = stops - starts
    if lens.sum() == 0:
        return np.zeros(0, dtype=np.int64)
    offs = np.repeat(starts - np.cumsum(np.concatenate([[0], lens[:-1]])), lens)
    return graph.indices[np.arange(lens.sum()) + offs]


def evaluate_extension(graph, u, queries):
    """Piecewise-constant extension u(p_n(x)) through the closest point projection."""
    u = _check(graph, u)
    return u[closest_point_projection(graph.cloud, queries)]


def write_graph(path_csv, path_json, graph):
    header = {
        "n": graph.n,
        "scale": graph.scale,
        "kernel_kind": graph.kernel.kind,
        "radius": graph.kernel.radius,
    }
    with open(path_json, "w") as fh:
        json.dump(header, fh, indent=2)
    with open(path_csv, "w") as fh:
        fh.write("i,j,dist,omega,cost\n")
        for row in zip(graph.i, graph.j, graph.dist, graph.weight, graph.cost):
            i, j, d, w, c = row
            fh.write(f"{i},{j},{float(d)!r},{float(w)!r},{float(c)!r}\n")


def write_function(path, u):
    with open(path, "w") as fh:
        fh.write("index,value\n")
        for k, v in enumerate(np.asarray(u, dtype=np.float64)):
            fh.write(f"{k},{float(v)!r}\n")


def read_function(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    u = np.empty(len(data))
    u[data[:, 0].astype(int)] = data[:, 1]
    return u
