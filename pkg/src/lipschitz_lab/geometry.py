"""Domains, point clouds and the metric quantities that parametrize every experiment.

Points are always ``(n, d)`` float arrays. Lattices are anchored at the lower
bounding-box corner and enumerated lexicographically (first coordinate major).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from ._shortest import dijkstra

CLOSURE_TOL = 1e-12


class GeometryError(ValueError):
    pass


def _as_points(points, dim=None):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim in (None, 1) else pts.reshape(1, -1)
    if dim is not None and pts.shape[1] != dim:
        raise GeometryError(f"expected {dim}-dimensional points, got shape {pts.shape}")
    return pts


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class Domain:
    """Bounded open region of R^d with exact membership predicates.

    ``kind`` is one of ``unit-box``, ``scaled-box``, ``l-shape``, ``polygon``.
    Polygonal kinds (2D boxes, the L-shape, polygons) carry their boundary
    vertices in counter-clockwise order.
    """

    kind: str
    dim: int
    lo: tuple
    hi: tuple
    vertices: tuple | None = None

    @property
    def bounding_box(self):
        return np.array(self.lo), np.array(self.hi)

    @property
    def volume(self):
        if self.vertices is not None:
            v = np.array(self.vertices)
            x, y = v[:, 0], v[:, 1]
            return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))

    def inside(self, points):
        pts = _as_points(points, self.dim)
        lo, hi = self.bounding_box
        if self.kind in ("unit-box", "scaled-box"):
            return np.all((pts > lo) & (pts < hi), axis=1)
        if self.kind == "l-shape":
            x1, x2 = pts[:, 0], pts[:, 1]
            square = np.maximum(np.abs(x1), np.abs(x2)) < 1.0
            notch = (x1 >= 0) & (x1 <= 1) & (x2 >= -1) & (x2 <= 0)
            return square & ~notch
        inner = _point_in_polygon(pts, np.array(self.vertices))
        return inner & (_polygon_boundary_distance(pts, np.array(self.vertices)) > 0)

    def closure_inside(self, points, tol=CLOSURE_TOL):
        pts = _as_points(points, self.dim)
        lo, hi = self.bounding_box
        if self.kind in ("unit-box", "scaled-box"):
            return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)
        if self.kind == "l-shape":
            x1, x2 = pts[:, 0], pts[:, 1]
            square = np.maximum(np.abs(x1), np.abs(x2)) <= 1.0 + tol
            return square & ~((x1 > tol) & (x2 < -tol))
        verts = np.array(self.vertices)
        return _point_in_polygon(pts, verts) | (_polygon_boundary_distance(pts, verts) <= tol)

    def boundary_segments(self):
        if self.vertices is None:
            raise GeometryError(f"{self.kind} domain in d={self.dim} has no polygonal boundary")
        v = np.array(self.vertices)
        return v, np.roll(v, -1, axis=0)

    def distance_to_boundary(self, points):
        """Euclidean distance to the boundary (equals the geodesic one for any point)."""
        pts = _as_points(points, self.dim)
        if self.vertices is None:
            lo, hi = self.bounding_box
            return np.minimum((pts - lo).min(axis=1), (hi - pts).min(axis=1))
        return _polygon_boundary_distance(pts, np.array(self.vertices))

    def sample_boundary(self, spacing):
        """Dense point sample of the boundary with gaps at most ``spacing``."""
        if self.vertices is None:
            lo, hi = self.bounding_box
            nodes = lattice(lo, hi, spacing, include_hi=True)
            on_face = np.any(np.isclose(nodes, lo) | np.isclose(nodes, hi), axis=1)
            return nodes[on_face]
        a, b = self.boundary_segments()
        out = []
        for p, q in zip(a, b):
            k = max(1, math.ceil(np.linalg.norm(q - p) / spacing))
            t = np.arange(k)[:, None] / k
            out.append(p + t * (q - p))
        return np.concatenate(out)


def unit_box(dim=2):
    lo, hi = (0.0,) * dim, (1.0,) * dim
    verts = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)) if dim == 2 else None
    return Domain("unit-box", dim, lo, hi, verts)


def scaled_box(lo, hi):
    lo, hi = tuple(float(v) for v in lo), tuple(float(v) for v in hi)
    if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
        raise GeometryError("box corners must satisfy lo < hi componentwise")
    verts = None
    if len(lo) == 2:
        verts = ((lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1]))
    return Domain("scaled-box", len(lo), lo, hi, verts)


def l_shape():
    """(-1,1)^2 with the closed quadrant [0,1]x[-1,0] removed."""
    verts = ((-1.0, -1.0), (0.0, -1.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0))
    return Domain("l-shape", 2, (-1.0, -1.0), (1.0, 1.0), verts)


def polygon(vertices):
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise GeometryError("polygon needs at least three 2D vertices")
    x, y = v[:, 0], v[:, 1]
    if np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)) < 0:
        v = v[::-1]
    verts = tuple(tuple(p) for p in v)
    return Domain("polygon", 2, tuple(v.min(axis=0)), tuple(v.max(axis=0)), verts)


def make_domain(kind, **params):
    if kind == "unit-box":
        return unit_box(int(params.get("dim", 2)))
    if kind == "scaled-box":
        return scaled_box(params["lo"], params["hi"])
    if kind == "l-shape":
        return l_shape()
    if kind == "polygon":
        return polygon(params["vertices"])
    raise GeometryError(f"unknown domain kind {kind!r}")


def _point_in_polygon(pts, verts):
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = verts[:, 0][None], verts[:, 1][None]
    x1, y1 = np.roll(verts[:, 0], -1)[None], np.roll(verts[:, 1], -1)[None]
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return (np.count_nonzero(crosses & (x < xint), axis=1) % 2) == 1


def _segment_distance(pts, a, b):
    ab = b - a
    t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)


def _polygon_boundary_distance(pts, verts):
    ends = np.roll(verts, -1, axis=0)
    return np.min([_segment_distance(pts, a, b) for a, b in zip(verts, ends)], axis=0)


# ---------------------------------------------------------------------------
# Point clouds


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    provenance: str = "explicit"
    seed: int | None = None

    def __post_init__(self):
        pts = _as_points(self.points).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class ConstraintGeometry:
    """Dense samples of the continuum constraint set plus the labeled vertex indices."""

    continuum_set: np.ndarray
    discrete_indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.discrete_indices, dtype=np.int64).ravel()
        if len(np.unique(idx)) != len(idx):
            raise GeometryError("constraint indices must be distinct")
        cs = _as_points(self.continuum_set)
        idx.setflags(write=False)
        cs.setflags(write=False)
        object.__setattr__(self, "discrete_indices", idx)
        object.__setattr__(self, "continuum_set", cs)

    def validate(self, cloud):
        if len(self.discrete_indices) and (
            self.discrete_indices.min() < 0 or self.discrete_indices.max() >= len(cloud)
        ):
            raise GeometryError("constraint index out of range")


def lattice(lo, hi, h, include_hi=True):
    """Axis-aligned lattice of spacing ``h`` anchored at ``lo``, lexicographic order."""
    lo, hi = np.atleast_1d(np.asarray(lo, float)), np.atleast_1d(np.asarray(hi, float))
    counts = np.floor((hi - lo) / h + 1e-9).astype(int) + (1 if include_hi else 0)
    axes = [lo[i] + h * np.arange(counts[i]) for i in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def sample_grid(domain, h):
    lo, hi = domain.bounding_box
    if h >= np.min(hi - lo):
        raise GeometryError("empty cloud: spacing not smaller than the shortest box side")
    nodes = lattice(lo, hi, h)
    pts = nodes[domain.closure_inside(nodes)]
    if len(pts) == 0:
        raise GeometryError("empty cloud")
    return PointCloud(pts, "grid")


def _rejection(domain, n, draw):
    lo, hi = domain.bounding_box
    accepted, tried = [], 0
    count = 0
    while count < n:
        batch = max(2 * (n - count), 64)
        cand = lo + (hi - lo) * draw(batch)
        tried += batch
        keep = cand[domain.inside(cand)]
        accepted.append(keep)
        count += len(keep)
        if tried >= 10**6 and count / tried < 1e-6:
            raise GeometryError("degenerate domain: rejection acceptance rate below 1e-6")
    return np.concatenate(accepted)[:n]


def sample_uniform(domain, n, seed):
    if n < 1:
        raise GeometryError("n must be positive")
    rng = np.random.default_rng(seed)
    pts = _rejection(domain, n, lambda m: rng.random((m, domain.dim)))
    if len(np.unique(pts, axis=0)) != len(pts):
        raise GeometryError("duplicate points drawn")
    return PointCloud(pts, "uniform", seed)


def sample_halton(domain, n, seed=0):
    if n < 1:
        raise GeometryError("n must be positive")
    sampler = qmc.Halton(d=domain.dim, scramble=True, seed=seed)
    pts = _rejection(domain, n, sampler.random)
    return PointCloud(pts, "halton", seed)


def read_cloud_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise GeometryError("column count does not match header")
    return PointCloud(data, "explicit")


def write_cloud_csv(path, cloud):
    header = ",".join(f"x{i}" for i in range(cloud.dim))
    np.savetxt(path, cloud.points, delimiter=",", header=header, comments="", fmt="%.17g")


# ---------------------------------------------------------------------------
# Nearest points


def _nearest(points, queries, tree=None):
    """Index and distance of the nearest point, ties to the smallest index.

    Candidate distances are recomputed as ``sum((p - q)**2)`` so the result is
    identical to an exhaustive scan with that formula.
    """
    points = _as_points(points)
    queries = _as_points(queries, points.shape[1])
    n = len(points)
    if n == 0:
        raise GeometryError("empty point set")
    tree = tree if tree is not None else cKDTree(points)
    k = min(n, 8)
    _, cand = tree.query(queries, k=k)
    cand = cand.reshape(len(queries), k)
    d2 = ((points[cand] - queries[:, None, :]) ** 2).sum(axis=-1)
    best = d2.min(axis=1)
    # smallest index among exact ties
    masked = np.where(d2 == best[:, None], cand, n)
    idx = masked.min(axis=1)
    if k < n:
        # the k-th candidate may be tied with (or closer than) the best: resolve exhaustively
        kth = np.sqrt(d2.max(axis=1))
        unsure = np.nonzero(kth <= np.sqrt(best) * (1 + 1e-9) + 1e-300)[0]
        for i in unsure:
            near = tree.query_ball_point(queries[i], np.sqrt(best[i]) * (1 + 1e-9) + 1e-12)
            near = np.array(sorted(near))
            dd = ((points[near] - queries[i]) ** 2).sum(axis=-1)
            j = np.argmin(dd)
            idx[i], best[i] = near[j], dd[j]
    return idx, np.sqrt(best)


def closest_point_projection(cloud, queries):
    pts = cloud.points if isinstance(cloud, PointCloud) else cloud
    idx, _ = _nearest(pts, queries)
    return idx


def fill_distance(domain, cloud, probe_h):
    """Max over a closure probe lattice of the distance to the nearest cloud point.

    A lower bound on the true fill distance with additive error at most
    ``probe_h * sqrt(d) / 2``.
    """
    lo, hi = domain.bounding_box
    probes = lattice(lo, hi, probe_h)
    probes = probes[domain.closure_inside(probes)]
    _, dist = _nearest(cloud.points, probes)
    return float(dist.max())


def hausdorff_distance(A, B):
    A, B = _as_points(A), _as_points(B)
    if len(A) == 0 or len(B) == 0:
        raise GeometryError("Hausdorff distance needs non-empty sets")
    _, ab = _nearest(B, A)
    _, ba = _nearest(A, B)
    return float(max(ab.max(), ba.max()))


# ---------------------------------------------------------------------------
# Geodesic distances on an auxiliary lattice


def stencil_offsets(dim, stencil):
    """Primitive integer offsets with max-norm <= stencil, one per +/- pair."""
    out = []
    for z in itertools.product(range(-stencil, stencil + 1), repeat=dim):
        z = np.array(z)
        if not z.any() or math.gcd(*np.abs(z)) != 1:
            continue
        first = z[np.nonzero(z)[0][0]]
        if first > 0:
            out.append(z)
    return np.array(out)


def stencil_overestimation(dim, stencil):
    """Worst ratio of lattice path length to Euclidean length for the stencil (2D exact)."""
    if dim == 1:
        return 1.0
    if dim == 2:
        z = stencil_offsets(2, stencil)
        ang = np.sort(np.mod(np.arctan2(z[:, 1], z[:, 0]), np.pi))
        gaps = np.diff(np.concatenate([ang, [ang[0] + np.pi]]))
        return 1.0 / math.cos(gaps.max() / 2)
    # 3D: bound by the covering angle of the 26-neighborhood
    return 1.0 / math.cos(math.atan(1 / math.sqrt(2)) / 2) if stencil == 1 else 1.0 / math.cos(
        math.atan(1 / (stencil * math.sqrt(2)))
    )


def segments_inside(domain, a, b, step):
    """Whether each segment a[i]-b[i] stays in the domain closure (checked every ``step``)."""
    a, b = _as_points(a, domain.dim), _as_points(b, domain.dim)
    length = np.linalg.norm(b - a, axis=1)
    k = max(2, int(math.ceil(length.max(initial=0.0) / step)) + 1)
    ok = np.ones(len(a), dtype=bool)
    for t in np.linspace(0.0, 1.0, k)[1:-1]:
        ok &= domain.closure_inside(a + t * (b - a))
    return ok & domain.closure_inside(a) & domain.closure_inside(b)


@dataclass(frozen=True, eq=False)
class _Mesh:
    nodes: np.ndarray
    shape: tuple
    grid_index: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    costs: np.ndarray
    h: float
    stencil: int
    tree: cKDTree = field(repr=False)


@functools.lru_cache(maxsize=16)
def _mesh(domain, h, stencil):
    lo, hi = domain.bounding_box
    nodes_all = lattice(lo, hi, h)
    counts = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
    keep = domain.closure_inside(nodes_all)
    grid_index = np.full(len(nodes_all), -1, dtype=np.int64)
    grid_index[keep] = np.arange(keep.sum())
    grid_index = grid_index.reshape(tuple(counts))
    nodes = nodes_all[keep]
    rows, cols, costs = [], [], []
    for z in stencil_offsets(domain.dim, stencil):
        src = [slice(max(0, -c), n - max(0, c)) for c, n in zip(z, counts)]
        dst = [slice(s.start + c, s.stop + c) for s, c in zip(src, z)]
        i = grid_index[tuple(src)].ravel()
        j = grid_index[tuple(dst)].ravel()
        both = (i >= 0) & (j >= 0)
        i, j = i[both], j[both]
        ok = segments_inside(domain, nodes[i], nodes[j], h / 4)
        i, j = i[ok], j[ok]
        c = h * float(np.linalg.norm(z))
        rows += [i, j]
        cols += [j, i]
        costs += [np.full(len(i), c)] * 2
    rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    costs = np.concatenate(costs) if costs else np.zeros(0)
    order = np.lexsort((cols, rows))
    rows, cols, costs = rows[order], cols[order], costs[order]
    indptr = np.searchsorted(rows, np.arange(len(nodes) + 1))
    nodes.setflags(write=False)
    return _Mesh(nodes, tuple(counts), grid_index, indptr, cols, costs, h, stencil, cKDTree(nodes))


@dataclass(frozen=True, eq=False)
class GeodesicField:
    """Distance values on the closure nodes of an auxiliary lattice."""

    nodes: np.ndarray
    values: np.ndarray
    mesh_h: float
    stencil: int
    overestimation: float

    @property
    def disconnected(self):
        return bool(np.isinf(self.values).any())

    def at(self, points):
        """Value at the nearest mesh node (error at most mesh_h*sqrt(d)/2 for 1-Lipschitz fields)."""
        idx, _ = _nearest(self.nodes, points)
        return self.values[idx]


def _source_labels(domain, mesh, sources):
    """Initial labels: exact Euclidean distance from each source to visible nearby nodes."""
    init = np.full(len(mesh.nodes), np.inf)
    radius = max(mesh.stencil, 1) * mesh.h * math.sqrt(domain.dim)
    for src in sources:
        near = np.array(mesh.tree.query_ball_point(src, radius), dtype=np.int64)
        if len(near) == 0:
            idx, _ = _nearest(mesh.nodes, src[None])
            near = idx
        d = np.sqrt(((mesh.nodes[near] - src) ** 2).sum(axis=-1))
        vis = segments_inside(domain, np.repeat(src[None], len(near), 0), mesh.nodes[near], mesh.h / 4)
        if not vis.any():
            vis[np.argmin(d)] = True
        np.minimum.at(init, near[vis], d[vis])
    return init


def geodesic_distance_field(domain, sources, mesh_h, stencil=2):
    """Multi-source in-domain path distance on a lattice with a ``stencil`` neighborhood.

    Lattice edges connect nodes whose offset has max-norm <= ``stencil`` and whose
    connecting segment stays in the closure; stencil 2 is the 16-neighborhood in 2D.
    Values over-estimate the geodesic distance by at most the factor
    ``stencil_overestimation(d, stencil)``; unreachable nodes hold ``inf``.
    """
    sources = _as_points(sources, domain.dim)
    if len(sources) == 0:
        raise GeometryError("no sources")
    if not domain.closure_inside(sources, tol=1e-9).all():
        raise GeometryError("source outside the domain closure")
    mesh = _mesh(domain, float(mesh_h), int(stencil))
    init = _source_labels(domain, mesh, sources)
    values = dijkstra(mesh.indptr, mesh.indices, mesh.costs, init)
    values.setflags(write=False)
    return GeodesicField(
        mesh.nodes, values, float(mesh_h), int(stencil), stencil_overestimation(domain.dim, stencil)
    )


def _node_field(mesh, node, limit=np.inf):
    init = np.full(len(mesh.nodes), np.inf)
    init[node] = 0.0
    return dijkstra(mesh.indptr, mesh.indices, mesh.costs, init, limit)


def domain_condition_ratio(domain, delta, mesh_h, stencil=2):
    """Max of geodesic over Euclidean distance for mesh-node pairs closer than ``delta``.

    Pairs joined by a segment inside the closure have ratio exactly 1; only pairs
    whose segment leaves the domain are measured with lattice geodesics. Values
    near 1 indicate the local coincidence of geodesic and Euclidean distance.
    """
    if mesh_h > delta / 10 + 1e-15:
        raise GeometryError("mesh_h must be at most delta/10")
    mesh = _mesh(domain, float(mesh_h), int(stencil))
    lo, hi = domain.bounding_box
    probe = lattice(lo, hi, mesh_h)
    outside = probe[~domain.closure_inside(probe)]
    if len(outside) == 0 or len(mesh.nodes) < 2:
        return 1.0
    margin = delta + mesh_h * math.sqrt(domain.dim)
    d_out, _ = cKDTree(outside).query(mesh.nodes, distance_upper_bound=margin)
    cand = np.nonzero(np.isfinite(d_out))[0]
    ratio = 1.0
    cand_tree = cKDTree(mesh.nodes[cand])
    pairs = cand_tree.query_pairs(delta, output_type="ndarray")
    if len(pairs) == 0:
        return ratio
    i, j = cand[pairs[:, 0]], cand[pairs[:, 1]]
    eucl = np.sqrt(((mesh.nodes[i] - mesh.nodes[j]) ** 2).sum(axis=-1))
    keep = eucl < delta
    i, j, eucl = i[keep], j[keep], eucl[keep]
    hidden = ~segments_inside(domain, mesh.nodes[i], mesh.nodes[j], mesh_h / 4)
    i, j, eucl = i[hidden], j[hidden], eucl[hidden]
    limit = 4 * delta
    for src in np.unique(i):
        sel = i == src
        dist = _node_field(mesh, src, limit)
        dj = dist[j[sel]]
        if np.any(dj > limit):
            dj = _node_field(mesh, src)[j[sel]]
        ratio = max(ratio, float(np.max(dj / eucl[sel])))
    return ratio


def geodesic_diameter(domain, mesh_h, stencil=2):
    """Largest lattice geodesic distance, seeded from every boundary-adjacent node."""
    mesh = _mesh(domain, float(mesh_h), int(stencil))
    gi = mesh.grid_index
    padded = np.pad(gi, 1, constant_values=-1)
    boundary = np.zeros(gi.shape, dtype=bool)
    for axis in range(gi.ndim):
        for shift in (-1, 1):
            nb = np.roll(padded, shift, axis=axis)[tuple(slice(1, -1) for _ in range(gi.ndim))]
            boundary |= nb < 0
    seeds = gi[boundary & (gi >= 0)]
    best = 0.0
    for s in seeds:
        dist = _node_field(mesh, s)
        if np.isinf(dist).any():
            raise GeometryError("mesh is disconnected")
        best = max(best, float(dist.max()))
    return best
