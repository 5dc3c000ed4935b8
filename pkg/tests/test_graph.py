import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from lipschitz_lab import geometry as G
from lipschitz_lab.graph import (
    LabelSet,
    build_graph,
    build_graph_bruteforce,
    connectivity,
    constrained_functional,
    discrete_functional,
    evaluate_extension,
    graph_distance,
    read_function,
    write_function,
    write_graph,
)
from lipschitz_lab.kernels import make_kernel

from oracles import ETA, allpairs_edges, allpairs_functional, bellman_ford, path_enumeration

FROZEN = json.loads((Path(__file__).parent / "data" / "frozen.json").read_text())
KINDS = ("indicator", "tent", "truncated-exponential")
IND = make_kernel("indicator")


def line(xs):
    return G.PointCloud(np.array(xs, dtype=float)[:, None])


def random_graph(seed, n_max=12, dim=2):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    kind = KINDS[int(rng.integers(3))]
    cloud = G.PointCloud(rng.random((n, dim)))
    return build_graph(cloud, make_kernel(kind), float(rng.uniform(0.15, 0.8))), rng


# --- construction ------------------------------------------------------------


def test_three_point_example():
    g = build_graph(line([0, 0.4, 0.8]), IND, 0.5)
    assert list(zip(g.i, g.j)) == [(0, 1), (1, 2)]
    assert g.weight.tolist() == [1.0, 1.0] and g.cost.tolist() == [0.5, 0.5]
    assert build_graph(line([0, 0.4, 0.8]), IND, 0.3).n_edges == 0


def test_construction_random_tent_200():
    rng = np.random.default_rng(3)
    cloud = G.PointCloud(rng.random((200, 2)))
    k = make_kernel("tent")
    g = build_graph(cloud, k, 0.12)
    oracle = allpairs_edges(cloud.points, ETA["tent"], 0.12)
    got = {(int(i), int(j)): (d, w, c) for i, j, d, w, c in zip(g.i, g.j, g.dist, g.weight, g.cost)}
    assert got == oracle


def _assert_same_edges(g, oracle):
    got = {(int(i), int(j)): (float(d), float(w), float(c)) for i, j, d, w, c in zip(g.i, g.j, g.dist, g.weight, g.cost)}
    assert got == oracle


def test_construction_oracle_50_instances():
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n = int(rng.integers(2, 301))
        dim = int(rng.integers(1, 4))
        kind = KINDS[trial % 3]
        pts = rng.random((n, dim))
        if trial % 5 == 0:  # lattice points put many pairs exactly on the support radius
            pts = np.round(pts * 8) / 8
            pts = np.unique(pts, axis=0)
        cloud = G.PointCloud(pts)
        if len(cloud) < 2:
            continue
        scale = float(rng.choice([0.125, 0.25, rng.uniform(0.05, 0.4)]))
        g = build_graph(cloud, make_kernel(kind), scale)
        _assert_same_edges(g, allpairs_edges(cloud.points, ETA[kind], scale))
        b = build_graph_bruteforce(cloud, make_kernel(kind), scale)
        assert np.array_equal(g.indices, b.indices) and np.array_equal(g.adj_cost, b.adj_cost)


def test_construction_frozen():
    inst = FROZEN["instance"]
    g = build_graph(G.PointCloud(inst["points"]), make_kernel(inst["kernel"]), inst["scale"])
    assert [[int(i), int(j), float(d), float(w), float(c)] for i, j, d, w, c in zip(g.i, g.j, g.dist, g.weight, g.cost)] \
        == inst["edges"]


def test_graph_invariants():
    for seed in range(20):
        g, _ = random_graph(seed, 60)
        assert np.all(g.i < g.j)
        assert np.all((g.weight > 0) & (g.weight <= g.kernel.eta0))
        assert np.all(g.cost > 0)
        assert np.allclose(g.cost, g.scale / g.weight, rtol=0, atol=0)
        # c >= |x - y| / sigma_eta since omega*|x-y|/s <= sigma_eta
        assert np.all(g.cost * g.kernel.sigma >= g.dist * (1 - 1e-12))


def test_build_preconditions():
    with pytest.raises(ValueError):
        build_graph(line([0, 1]), IND, 0)
    with pytest.raises(ValueError):
        build_graph(line([0]), IND, 1)


# --- functionals -------------------------------------------------------------


def test_functional_example():
    g = build_graph(line([0, 0.4, 0.8]), IND, 0.5)
    assert discrete_functional(g, [0, 1, 1]) == 2
    assert discrete_functional(g, [3, 3, 3]) == 0


def test_functional_edgeless_is_zero():
    g = build_graph(line([0, 0.4, 0.8]), IND, 0.3)
    assert discrete_functional(g, [0, 5, -1]) == 0


def test_functional_matches_allpairs():
    rng = np.random.default_rng(7)
    for trial in range(60):
        g, _ = random_graph(trial, 40)
        u = rng.normal(size=g.n)
        assert discrete_functional(g, u) == allpairs_functional(g.cloud.points, ETA[g.kernel.kind], g.scale, u)


def test_functional_frozen():
    inst = FROZEN["instance"]
    g = build_graph(G.PointCloud(inst["points"]), make_kernel(inst["kernel"]), inst["scale"])
    assert discrete_functional(g, inst["functional_u"]) == inst["functional"]


def test_constrained_functional():
    g = build_graph(line([0, 0.4, 0.8]), IND, 0.5)
    labels = LabelSet.from_indices(g.cloud, [0, 2], [0.0, 1.0])
    assert constrained_functional(g, [0, 0.5, 1], labels) == discrete_functional(g, [0, 0.5, 1])
    assert constrained_functional(g, [0, 0.5, 1.1], labels) == np.inf
    assert constrained_functional(g, [0, 0.5, 1 + 1e-9], labels, constraint_tol=1e-6) < np.inf
    assert constrained_functional(g, [0, 7.0, 1], labels) == discrete_functional(g, [0, 7.0, 1])


def test_function_shape_checked():
    g = build_graph(line([0, 0.4, 0.8]), IND, 0.5)
    with pytest.raises(ValueError):
        discrete_functional(g, [0, 1])


# --- distances ---------------------------------------------------------------


def test_chain_distances():
    g = build_graph(line([0, 0.25, 0.5, 0.75, 1]), IND, 0.3)
    assert graph_distance(g, [0]).tolist() == pytest.approx([0, 0.3, 0.6, 0.9, 1.2], abs=1e-15)
    assert graph_distance(g, range(5)).tolist() == [0] * 5


def test_distance_oracle_100_instances():
    rng = np.random.default_rng(99)
    for trial in range(100):
        n = int(rng.integers(2, 11))
        kind = KINDS[trial % 3]
        cloud = G.PointCloud(rng.random((n, 2)))
        g = build_graph(cloud, make_kernel(kind), float(rng.uniform(0.2, 0.9)))
        src = rng.choice(n, size=int(rng.integers(1, 3)), replace=False)
        edges = list(zip(g.i.tolist(), g.j.tolist(), g.cost.tolist()))
        d = graph_distance(g, src)
        assert np.array_equal(d, bellman_ford(n, edges, src))
        if n <= 8:
            assert np.array_equal(d, path_enumeration(n, edges, src))


def test_distance_frozen():
    inst = FROZEN["instance"]
    g = build_graph(G.PointCloud(inst["points"]), make_kernel(inst["kernel"]), inst["scale"])
    assert graph_distance(g, [0]).tolist() == inst["distance_from_0"]
    assert graph_distance(g, [3, 7]).tolist() == inst["distance_from_3_7"]


def test_distance_tight_exact_dyadic():
    # dyadic lattice + indicator kernel: every cost is s and every path sum is exact
    for h, s in ((0.125, 0.25), (0.0625, 0.125), (0.25, 0.5)):
        for dom in (G.unit_box(2), G.l_shape()):
            g = build_graph(G.sample_grid(dom, h), IND, s)
            for src in ([0], [g.n // 2], [1, g.n - 1]):
                d = graph_distance(g, src)
                assert np.isfinite(d).all()
                assert discrete_functional(g, d) == 1.0


def test_distance_tight_random():
    checked = 0
    for seed in range(300):
        g, rng = random_graph(seed, 40)
        src = rng.choice(g.n, size=int(rng.integers(1, 3)), replace=False)
        d = graph_distance(g, src)
        if not np.isfinite(d).all() or len(src) == g.n:
            continue
        checked += 1
        assert abs(discrete_functional(g, d) - 1.0) <= 1e-12
    assert checked >= 50


def test_distance_errors():
    g = build_graph(line([0, 0.4, 0.8]), IND, 0.5)
    with pytest.raises(ValueError):
        graph_distance(g, [])
    with pytest.raises(ValueError):
        graph_distance(g, [5])


def test_unreachable_is_inf():
    g = build_graph(line([0, 0.1, 5, 5.1]), IND, 0.5)
    assert np.isinf(graph_distance(g, [0])[2:]).all()


# --- connectivity and extension ---------------------------------------------


def test_connectivity():
    chain = build_graph(line([0, 0.25, 0.5, 0.75, 1]), IND, 0.3)
    assert connectivity(chain, [0]).connected
    sparse = build_graph(line([0, 0.25, 0.5]), IND, 0.1)
    rep = connectivity(sparse, [0])
    assert rep.reachable_count == 1 and rep.unreachable_indices.tolist() == [1, 2]
    clusters = build_graph(line([0, 0.1, 0.2, 5, 5.1]), IND, 0.5)
    assert connectivity(clusters, [1]).unreachable_indices.tolist() == [3, 4]


def test_extension_examples():
    g = build_graph(line([0, 1]), IND, 2)
    assert evaluate_extension(g, [0, 5], [[0.3]]).tolist() == [0]
    assert evaluate_extension(g, [0, 5], [[1.0], [0.0]]).tolist() == [5, 0]


# --- I/O -----------------------------------------------------------------------


def test_graph_dump(tmp_path):
    g = build_graph(line([0, 0.4, 0.8]), make_kernel("tent"), 0.5)
    write_graph(tmp_path / "g.csv", tmp_path / "g.json", g)
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "i,j,dist,omega,cost" and len(lines) == 3
    head = json.loads((tmp_path / "g.json").read_text())
    assert head == {"n": 3, "scale": 0.5, "kernel_kind": "tent", "radius": 1.0}
    row = lines[1].split(",")
    assert float(row[4]) == g.cost[0]


def test_function_roundtrip(tmp_path):
    u = np.random.default_rng(0).normal(size=17)
    write_function(tmp_path / "u.csv", u)
    assert np.array_equal(read_function(tmp_path / "u.csv"), u)


# --- properties --------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.sampled_from([-2.0, -1.0, 0.5, 3.0]))
def test_homogeneity(seed, c):
    g, rng = random_graph(seed, 30)
    u = rng.normal(size=g.n)
    assert discrete_functional(g, c * u) == pytest.approx(abs(c) * discrete_functional(g, u), rel=1e-14, abs=0)


@given(seeds, st.floats(-1e3, 1e3))
def test_translation_invariance(seed, c):
    g, rng = random_graph(seed, 30)
    u = rng.integers(-1000, 1000, size=g.n).astype(float)  # integers: shifts are exact
    assert discrete_functional(g, u + round(c)) == discrete_functional(g, u)
    v = rng.normal(size=g.n)
    assert discrete_functional(g, v + c) == pytest.approx(discrete_functional(g, v), rel=1e-9, abs=1e-9)


@given(seeds)
def test_triangle_inequality(seed):
    g, rng = random_graph(seed, 30)
    u, v = rng.normal(size=g.n), rng.normal(size=g.n)
    assert discrete_functional(g, u + v) <= (discrete_functional(g, u) + discrete_functional(g, v)) * (1 + 1e-14)


@given(seeds, st.floats(0.01, 10))
def test_edge_cost_duality(seed, amp):
    g, rng = random_graph(seed, 30)
    assume(g.n_edges > 0)
    u = amp * rng.normal(size=g.n)
    diff = np.abs(u[g.i] - u[g.j])
    by_cost = diff <= g.cost
    by_weight = g.weight * diff / g.scale <= 1
    # the two forms may only disagree on an edge that is tight to rounding
    tight = np.isclose(diff, g.cost, rtol=1e-14, atol=0)
    assert np.all((by_cost == by_weight) | tight)
    phi = discrete_functional(g, u)
    if abs(phi - 1) > 1e-12:
        assert (phi <= 1) == bool(by_cost.all())


@given(seeds)
def test_distance_triangle(seed):
    g, rng = random_graph(seed, 25)
    a, b, c = rng.integers(0, g.n, size=3)
    da, db = graph_distance(g, [a]), graph_distance(g, [b])
    if np.isfinite(da[b]) and np.isfinite(db[c]):
        assert da[c] <= (da[b] + db[c]) * (1 + 1e-12)


@given(seeds)
def test_extension_identity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 15))
    cloud = G.PointCloud(rng.random((n, 2)))
    kind = KINDS[int(rng.integers(3))]
    g = build_graph(cloud, make_kernel(kind), float(rng.uniform(0.2, 0.7)))
    u = rng.normal(size=n)
    q = G.lattice([0, 0], [1, 1], 0.01)
    cells = G.closest_point_projection(cloud, q)
    hit, rep = np.unique(cells, return_index=True)
    assume(len(hit) == n)
    # pairs of queries reduce to pairs of cells: one representative query per cell
    vals = evaluate_extension(g, u, q[rep])
    pts = cloud.points[G.closest_point_projection(cloud, q[rep])]
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    lhs = np.max(g.kernel.eval(d / g.scale) * np.abs(vals[:, None] - vals[None])) / g.scale
    assert lhs == discrete_functional(g, u)
