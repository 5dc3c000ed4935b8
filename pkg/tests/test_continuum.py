import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipschitz_lab import continuum as C
from lipschitz_lab import geometry as G
from lipschitz_lab.kernels import make_kernel, sigma_eta

BOX = G.unit_box(2)
LSHAPE = G.l_shape()
IND = make_kernel("indicator")
KINDS = ("indicator", "tent", "truncated-exponential")


def test_lshape_power_values():
    u = C.lshape_power(2)
    got = u.eval([[0.5, 0.5], [-0.5, -0.5], [-0.5, 0.5], [0.3, 0.0]])
    assert got.tolist() == [0.25, -0.25, 0.0, 0.09]
    with pytest.raises(ValueError):
        C.lshape_power(0.5)


def test_continuum_closed_forms():
    assert C.continuum_functional(C.linear([1, 2]), BOX, 0.1) == math.sqrt(5)
    assert C.continuum_functional(C.lshape_power(2), LSHAPE, 0.1) == 2
    assert C.lshape_power(1).grad_sup == 1 and C.lshape_power(1).lip_const == math.sqrt(2)


def test_continuum_fd_distance_to_boundary():
    ref = C.distance_to_boundary(BOX).without_closed_forms()
    assert abs(C.continuum_functional(ref, BOX, 0.01) - 1) <= 1e-6


def test_continuum_fd_linear():
    ref = C.linear([3, 4]).without_closed_forms()
    assert C.continuum_functional(ref, LSHAPE, 0.05) == pytest.approx(5, abs=1e-9)


@pytest.mark.parametrize("p,exact", [(1, math.sqrt(2)), (2, 2.0), (1.2, math.sqrt(2))])
def test_lipschitz_lshape(p, exact):
    ref = C.lshape_power(p)
    assert C.lipschitz_constant(ref, LSHAPE, 10, 0) == exact
    est = C.lipschitz_constant(ref.without_closed_forms(), LSHAPE, 2000, 0, mesh_h=0.01)
    assert est <= exact * (1 + 1e-12) and abs(est / exact - 1) <= 0.01


def test_lipschitz_linear_and_pre():
    ref = C.linear([1, 2]).without_closed_forms()
    assert C.lipschitz_constant(ref, LSHAPE, 500, 1, mesh_h=0.05) == pytest.approx(math.sqrt(5), rel=1e-12)
    with pytest.raises(ValueError):
        C.lipschitz_constant(ref, BOX, 1, 0)


def test_nonlocal_constant_is_zero():
    ref = C.custom(lambda x: np.full(len(x), 3.0))
    assert C.nonlocal_functional(ref, LSHAPE, IND, 0.2, 0.02) == 0


def test_nonlocal_linear():
    s = 0.05
    got = C.nonlocal_functional(C.linear([1, 2]), BOX, IND, s, s / 20)
    assert got <= math.sqrt(5) * (1 + 1e-12) and abs(got / math.sqrt(5) - 1) <= 0.02


def test_nonlocal_pair_h_precondition():
    with pytest.raises(ValueError):
        C.nonlocal_functional(C.linear([1, 0]), BOX, IND, 0.1, 0.02)


def test_nonlocal_lshape_p1_increasing():
    vals = [C.nonlocal_functional(C.lshape_power(1), LSHAPE, IND, s, s / 20) for s in (0.2, 0.1, 0.05)]
    # E_s = sqrt(2) for every s here (pairs straddling the notch); lattice values sit just below
    assert vals[0] <= vals[1] * (1 + 1e-12) and vals[1] <= vals[2] * (1 + 1e-12)
    assert all(abs(v / math.sqrt(2) - 1) <= 0.05 and v <= math.sqrt(2) for v in vals)


def test_distance_to_constraint_box():
    field = C.distance_to_constraint(BOX, BOX.sample_boundary(0.01), 0.01)
    got = field.at([[0.5, 0.5], [0.25, 0.5]])
    assert got[0] == pytest.approx(0.5, abs=0.01) and got[1] == pytest.approx(0.25, abs=0.01)


def test_distance_to_constraint_lshape_corner():
    # (1,-1) is outside the closure; the opposite corner (-1,-1) realizes 2*sqrt(2) via the origin
    field = C.distance_to_constraint(LSHAPE, [[1.0, 1.0]], 0.02)
    assert abs(field.at([[-1.0, -1.0]])[0] / (2 * math.sqrt(2)) - 1) <= 0.03


def test_distance_to_constraint_geometry_object():
    cg = G.ConstraintGeometry(BOX.sample_boundary(0.05), [])
    assert C.distance_to_constraint(BOX, cg, 0.05).at([[0.5, 0.5]])[0] == pytest.approx(0.5, abs=0.05)
    with pytest.raises(ValueError):
        C.distance_to_constraint(BOX, np.zeros((0, 2)), 0.05)


def test_field_csv(tmp_path):
    field = C.distance_to_constraint(BOX, [[0.0, 0.0]], 0.25)
    C.write_field_csv(tmp_path / "f.csv", field.nodes, field.values)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,value" and len(lines) == len(field.values) + 1
    back = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 2], field.values)


# --- properties --------------------------------------------------------------


@given(st.floats(1.0, 3.0), st.sampled_from(KINDS), st.sampled_from([0.2, 0.1]))
def test_nonlocal_bracket(p, kind, s):
    """sigma*grad_sup (up to O(s) and lattice terms) <= E_s(u) <= sigma*Lip(u)."""
    ref, k = C.lshape_power(p), make_kernel(kind)
    sig = sigma_eta(k)
    val = C.nonlocal_functional(ref, LSHAPE, k, s, s / 10)
    assert val <= sig * ref.lip_const * (1 + 1e-12)
    # pairs (1, y) - (1 - s t, y) on the first quadrant give at least sigma p (1 - s R)^(p-1), up to lattice rounding of t
    lower = sig * p * (1 - s * k.radius) ** (p - 1) * (1 - 0.05)
    assert val >= lower


@given(st.sampled_from(KINDS[:2]), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(["box", "lshape"]))
def test_nonlocal_monotone_nested(kind, a1, a2, dom):
    domain = BOX if dom == "box" else LSHAPE
    ref = C.custom(lambda x: a1 * x[:, 0] + np.sin(a2 * x[:, 1]) + 0.3 * np.abs(x[:, 0] * x[:, 1]))
    s = 0.25
    k = make_kernel(kind)
    coarse = C.nonlocal_functional(ref, domain, k, s, s / 10)
    fine = C.nonlocal_functional(ref, domain, k, s, s / 20)
    assert fine >= coarse


_H = 0.05


@given(st.integers(0, 2**32 - 1), st.sampled_from(["box", "lshape"]), st.integers(1, 4))
def test_distance_gradient_bound(seed, dom, n_src):
    """Difference quotients of d_O along every stencil direction are at most 1.

    A differentiable field with unit directional slopes along the stencil
    directions has |grad| <= stencil_overestimation, the mesh bound.
    """
    domain = BOX if dom == "box" else LSHAPE
    src = G.sample_uniform(domain, n_src, seed).points
    field = C.distance_to_constraint(domain, src, _H)
    mesh = G._mesh(domain, _H, 2)
    assert np.array_equal(mesh.nodes, field.nodes)
    rows = np.repeat(np.arange(len(mesh.nodes)), np.diff(mesh.indptr))
    quot = np.abs(field.values[rows] - field.values[mesh.indices]) / mesh.costs
    assert quot.max() <= 1 + 1e-12
    assert len(np.unique(np.round(mesh.costs / _H, 9))) == 3  # axis, diagonal and knight offsets
    assert 1 < G.stencil_overestimation(2, 2) < 1.03
