"""Continuum reference objects: test functions, sup|grad u|, Lip(u), the nonlocal functional and d_O.

Every estimate here is a lattice maximum and therefore bounds the continuum
supremum from below; closed forms are used when a reference function provides one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import (
    _as_points,
    geodesic_distance_field,
    lattice,
    sample_uniform,
)


@dataclass(frozen=True, eq=False)
class ReferenceFunction:
    kind: str
    fn: Callable = field(repr=False)
    params: dict = field(default_factory=dict)
    grad_sup: float | None = None
    lip_const: float | None = None

    def eval(self, points):
        return np.asarray(self.fn(_as_points(points)), dtype=np.float64)

    def without_closed_forms(self):
        return ReferenceFunction(self.kind, self.fn, self.params)


def linear(a, b=0.0):
    a = np.asarray(a, dtype=np.float64)
    norm = float(np.linalg.norm(a))
    return ReferenceFunction("linear", lambda x: x @ a + b, {"a": a, "b": b}, norm, norm)


def lshape_power(p):
    """x1^p on the first quadrant, x2^p (odd extension) on the third, 0 elsewhere.

    For p > 1 non-integer the third-quadrant branch is ``-|x2|^p``; this keeps the
    function continuous with sup|grad u| = p and Lip(u) = max(sqrt 2, p) on the L-shape.
    """
    if p < 1:
        raise ValueError("exponent must be at least 1")

    def fn(x):
        x1, x2 = x[:, 0], x[:, 1]
        out = np.zeros(len(x))
        q1 = (x1 >= 0) & (x2 >= 0)
        q3 = (x1 <= 0) & (x2 <= 0)
        out[q1] = x1[q1] ** p
        out[q3] = -np.abs(x2[q3]) ** p
        return out

    return ReferenceFunction("lshape-power", fn, {"p": p}, float(p), max(math.sqrt(2.0), float(p)))


def distance_to_boundary(domain):
    return ReferenceFunction(
        "distance-to-boundary", domain.distance_to_boundary, {"domain": domain.kind}, 1.0, 1.0
    )


def custom(fn, grad_sup=None, lip_const=None):
    return ReferenceFunction("custom", fn, {}, grad_sup, lip_const)


def _closure_grid(domain, h):
    """Values-ready lattice: node array, grid shape and in-closure mask (grid-shaped)."""
    lo, hi = domain.bounding_box
    nodes = lattice(lo, hi, h)
    shape = tuple(np.floor((hi - lo) / h + 1e-9).astype(int) + 1)
    mask = domain.closure_inside(nodes)
    return nodes, shape, mask.reshape(shape)


def fd_gradient(ref, domain, nodes, step):
    """Central differences with step ``step``, one-sided where a stencil point leaves the closure."""
    grad = np.zeros_like(nodes)
    u0 = ref.eval(nodes)
    for k in range(domain.dim):
        e = np.zeros(domain.dim)
        e[k] = step
        fwd, bwd = nodes + e, nodes - e
        f_in, b_in = domain.closure_inside(fwd), domain.closure_inside(bwd)
        uf = np.where(f_in, ref.eval(np.where(f_in[:, None], fwd, nodes)), u0)
        ub = np.where(b_in, ref.eval(np.where(b_in[:, None], bwd, nodes)), u0)
        span = step * (f_in.astype(float) + b_in.astype(float))
        with np.errstate(invalid="ignore", divide="ignore"):
            grad[:, k] = np.where(span > 0, (uf - ub) / span, 0.0)
    return grad


def _rough_nodes(grad_grid, mask, reach=2, jump=0.5):
    """Nodes whose gradient differs by more than ``jump`` from a lattice neighbor within ``reach`` steps."""
    rough = np.zeros(mask.shape, dtype=bool)
    dim = mask.ndim
    for axis in range(dim):
        for r in range(1, reach + 1):
            a = [slice(None)] * dim
            b = [slice(None)] * dim
            a[axis], b[axis] = slice(0, -r), slice(r, None)
            a, b = tuple(a), tuple(b)
            both = mask[a] & mask[b]
            diff = np.linalg.norm(grad_grid[a] - grad_grid[b], axis=-1) > jump
            hit = both & diff
            rough[a] |= hit
            rough[b] |= hit
    return rough


def continuum_functional(ref, domain, mesh_h, use_closed_form=True):
    """ess sup |grad u|: closed form if known, else the max finite-difference gradient on a lattice.

    Nodes next to a gradient discontinuity (jump above 0.5 within two lattice steps)
    are skipped, since the essential supremum ignores the null set of kinks.
    """
    if use_closed_form and ref.grad_sup is not None:
        return float(ref.grad_sup)
    nodes, shape, mask = _closure_grid(domain, mesh_h)
    grad = np.zeros(shape + (domain.dim,))
    inside = mask.ravel()
    grad.reshape(-1, domain.dim)[inside] = fd_gradient(ref, domain, nodes[inside], mesh_h / 2)
    mag = np.linalg.norm(grad, axis=-1)
    smooth = mask & ~_rough_nodes(grad, mask)
    if not smooth.any():
        smooth = mask
    return float(mag[smooth].max())


def lipschitz_constant(ref, domain, sample_n, seed, mesh_h=None, use_closed_form=True):
    """Lip(u): closed form if known, else a certified lower bound from sampled pairs.

    Pairs are ``sample_n`` random in-domain pairs, all lattice-neighbor pairs at
    spacing ``mesh_h`` and every pair of a coarse lattice with at most ~1500 nodes.
    """
    if sample_n < 2:
        raise ValueError("sample_n must be at least 2")
    if use_closed_form and ref.lip_const is not None:
        return float(ref.lip_const)
    best = 0.0

    def ratio(x, y):
        d = np.linalg.norm(x - y, axis=1)
        ok = d > 0
        if not ok.any():
            return 0.0
        return float(np.max(np.abs(ref.eval(x[ok]) - ref.eval(y[ok])) / d[ok]))

    pts = sample_uniform(domain, 2 * sample_n, seed).points
    best = max(best, ratio(pts[:sample_n], pts[sample_n:]))
    lo, hi = domain.bounding_box
    h = mesh_h if mesh_h is not None else float(np.min(hi - lo)) / 200
    nodes, shape, mask = _closure_grid(domain, h)
    flat = np.full(mask.size, -1)
    flat[mask.ravel()] = np.arange(mask.sum())
    gi = flat.reshape(shape)
    for z in itertools.product((-1, 0, 1), repeat=domain.dim):
        if not any(z) or next(c for c in z if c) < 0:
            continue
        src = tuple(slice(max(0, -c), n - max(0, c)) for c, n in zip(z, shape))
        dst = tuple(slice(s.start + c, s.stop + c) for s, c in zip(src, z))
        i, j = gi[src].ravel(), gi[dst].ravel()
        ok = (i >= 0) & (j >= 0)
        x = nodes[mask.ravel()]
        best = max(best, ratio(x[i[ok]], x[j[ok]]))
    # an even number of intervals so the lattice hits the box corners and midlines
    m = 2 * int(1500 ** (1 / domain.dim) / 2)
    coarse_h = float(np.max(hi - lo)) / m
    cn = lattice(lo, hi, coarse_h)
    cn = cn[domain.closure_inside(cn)]
    a, b = np.triu_indices(len(cn), k=1)
    best = max(best, ratio(cn[a], cn[b]))
    return best


def _offsets_within(radius_steps, dim):
    R = int(math.floor(radius_steps + 1e-9))
    out = []
    for z in itertools.product(range(-R, R + 1), repeat=dim):
        if not any(z) or next(c for c in z if c) < 0:
            continue
        if sum(c * c for c in z) <= radius_steps**2 * (1 + 1e-12):
            out.append(z)
    return out


def nonlocal_functional(ref, domain, kernel, s, pair_h):
    """(1/s) * max over closure-lattice pairs of eta(|x - y| / s) * |u(x) - u(y)|.

    Pairs are enumerated by lattice offset; the value is a lower bound on the
    essential supremum and is non-decreasing under lattice refinement.
    """
    if pair_h > s / 10 * (1 + 1e-12):
        raise ValueError("pair_h must be at most s/10")
    nodes, shape, mask = _closure_grid(domain, pair_h)
    vals = np.full(mask.size, np.nan)
    inside = mask.ravel()
    vals[inside] = ref.eval(nodes[inside])
    grid = vals.reshape(shape)
    best = 0.0
    for z in _offsets_within(s * kernel.radius / pair_h, domain.dim):
        w = float(kernel.eval(np.linalg.norm(np.array(z, float) * pair_h) / s))
        if w <= 0:
            continue
        src = tuple(slice(max(0, -c), n - max(0, c)) for c, n in zip(z, shape))
        dst = tuple(slice(sl.start + c, sl.stop + c) for sl, c in zip(src, z))
        diff = np.abs(grid[dst] - grid[src])
        m = np.nanmax(diff) if np.isfinite(diff).any() else 0.0
        best = max(best, w * float(m))
    return best / s


def distance_to_constraint(domain, constraint, mesh_h, stencil=2):
    """Geodesic distance to the constraint samples (Euclidean on convex domains)."""
    samples = constraint.continuum_set if hasattr(constraint, "continuum_set") else constraint
    samples = _as_points(samples, domain.dim)
    if len(samples) == 0:
        raise ValueError("constraint has no continuum samples")
    return geodesic_distance_field(domain, samples, mesh_h, stencil)


def write_field_csv(path, nodes, values):
    nodes = _as_points(nodes)
    header = ",".join([f"x{i}" for i in range(nodes.shape[1])] + ["value"])
    np.savetxt(path, np.column_stack([nodes, values]), delimiter=",", header=header, comments="", fmt="%.17g")
