"""Kernel profiles for geometric graph weights and the constant sigma = sup t*eta(t)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

SIGMA_TOL = 1e-12
BUILTIN_KINDS = ("indicator", "tent", "truncated-exponential")
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@numba.njit(cache=True)
def _gauss_trunc(t):
    # elementwise libm exp: numpy's SIMD exp can differ in the last bit between
    # long and short arrays, which would make edge weights depend on array layout
    out = np.empty_like(t)
    for k in range(t.shape[0]):
        x = t[k]
        out[k] = math.exp(-(x * x)) if 0.0 <= x <= 2.0 else 0.0
    return out


class KernelAssumptionError(ValueError):
    """A kernel violates (K1) positivity/continuity at 0, (K2) monotonicity or (K3) compact support."""

    def __init__(self, failed, detail=""):
        self.failed = tuple(failed)
        names = ", ".join(f"({k})" for k in self.failed)
        super().__init__(f"kernel assumption violated: {names}" + (f"; {detail}" if detail else ""))


@dataclass(frozen=True, eq=False)
class Kernel:
    kind: str
    radius: float
    table: tuple | None = None
    sigma: float = field(default=float("nan"))

    def eval(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "indicator":
            out = ((t >= 0) & (t <= 1.0)).astype(np.float64)
        elif self.kind == "tent":
            out = np.maximum(1.0 - t, 0.0)
        elif self.kind == "truncated-exponential":
            out = _gauss_trunc(np.ascontiguousarray(t.ravel())).reshape(t.shape)
        elif self.kind == "custom-table":
            ts, etas = np.array(self.table).T
            out = np.interp(t, ts, etas)
            out = np.where(t > self.radius, 0.0, out)
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        return out if out.ndim else float(out)

    def scaled(self, t, s):
        """eta_s(t) = eta(t / s)."""
        return self.eval(np.asarray(t, dtype=np.float64) / s)

    @property
    def eta0(self):
        return float(self.eval(0.0))


@dataclass(frozen=True)
class KernelReport:
    k1: bool
    k2: bool
    k3: bool
    notes: tuple = ()

    @property
    def ok(self):
        return self.k1 and self.k2 and self.k3

    @property
    def failed(self):
        return tuple(k for k, v in (("K1", self.k1), ("K2", self.k2), ("K3", self.k3)) if not v)


def validate_kernel(kernel, grid_n=1000):
    """Check (K1)-(K3) on a uniform grid of ``grid_n`` points over [0, 2R]."""
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    notes = []
    eta0 = kernel.eta0
    near = float(kernel.eval(1e-9 * min(kernel.radius, 1.0)))
    k1 = eta0 > 0 and abs(near - eta0) <= 1e-6 * max(eta0, 1.0)
    if not k1:
        notes.append(f"eta(0)={eta0:g}, eta(0+)={near:g}")
    if not math.isfinite(kernel.radius):
        notes.append("support radius is not finite")
        upper = 2.0 * max(t for t, _ in kernel.table) if kernel.table else 2.0
        grid = np.linspace(0.0, upper, grid_n)
        k3 = False
    else:
        grid = np.linspace(0.0, 2.0 * kernel.radius, grid_n)
        vals = kernel.eval(grid)
        k3 = bool(np.all(vals[grid > kernel.radius] == 0.0))
        if not k3:
            notes.append("nonzero values beyond the support radius")
    vals = kernel.eval(grid)
    k2 = bool(np.all(np.diff(vals) <= 1e-14)) and bool(np.all(vals >= 0))
    if not k2:
        notes.append("eta increases somewhere on the grid")
    return KernelReport(bool(k1), k2, k3, tuple(notes))


def _golden_max(f, a, b, width):
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return max(fc, fd, f(t))


def _sigma(kernel, tol):
    R = kernel.radius
    grid = np.linspace(0.0, R, 4097)
    vals = grid * kernel.eval(grid)
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    f = lambda t: t * float(kernel.eval(t))  # noqa: E731
    return float(max(best, _golden_max(f, lo, hi, min(tol, 1e-3) * 1e-2)))


def sigma_eta(kernel, tol=1e-9):
    """sup_{t>=0} t*eta(t) to absolute accuracy ``tol`` (dense grid + golden section)."""
    if tol >= SIGMA_TOL and math.isfinite(kernel.sigma):
        return kernel.sigma
    return _sigma(kernel, tol)


def _build(kind, radius, table=None):
    k = Kernel(kind, float(radius), table)
    return Kernel(kind, float(radius), table, _sigma(k, SIGMA_TOL) if math.isfinite(radius) else math.inf)


def make_kernel(kind, table=None, radius=None, strict=True):
    """Build a kernel; ``custom-table`` kernels are piecewise linear through ``table``.

    ``table`` is a sequence of ``(t, eta)`` pairs with strictly increasing ``t``
    starting at 0. The support radius defaults to the last ``t``; beyond the last
    node the final value is held up to ``radius``.
    """
    if kind == "indicator":
        return _build(kind, 1.0)
    if kind == "tent":
        return _build(kind, 1.0)
    if kind == "truncated-exponential":
        return _build(kind, 2.0)
    if kind != "custom-table":
        raise ValueError(f"unknown kernel kind {kind!r}")
    if table is None:
        raise ValueError("custom-table kernel needs a table")
    if isinstance(table, dict):
        table = sorted(table.items())
    tab = tuple((float(t), float(e)) for t, e in table)
    ts = np.array([t for t, _ in tab])
    if len(tab) < 2 or ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
        raise ValueError("table t values must start at 0 and increase strictly")
    radius = float(ts[-1]) if radius is None else float(radius)
    kernel = _build(kind, radius, tab)
    if strict:
        report = validate_kernel(kernel, 1000)
        if not report.ok:
            raise KernelAssumptionError(report.failed, "; ".join(report.notes))
    return kernel


def read_kernel_csv(path, radius=None, strict=True):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return make_kernel("custom-table", table=[tuple(r) for r in data], radius=radius, strict=strict)
