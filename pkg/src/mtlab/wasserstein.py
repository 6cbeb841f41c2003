"""Exact Wasserstein distances, L1/BV utilities, interpolation inequality.

1D W_p is the L^p distance between quantile functions, integrated in closed
form over merged breakpoints (the quantile difference is affine per piece,
so the antiderivative of |u|^p is explicit for any real p >= 1).  In d >= 2
the discrete-discrete distance is an exact optimal-transport linear program
on the bipartite support graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .measures import (
    AnalyticMeasure,
    CartesianGrid,
    DiscreteMeasure,
    QuantileFunction,
    quantile,
)

_MERGE_TOL = 1e-14
_MAX_SUPPORT = 5000


class ScaleError(RuntimeError):
    """Problem too large for the exact solver."""


def _merged_breakpoints(mu_q: QuantileFunction, nu_q: QuantileFunction) -> np.ndarray:
    zs = sorted(set(mu_q.breakpoints()) | set(nu_q.breakpoints()))
    out = [zs[0]]
    for z in zs[1:]:
        if z - out[-1] > _MERGE_TOL:
            out.append(z)
    out[0], out[-1] = 0.0, 1.0
    return np.array(out)


def _piece_at(q: QuantileFunction, z: float) -> tuple[float, float, float, float]:
    for piece in q.pieces:
        if piece[0] <= z < piece[1]:
            return piece
    return q.pieces[-1]


def _abs_pow_integral(A: float, S: float, w: float, p: float) -> float:
    """Integral of |A + S z|^p over [0, w]."""
    if w <= 0.0:
        return 0.0
    if S == 0.0:
        return abs(A) ** p * w
    u0, u1 = A, A + S * w

    def G(u: float) -> float:
        return math.copysign(abs(u) ** (p + 1.0), u) / ((p + 1.0) * S)

    return G(u1) - G(u0)


def wp_1d(mu_q: QuantileFunction, nu_q: QuantileFunction, p: float = 1.0) -> float:
    """W_p between two 1D measures given by their quantile functions."""
    if p < 1.0:
        raise ValueError("p must be at least 1")
    zs = _merged_breakpoints(mu_q, nu_q)
    acc = []
    for a, b in zip(zs[:-1], zs[1:]):
        mid = 0.5 * (a + b)
        z0m, _, vm, sm = _piece_at(mu_q, mid)
        z0n, _, vn, sn = _piece_at(nu_q, mid)
        A = (vm + sm * (a - z0m)) - (vn + sn * (a - z0n))
        S = sm - sn
        acc.append(_abs_pow_integral(A, S, b - a, p))
    total = math.fsum(acc)
    return total ** (1.0 / p)


def wp_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """Exact W_p between discrete measures via the transport linear program."""
    if p < 1.0:
        raise ValueError("p must be at least 1")
    xm, wm = mu.positions(), mu.weight_array()
    xn, wn = nu.positions(), nu.weight_array()
    m, n = len(wm), len(wn)
    if m + n > _MAX_SUPPORT:
        raise ScaleError(
            f"combined support {m + n} exceeds {_MAX_SUPPORT}; "
            "use wp_1d for one-dimensional inputs"
        )
    cost = np.linalg.norm(xm[:, None, :] - xn[None, :, :], axis=2) ** p
    rows_mu = sp.kron(sp.eye(m), np.ones((1, n)), format="csr")
    rows_nu = sp.kron(np.ones((1, m)), sp.eye(n), format="csr")
    # drop one redundant marginal constraint to keep A_eq full rank
    A_eq = sp.vstack([rows_mu, rows_nu[:-1]], format="csr")
    b_eq = np.concatenate([wm, wn[:-1]])
    res = linprog(cost.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return max(res.fun, 0.0) ** (1.0 / p)


def w1_pair(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """W_p between two discrete measures, quantile route when 1D."""
    if mu.grid.dims == 1 and nu.grid.dims == 1:
        return wp_1d(quantile(mu), quantile(nu), p)
    return wp_discrete(mu, nu, p)


@dataclass(frozen=True)
class PiecewiseConstantDensity:
    """Compactly supported piecewise-constant density: values between
    consecutive breakpoints, zero outside."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breaks) - 1:
            raise ValueError("need one value per interval")
        if any(b >= c for b, c in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    def mass(self) -> float:
        return math.fsum(
            v * (b - a) for a, b, v in zip(self.breaks, self.breaks[1:], self.values)
        )

    def __call__(self, x: float) -> float:
        for a, b, v in zip(self.breaks, self.breaks[1:], self.values):
            if a <= x < b:
                return v
        return 0.0

    def as_measure(self) -> AnalyticMeasure:
        pieces = tuple(
            (a, b, v)
            for a, b, v in zip(self.breaks, self.breaks[1:], self.values)
            if v != 0.0
        )
        return AnalyticMeasure(dims=1, pieces=pieces)


def indicator(lo: float, hi: float, height: float = 1.0) -> PiecewiseConstantDensity:
    return PiecewiseConstantDensity((lo, hi), (height,))


def _merge_densities(
    f: PiecewiseConstantDensity, g: PiecewiseConstantDensity
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = np.array(sorted(set(f.breaks) | set(g.breaks)))
    mids = 0.5 * (xs[:-1] + xs[1:])
    fv = np.array([f(x) for x in mids])
    gv = np.array([g(x) for x in mids])
    return xs, fv, gv


def l1_densities(f: PiecewiseConstantDensity, g: PiecewiseConstantDensity) -> float:
    xs, fv, gv = _merge_densities(f, g)
    return float(np.abs(fv - gv) @ np.diff(xs))


def bv_seminorm(f: PiecewiseConstantDensity) -> float:
    """Total variation: sum of absolute jumps, boundary drops to 0 included."""
    padded = np.concatenate([[0.0], np.asarray(f.values), [0.0]])
    return float(np.abs(np.diff(padded)).sum())


def bv_of_difference(
    f: PiecewiseConstantDensity, g: PiecewiseConstantDensity
) -> float:
    xs, fv, gv = _merge_densities(f, g)
    padded = np.concatenate([[0.0], fv - gv, [0.0]])
    return float(np.abs(np.diff(padded)).sum())


def w1_densities(f: PiecewiseConstantDensity, g: PiecewiseConstantDensity) -> float:
    from .flows import quantile_of_analytic

    return wp_1d(quantile_of_analytic(f.as_measure()),
                 quantile_of_analytic(g.as_measure()), 1.0)


def interpolation_check(
    f: PiecewiseConstantDensity, g: PiecewiseConstantDensity, c: float
) -> tuple[float, bool]:
    """Ratio ||f-g||_L1 / (|f-g|_BV^(1/2) W_1(f,g)^(1/2)) and whether <= c.

    Both inputs must be nonnegative probability densities; the ratio is 0
    when f == g.
    """
    for dens in (f, g):
        if any(v < 0.0 for v in dens.values):
            raise ValueError("densities must be nonnegative")
        if abs(dens.mass() - 1.0) > 1e-10:
            raise ValueError("densities must have mass 1")
    l1 = l1_densities(f, g)
    if l1 == 0.0:
        return 0.0, True
    bv = bv_of_difference(f, g)
    if bv == 0.0:
        # unreachable for distinct piecewise constants; guarded anyway
        return math.inf, False
    w1 = w1_densities(f, g)
    ratio = l1 / math.sqrt(bv * w1)
    return ratio, ratio <= c


def l1_distance(
    mu: DiscreteMeasure, nu: AnalyticMeasure, grid: CartesianGrid
) -> float:
    """L1 distance between the cellwise-constant numerical density and an
    absolutely continuous exact density (1D)."""
    if grid.dims != 1:
        raise ValueError("L1 comparison is 1D only")
    if nu.atoms:
        raise ValueError("L1 distance against atoms is undefined")
    dx = grid.dx[0]
    edges = set()
    for (j,) in mu.support():
        edges.add((j - 0.5) * dx)
        edges.add((j + 0.5) * dx)
    for lo, hi, _ in nu.pieces:
        edges.add(lo)
        edges.add(hi)
    xs = np.array(sorted(edges))
    acc = []
    for a, b in zip(xs[:-1], xs[1:]):
        mid = 0.5 * (a + b)
        j = math.floor(mid / dx + 0.5)
        num = mu.weights.get((j,), 0.0) / dx
        exact = 0.0
        for lo, hi, h in nu.pieces:
            if lo <= mid < hi:
                exact += h
        acc.append(abs(num - exact) * (b - a))
    return math.fsum(acc)


# ---------------------------------------------------------------------------
# vectorized fast paths used by the convergence harness (p = 1, 1D)

def w1_grid_vs_quantile(
    xs: np.ndarray, ws: np.ndarray, exact: QuantileFunction
) -> float:
    """W_1 between a discrete 1D measure (sorted nodes xs, weights ws) and a
    piecewise-affine quantile function; vectorized over the support."""
    keep = ws > 0.0
    xs, ws = xs[keep], ws[keep]
    u = np.cumsum(ws)
    u[-1] = 1.0
    q_z0 = np.array([p[0] for p in exact.pieces])
    q_v = np.array([p[2] for p in exact.pieces])
    q_s = np.array([p[3] for p in exact.pieces])
    zb = np.unique(np.concatenate([[0.0], u, q_z0, [1.0]]))
    zb = zb[(zb >= 0.0) & (zb <= 1.0)]
    zl, zr = zb[:-1], zb[1:]
    wdt = zr - zl
    mid = 0.5 * (zl + zr)
    atom = xs[np.minimum(np.searchsorted(u, mid, side="right"), len(xs) - 1)]
    pidx = np.maximum(np.searchsorted(q_z0, mid, side="right") - 1, 0)
    fl = q_v[pidx] + q_s[pidx] * (zl - q_z0[pidx])
    fr = q_v[pidx] + q_s[pidx] * (zr - q_z0[pidx])
    dl = atom - fl
    dr = atom - fr
    same = dl * dr >= 0.0
    adl, adr = np.abs(dl), np.abs(dr)
    area_same = 0.5 * (adl + adr) * wdt
    denom = np.where(adl + adr > 0.0, adl + adr, 1.0)
    area_cross = 0.5 * (adl * adl + adr * adr) / denom * wdt
    return float(np.where(same, area_same, area_cross).sum())


def l1_grid_vs_pieces(
    jmin: int, ws: np.ndarray, dx: float, pieces
) -> float:
    """L1 distance between the cellwise density ws/dx on the contiguous index
    window starting at jmin and a short list of (lo, hi, height) pieces."""
    m = len(ws)
    cell_edges = (jmin - 0.5 + np.arange(m + 1)) * dx
    extra = [e for piece in pieces for e in piece[:2]]
    xs = np.unique(np.concatenate([cell_edges, extra]))
    mids = 0.5 * (xs[:-1] + xs[1:])
    j = np.floor(mids / dx + 0.5).astype(np.int64) - jmin
    inside = (j >= 0) & (j < m)
    num = np.where(inside, ws[np.clip(j, 0, m - 1)] / dx, 0.0)
    exact = np.zeros_like(mids)
    for lo, hi, h in pieces:
        exact += np.where((mids >= lo) & (mids < hi), h, 0.0)
    return float(np.abs(num - exact) @ np.diff(xs))
