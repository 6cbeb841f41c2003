"""Forward semi-Lagrangian scheme on conformal triangular meshes (d = 2).

Each node's mass is advected by the time-averaged node velocity and split to
the vertices of the containing triangle by barycentric coordinates.  Under
the CFL condition a_inf * dt <= hbar (minimal triangle height), the displaced
point stays inside the node's incident star, so the scheme is a convex
redistribution and inherits the Markov-chain reading of the grid schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import CartesianGrid, MultiIndex
from .schemes import CflError, CflReport
from .stochastic import TransitionKernel
from .velocity import VelocityField

_BARY_TOL = 1e-12


class MeshError(RuntimeError):
    """Displaced point not found in any incident triangle."""


@dataclass(frozen=True)
class TriMesh:
    """Conformal triangulation: nodes (m, 2), triangles (k, 3) vertex indices.

    Boundary ownership between adjacent triangles is resolved by the
    lowest-index-triangle-wins rule; barycentric weights agree across the
    ambiguity anyway because the opposite vertex has weight 0 on a shared
    edge.
    """

    nodes: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "triangles",
                          np.asarray(self.triangles, dtype=np.int64))
        incident: list[list[int]] = [[] for _ in range(len(self.nodes))]
        heights = []
        for k, tri in enumerate(self.triangles):
            pts = self.nodes[tri]
            area = _signed_area(pts[0], pts[1], pts[2])
            if area == 0.0:
                raise ValueError(f"degenerate triangle {k}")
            edges = [np.linalg.norm(pts[(i + 1) % 3] - pts[i]) for i in range(3)]
            heights.append(2.0 * abs(area) / max(edges))
            for v in tri:
                incident[v].append(k)
        object.__setattr__(self, "_incident", incident)
        object.__setattr__(self, "_hbar", min(heights))

    @property
    def hbar(self) -> float:
        return self._hbar

    def incident(self, i: int) -> list[int]:
        return self._incident[i]


def _signed_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return 0.5 * float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def barycentric(tri_pts: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of xi in the triangle (3, 2); sub-area ratios,
    clipped and renormalized so they are a nonnegative partition of unity."""
    a, b, c = tri_pts
    total = _signed_area(a, b, c)
    lam = np.array([
        _signed_area(xi, b, c) / total,
        _signed_area(xi, a, c) / -total,
        _signed_area(xi, a, b) / total,
    ])
    if lam.min() < -_BARY_TOL:
        raise ValueError("point outside triangle")
    lam = np.maximum(lam, 0.0)
    return lam / lam.sum()


def _contains(tri_pts: np.ndarray, xi: np.ndarray) -> bool:
    a, b, c = tri_pts
    total = _signed_area(a, b, c)
    lams = (
        _signed_area(xi, b, c) / total,
        _signed_area(xi, a, c) / -total,
        _signed_area(xi, a, b) / total,
    )
    return all(l >= -_BARY_TOL for l in lams)


def locate(mesh: TriMesh, i: int, xi: np.ndarray) -> int:
    """Owning triangle of xi within node i's star (lowest index wins), with a
    brute-force fallback before reporting a mesh error."""
    for k in sorted(mesh.incident(i)):
        if _contains(mesh.nodes[mesh.triangles[k]], xi):
            return k
    for k in range(len(mesh.triangles)):
        if _contains(mesh.nodes[mesh.triangles[k]], xi):
            return k
    raise MeshError(f"displaced point {xi} from node {i} not in any triangle")


@dataclass(frozen=True)
class NodeMeasure:
    """Nonnegative weights on mesh nodes, total mass 1."""

    mesh: TriMesh
    weights: dict[int, float]

    def __post_init__(self):
        pruned = {i: w for i, w in self.weights.items() if w != 0.0}
        object.__setattr__(self, "weights", pruned)
        for i, w in pruned.items():
            if w < 0.0:
                raise ValueError(f"negative weight at node {i}")

    def mass(self) -> float:
        return math.fsum(self.weights[i] for i in sorted(self.weights))

    def support(self) -> list[int]:
        return sorted(self.weights)


def check_cfl_tri(mesh: TriMesh, field: VelocityField, dt: float) -> CflReport:
    lhs = field.a_inf * dt / mesh.hbar
    return CflReport(lhs=lhs, bound=1.0, satisfied=lhs <= 1.0)


def _node_rows(
    mu_support: list[int],
    mesh: TriMesh,
    field: VelocityField,
    n: int,
    dt: float,
) -> dict[int, tuple[tuple[int, float], ...]]:
    rows: dict[int, tuple[tuple[int, float], ...]] = {}
    for i in sorted(mu_support):
        x = mesh.nodes[i]
        a = np.atleast_1d(field.time_average(n * dt, (n + 1) * dt, x))
        xi = x + a * dt
        k = locate(mesh, i, xi)
        tri = mesh.triangles[k]
        lam = barycentric(mesh.nodes[tri], xi)
        rows[i] = tuple((int(j), float(l)) for j, l in zip(tri, lam))
    return rows


def sl_step(
    mu: NodeMeasure,
    field: VelocityField,
    n: int,
    dt: float,
    row_cache: dict[int, tuple[tuple[int, float], ...]] | None = None,
) -> NodeMeasure:
    """One forward semi-Lagrangian step: advect node masses and split them
    barycentrically onto the containing triangle's vertices.

    row_cache (valid for time-constant fields only) memoizes per-node splits
    across steps.
    """
    report = check_cfl_tri(mu.mesh, field, dt)
    if not report.satisfied:
        raise CflError(report)
    if row_cache is not None and field.time_regularity == "constant":
        missing = [i for i in mu.support() if i not in row_cache]
        if missing:
            row_cache.update(_node_rows(missing, mu.mesh, field, n, dt))
        rows = row_cache
    else:
        rows = _node_rows(mu.support(), mu.mesh, field, n, dt)
    contrib: dict[int, list[float]] = {}
    for i in mu.support():
        w = mu.weights[i]
        for j, lam in rows[i]:
            if lam != 0.0:
                contrib.setdefault(j, []).append(w * lam)
    weights = {j: math.fsum(contrib[j]) for j in sorted(contrib)}
    return NodeMeasure(mu.mesh, weights)


def sl_kernel(
    mu_support: list[int],
    mesh: TriMesh,
    field: VelocityField,
    n: int,
    dt: float,
) -> TransitionKernel:
    """Node-indexed transition kernel of one semi-Lagrangian step; each row
    has at most 3 nonzero entries summing to 1."""
    report = check_cfl_tri(mesh, field, dt)
    if not report.satisfied:
        raise CflError(report)
    rows = _node_rows(list(mu_support), mesh, field, n, dt)
    grid = CartesianGrid(dx=(1.0,), dt=dt)  # index bookkeeping only
    entries = {
        (i,): tuple(((j,), p) for j, p in row) for i, row in rows.items()
    }
    kernel = TransitionKernel(n=n, grid=grid, entries=entries)
    kernel.check_rows()
    return kernel


def offdiagonal_mass(
    mu_support: list[int], mesh: TriMesh, field: VelocityField, n: int, dt: float
) -> float:
    """Max over nodes of the mass leaving the node in one step."""
    rows = _node_rows(list(mu_support), mesh, field, n, dt)
    worst = 0.0
    for i, row in rows.items():
        worst = max(worst, math.fsum(p for j, p in row if j != i))
    return worst


def sl_run(
    mu0: NodeMeasure, field: VelocityField, steps: int, dt: float
) -> list[NodeMeasure]:
    out = [mu0]
    for n in range(steps):
        out.append(sl_step(out[-1], field, n, dt))
    return out


def structured_mesh(
    lo: tuple[float, float], hi: tuple[float, float], n: tuple[int, int]
) -> TriMesh:
    """Split-square triangulation of a box: (n_x+1) x (n_y+1) nodes, each
    square cut along its lower-left to upper-right diagonal."""
    nx, ny = n
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    nodes = np.array([(x, y) for y in ys for x in xs])
    tris = []
    for iy in range(ny):
        for ix in range(nx):
            v00 = iy * (nx + 1) + ix
            v10 = v00 + 1
            v01 = v00 + (nx + 1)
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return TriMesh(nodes=nodes, triangles=np.array(tris))


def node_nearest(mesh: TriMesh, x: tuple[float, float]) -> int:
    return int(np.argmin(np.linalg.norm(mesh.nodes - np.asarray(x), axis=1)))


def w1_to_point(mu: NodeMeasure, y: np.ndarray) -> float:
    """Exact W_1 between a node measure and a Dirac at y."""
    sup = mu.support()
    dist = np.linalg.norm(mu.mesh.nodes[sup] - np.asarray(y), axis=1)
    ws = np.array([mu.weights[i] for i in sup])
    return float(dist @ ws)


def parse_mesh(text: str) -> TriMesh:
    """Plain-text mesh: `v x y` lines then `t i j k` lines (1-based)."""
    nodes, tris = [], []
    for ln in text.splitlines():
        parts = ln.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            nodes.append((float(parts[1]), float(parts[2])))
        elif parts[0] == "t":
            tris.append(tuple(int(p) - 1 for p in parts[1:4]))
        else:
            raise ValueError(f"bad mesh line: {ln!r}")
    return TriMesh(nodes=np.array(nodes), triangles=np.array(tris))


def format_mesh(mesh: TriMesh) -> str:
    lines = [f"v {float(x)!r} {float(y)!r}" for x, y in mesh.nodes]
    lines += [f"t {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.triangles]
    return "\n".join(lines) + "\n"
