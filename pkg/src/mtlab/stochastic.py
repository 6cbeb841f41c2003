"""Markov-chain reading of the grid schemes.

Each scheme step is a row-stochastic transition kernel on multi-indices; the
scheme's weights are the chain's law.  Trajectories are sampled with a
counter-based generator (Philox keyed by seed and step), so batches are
reproducible and embarrassingly parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import CartesianGrid, DiscreteMeasure, MultiIndex
from .schemes import CflError, SchemeSpec, check_cfl
from .velocity import VelocityField

ROW_SUM_TOL = 1e-14


@dataclass(frozen=True)
class TransitionKernel:
    """One-step kernel: row per source index, entries in the fixed neighbor
    order (stay, +e_1, -e_1, ..., +e_d, -e_d).  The order is part of the
    reproducibility contract for sampling."""

    n: int
    grid: CartesianGrid
    entries: dict[MultiIndex, tuple[tuple[MultiIndex, float], ...]]

    def row(self, J: MultiIndex) -> tuple[tuple[MultiIndex, float], ...]:
        return self.entries[J]

    def check_rows(self) -> None:
        for J, row in self.entries.items():
            if any(p < 0.0 for _, p in row):
                raise ValueError(f"negative probability in row {J}")
            if abs(math.fsum(p for _, p in row) - 1.0) > ROW_SUM_TOL:
                raise ValueError(f"row {J} does not sum to 1")


@dataclass(frozen=True)
class TrajectoryBatch:
    """count paths of multi-indices, shape (count, steps+1, d)."""

    seed: int
    count: int
    grid: CartesianGrid
    paths: np.ndarray


def _neighbors(J: MultiIndex, d: int) -> list[MultiIndex]:
    out = [J]
    for i in range(d):
        out.append(J[:i] + (J[i] + 1,) + J[i + 1:])
        out.append(J[:i] + (J[i] - 1,) + J[i + 1:])
    return out


def kernel_of(
    spec: SchemeSpec,
    field: VelocityField,
    n: int,
    support: set[MultiIndex] | list[MultiIndex],
    grid: CartesianGrid,
) -> TransitionKernel:
    """Kernel rows over the given support set, in the paper-exact form."""
    report = check_cfl(spec, field, grid)
    if not report.satisfied:
        raise CflError(report)
    lam = np.array([grid.dt / h for h in grid.dx])
    entries: dict[MultiIndex, tuple[tuple[MultiIndex, float], ...]] = {}
    for J in sorted(support):
        zeta, beta = spec.coefficients(field, n, J, grid)
        stay = max(0.0, 1.0 - float(lam @ (zeta + beta)))
        row = [(J, stay)]
        nbrs = _neighbors(J, grid.dims)
        for i in range(grid.dims):
            row.append((nbrs[1 + 2 * i], float(lam[i] * zeta[i])))
            row.append((nbrs[2 + 2 * i], float(lam[i] * beta[i])))
        entries[J] = tuple(row)
    kernel = TransitionKernel(n=n, grid=grid, entries=entries)
    kernel.check_rows()
    return kernel


def make_kernels(
    mu0: DiscreteMeasure,
    spec: SchemeSpec,
    field: VelocityField,
    steps: int,
) -> list[TransitionKernel]:
    """Per-step kernels built lazily on the propagated law's support."""
    kernels = []
    mu = mu0
    for n in range(steps):
        k = kernel_of(spec, field, n, set(mu.support()), mu.grid)
        kernels.append(k)
        mu = _apply(mu, k)
    return kernels


def _apply(mu: DiscreteMeasure, kernel: TransitionKernel) -> DiscreteMeasure:
    contrib: dict[MultiIndex, list[float]] = {}
    for J in mu.support():
        w = mu.weights[J]
        for L, p in kernel.row(J):
            if p != 0.0:
                contrib.setdefault(L, []).append(w * p)
    weights = {L: math.fsum(contrib[L]) for L in sorted(contrib)}
    return DiscreteMeasure(mu.grid, weights)


def propagate_law(
    mu: DiscreteMeasure, kernels: list[TransitionKernel]
) -> DiscreteMeasure:
    """Law after applying the kernels in order."""
    for kernel in kernels:
        mu = _apply(mu, kernel)
    return mu


def _initial_states(mu0: DiscreteMeasure, count: int, seed: int) -> np.ndarray:
    sup = mu0.support()
    cdf = np.cumsum(mu0.weight_array())
    cdf[-1] = 1.0
    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    u = rng.random(count)
    idx = np.searchsorted(cdf, u, side="right")
    return np.array(sup, dtype=np.int64)[idx]


def sample_paths(
    mu0: DiscreteMeasure,
    kernels: list[TransitionKernel],
    count: int,
    seed: int,
) -> TrajectoryBatch:
    """i.i.d. paths, K^0 ~ mu0, transitions per the kernels.

    Uniform draws for step n come from Philox keyed by (seed, n+1), consumed
    in path-index order, so batches are reproducible and each step can be
    generated independently.
    """
    if count < 1:
        raise ValueError("need at least one path")
    d = mu0.grid.dims
    steps = len(kernels)
    paths = np.empty((count, steps + 1, d), dtype=np.int64)
    paths[:, 0, :] = _initial_states(mu0, count, seed)
    for n, kernel in enumerate(kernels):
        states, inv = np.unique(paths[:, n, :], axis=0, return_inverse=True)
        cdfs = np.empty((states.shape[0], 2 * d + 1))
        offsets = np.zeros((2 * d + 1, d), dtype=np.int64)
        for i in range(d):
            offsets[1 + 2 * i, i] = 1
            offsets[2 + 2 * i, i] = -1
        for s_idx in range(states.shape[0]):
            J = tuple(int(v) for v in states[s_idx])
            probs = np.array([p for _, p in kernel.row(J)])
            cdfs[s_idx] = np.cumsum(probs)
        cdfs[:, -1] = 1.0
        rng = np.random.Generator(np.random.Philox(key=[seed, n + 1]))
        u = rng.random(count)
        choice = (cdfs[inv] < u[:, None]).sum(axis=1)
        paths[:, n + 1, :] = paths[:, n, :] + offsets[choice]
    return TrajectoryBatch(seed=seed, count=count, grid=mu0.grid, paths=paths)


@dataclass(frozen=True)
class StepIncrementStats:
    """Per-step martingale-increment diagnostics for one trajectory batch."""

    n: int
    per_state: dict[MultiIndex, tuple[int, np.ndarray, float]]
    skipped: dict[MultiIndex, int]
    max_abs_h: float
    mean_abs_h: float
    mean_sq_h: float


def increment_residual(
    batch: TrajectoryBatch,
    field: VelocityField,
    grid: CartesianGrid,
    min_visits: int = 10,
) -> list[StepIncrementStats]:
    """Empirical mean of X^{n+1} - X^n - dt * a^n_J per occupied state J.

    Also reports the empirical max |h^n| and E|h^n|^p for p in {1, 2}, where
    h^n is the centered one-step increment.  States with fewer than
    min_visits visits are excluded from the mean test and reported apart.
    """
    if batch.count < 1:
        raise ValueError("empty batch")
    d = grid.dims
    dx = np.array(grid.dx)
    out = []
    steps = batch.paths.shape[1] - 1
    for n in range(steps):
        cur = batch.paths[:, n, :]
        nxt = batch.paths[:, n + 1, :]
        incr = (nxt - cur) * dx
        states, inv = np.unique(cur, axis=0, return_inverse=True)
        t0, t1 = grid.time(n), grid.time(n + 1)
        drift = np.empty((states.shape[0], d))
        for s_idx in range(states.shape[0]):
            x = states[s_idx] * dx
            drift[s_idx] = np.atleast_1d(field.time_average(t0, t1, x)) * grid.dt
        h = incr - drift[inv]
        habs = np.sqrt((h * h).sum(axis=1))
        per_state: dict[MultiIndex, tuple[int, np.ndarray, float]] = {}
        skipped: dict[MultiIndex, int] = {}
        for s_idx in range(states.shape[0]):
            mask = inv == s_idx
            visits = int(mask.sum())
            J = tuple(int(v) for v in states[s_idx])
            if visits < min_visits:
                skipped[J] = visits
                continue
            hs = h[mask]
            mean = hs.mean(axis=0)
            stderr = float(hs.std(axis=0, ddof=1).max() / math.sqrt(visits)) \
                if visits > 1 else 0.0
            per_state[J] = (visits, mean, stderr)
        out.append(
            StepIncrementStats(
                n=n,
                per_state=per_state,
                skipped=skipped,
                max_abs_h=float(habs.max()),
                mean_abs_h=float(habs.mean()),
                mean_sq_h=float((habs * habs).mean()),
            )
        )
    return out


def empirical_law(batch: TrajectoryBatch, n: int) -> DiscreteMeasure:
    """Empirical distribution of the batch at step n."""
    states, counts = np.unique(batch.paths[:, n, :], axis=0, return_counts=True)
    weights = {
        tuple(int(v) for v in states[i]): counts[i] / batch.count
        for i in range(states.shape[0])
    }
    return DiscreteMeasure(batch.grid, weights)


def total_variation(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    keys = set(mu.weights) | set(nu.weights)
    return 0.5 * math.fsum(
        abs(mu.weights.get(J, 0.0) - nu.weights.get(J, 0.0)) for J in sorted(keys)
    )
