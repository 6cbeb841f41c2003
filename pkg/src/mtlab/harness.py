"""Convergence studies, order regression, and report emission.

A study runs one scheme over a ladder of resolutions on a fixed box, measures
the distance to the exact solution at every step, keeps the per-resolution
maximum, and fits the order of convergence by least squares on the log-log
cloud.  The 1D stepping below is a vectorized replica of the sparse scheme
step (same convex-combination weights on a contiguous index window), so the
ladder's finest resolutions stay fast.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .flows import ExactSolution, exact_solution
from .measures import (
    AnalyticMeasure,
    CartesianGrid,
    DiscreteMeasure,
    QuantileFunction,
    dirac,
    project_initial,
    uniform,
)
from .schemes import CflError, CflReport, SchemeSpec
from .simplex import (
    NodeMeasure,
    check_cfl_tri,
    node_nearest,
    sl_step,
    structured_mesh,
    w1_to_point,
)
from .velocity import VelocityField, named_field
from .wasserstein import l1_grid_vs_pieces, w1_grid_vs_quantile, wp_1d

DEFAULT_LADDER = (100, 200, 400, 800, 1600, 3200)
DEFAULT_DOMAIN = (-2.5, 2.5)

EXAMPLES = ("example1", "example2", "example3", "binomial")

_WP_RE = re.compile(r"wp\(([^)]+)\)")


class ConfigError(ValueError):
    """Invalid study configuration."""


@dataclass(frozen=True)
class StudyConfig:
    """Everything a convergence study needs, in one validated record."""

    example: str = "example1"
    scheme: str = "upwind"
    T: float = 2.0
    ladder: tuple[int, ...] = DEFAULT_LADDER
    cfl: float = 0.5
    distance: str = "w1"
    domain: tuple[float, float] = DEFAULT_DOMAIN
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(int(n) for n in self.ladder))
        if self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}")
        try:
            SchemeSpec(self.scheme)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not (self.T > 0.0):
            raise ConfigError("final time must be positive")
        if not self.ladder:
            raise ConfigError("resolution ladder must be nonempty")
        if any(n <= 0 for n in self.ladder):
            raise ConfigError("resolutions must be positive")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigError("resolution ladder must be strictly increasing")
        if not (0.0 < self.cfl):
            raise ConfigError("CFL ratio must be positive")
        if self.domain[1] <= self.domain[0]:
            raise ConfigError("domain must be a nonempty interval")
        if self.distance not in ("w1", "l1") and not _WP_RE.fullmatch(self.distance):
            raise ConfigError(f"unknown distance {self.distance!r}")
        # only the field bound is checked up front; scheme-specific CFL
        # (e.g. the doubled Rusanov coefficient bound) is checked at run time
        if self.field().a_inf * self.cfl > 1.0 + 1e-12:
            raise ConfigError(
                f"CFL ratio {self.cfl} with field bound "
                f"{self.field().a_inf} violates the stability condition"
            )

    def field(self) -> VelocityField:
        return named_field(self.example)

    def initial(self) -> AnalyticMeasure:
        return _initial_datum(self.example)

    def exact(self) -> ExactSolution:
        return exact_solution(self.example)

    def grid_for(self, N: int) -> CartesianGrid:
        dx = (self.domain[1] - self.domain[0]) / N
        return CartesianGrid(dx=(dx,), dt=self.cfl * dx)


def _initial_datum(example: str) -> AnalyticMeasure:
    if example == "example1":
        return dirac((-0.5,))
    if example == "example2":
        return uniform(-1.0, 1.0)
    if example == "example3":
        return uniform(-1.0, 0.0)
    return dirac((0.0,))  # binomial


def config_from_mapping(data: dict) -> StudyConfig:
    known = {"example", "scheme", "T", "ladder", "cfl", "distance",
             "domain", "seed", "out"}
    bad = set(data) - known
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    kwargs = dict(data)
    if "ladder" in kwargs:
        kwargs["ladder"] = tuple(int(v) for v in kwargs["ladder"])
    if "domain" in kwargs:
        kwargs["domain"] = tuple(float(v) for v in kwargs["domain"])
    try:
        return StudyConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class ResolutionRow:
    N: int
    dx: float
    error: float
    runtime_s: float
    envelope_c: float  # smallest C with e^n <= C (sqrt(t^n dx) + dx) at this N


@dataclass(frozen=True)
class ConvergenceReport:
    config: StudyConfig
    rows: tuple[ResolutionRow, ...]
    slope: float       # fitted order: error ~ N^(-slope)
    residual: float    # RMS residual of the log-log fit

    def envelope_constants(self) -> tuple[float, ...]:
        return tuple(r.envelope_c for r in self.rows)


def fit_order(ns: np.ndarray, errs: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log error vs log N; returns (order, rms residual).

    The order is the negated slope, so halving the error when N quadruples
    reads as 0.5.
    """
    if len(ns) < 2:
        raise ValueError("order fit needs at least two resolutions")
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(errs, dtype=float))
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return -float(coef[0]), float(np.sqrt(np.mean(resid * resid)))


# ---------------------------------------------------------------------------
# vectorized 1D stepping on a contiguous index window


@dataclass
class _Window:
    jmin: int
    ws: np.ndarray


def _window_of(mu: DiscreteMeasure) -> _Window:
    sup = mu.support()
    jmin = sup[0][0]
    jmax = sup[-1][0]
    ws = np.zeros(jmax - jmin + 1)
    for (j,), w in mu.weights.items():
        ws[j - jmin] = w
    return _Window(jmin=jmin, ws=ws)


def _step_window(
    win: _Window, spec: SchemeSpec, fld: VelocityField, n: int, grid: CartesianGrid
) -> _Window:
    dx, dt = grid.dx[0], grid.dt
    lam = dt / dx
    m = len(win.ws)
    xs = (win.jmin + np.arange(m)) * dx
    a = np.asarray(fld.time_average(n * dt, (n + 1) * dt, xs))
    zeta, beta = spec.coefficients_1d(fld, a)
    stay = np.maximum(0.0, 1.0 - lam * (zeta + beta))
    out = np.zeros(m + 2)
    out[1:-1] += stay * win.ws
    out[2:] += lam * zeta * win.ws
    out[:-2] += lam * beta * win.ws
    lo = int(np.argmax(out > 0.0))
    hi = m + 2 - int(np.argmax(out[::-1] > 0.0))
    return _Window(jmin=win.jmin - 1 + lo, ws=out[lo:hi])


def _quantile_from_arrays(xs: np.ndarray, ws: np.ndarray) -> QuantileFunction:
    u = np.cumsum(ws)
    u[-1] = 1.0
    pieces = []
    z = 0.0
    for x, zn in zip(xs, u):
        pieces.append((z, float(zn), float(x), 0.0))
        z = float(zn)
    return QuantileFunction(tuple(pieces))


def _distance_at(
    cfg: StudyConfig, win: _Window, grid: CartesianGrid, t: float
) -> float:
    dx = grid.dx[0]
    exact = cfg.exact()
    keep = win.ws > 0.0
    xs = (win.jmin + np.flatnonzero(keep)) * dx
    ws = win.ws[keep]
    if cfg.distance == "w1":
        return w1_grid_vs_quantile(xs, ws, exact.quantile_fn(t))
    if cfg.distance == "l1":
        ref = exact.measure(t)
        if ref.atoms:
            raise ConfigError("L1 distance needs an atom-free exact solution")
        return l1_grid_vs_pieces(win.jmin, win.ws, dx, ref.pieces)
    p = float(_WP_RE.fullmatch(cfg.distance).group(1))
    return wp_1d(_quantile_from_arrays(xs, ws), exact.quantile_fn(t), p)


def run_resolution(cfg: StudyConfig, N: int) -> ResolutionRow:
    """Run one ladder entry to T and report the max-over-steps error."""
    grid = cfg.grid_for(N)
    spec = SchemeSpec(cfg.scheme)
    fld = cfg.field()
    from .schemes import check_cfl

    report = check_cfl(spec, fld, grid)
    if not report.satisfied:
        raise CflError(report)
    start = time.perf_counter()
    mu0 = project_initial(cfg.initial(), grid)
    win = _window_of(mu0)
    steps = int(math.floor(cfg.T / grid.dt + 1e-9))
    worst = _distance_at(cfg, win, grid, 0.0)
    worst_env = worst / grid.dx[0]  # t=0 envelope denominator is dx
    for n in range(steps):
        win = _step_window(win, spec, fld, n, grid)
        t = (n + 1) * grid.dt
        e = _distance_at(cfg, win, grid, t)
        worst = max(worst, e)
        worst_env = max(worst_env, e / (math.sqrt(t * grid.dx[0]) + grid.dx[0]))
    runtime = time.perf_counter() - start
    return ResolutionRow(N=N, dx=grid.dx[0], error=worst,
                         runtime_s=runtime, envelope_c=worst_env)


def run_study(cfg: StudyConfig) -> ConvergenceReport:
    rows = tuple(run_resolution(cfg, N) for N in cfg.ladder)
    if len(rows) >= 2:
        slope, residual = fit_order(
            np.array([r.N for r in rows]), np.array([r.error for r in rows])
        )
    else:
        slope, residual = math.nan, math.nan
    return ConvergenceReport(config=cfg, rows=rows, slope=slope, residual=residual)


def theorem_envelope_check(report: ConvergenceReport) -> float:
    """Smallest C with e^n <= C (sqrt(t^n dx) + dx) across the whole study."""
    return max(r.envelope_c for r in report.rows)


# ---------------------------------------------------------------------------
# report emission


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_csv(report: ConvergenceReport) -> str:
    lines = ["N,dx,error,runtime_s"]
    for r in report.rows:
        lines.append(f"{r.N},{r.dx!r},{r.error!r},{r.runtime_s:.3f}")
    return "\n".join(lines) + "\n"


def report_json(report: ConvergenceReport) -> str:
    cfg = asdict(report.config)
    payload = {
        "version": __version__,
        "config": cfg,
        "slope": report.slope,
        "residual": report.residual,
        "envelope_c": list(report.envelope_constants()),
        "rows": [
            {"N": r.N, "dx": r.dx, "error": r.error}
            for r in report.rows
        ],
        "jump_convention": "fields take their right-side value at discontinuities",
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def emit_report(report: ConvergenceReport, path: str) -> tuple[str, str]:
    """Write <path>.csv and <path>.json atomically; returns the two paths.

    Everything except the runtime column is byte-stable for identical
    configurations.
    """
    csv_path, json_path = path + ".csv", path + ".json"
    _atomic_write(csv_path, report_csv(report))
    _atomic_write(json_path, report_json(report))
    return csv_path, json_path


# ---------------------------------------------------------------------------
# semi-Lagrangian convergence study (structured triangulation, Dirac datum)


@dataclass(frozen=True)
class TriStudyConfig:
    """Dirac transport by a constant field on split-square triangulations."""

    speed: tuple[float, float] = (1.0, 0.5)
    x0: tuple[float, float] = (-0.5, -0.25)
    T: float = 1.0
    ladder: tuple[int, ...] = (32, 64, 128, 256)
    cfl: float = 0.25
    domain: tuple[tuple[float, float], tuple[float, float]] = ((-8.0, -8.0), (8.0, 8.0))
    prune: float = 1e-16  # drop weights below this; dropped mass is tracked

    def __post_init__(self):
        if not self.ladder or any(
            b <= a for a, b in zip(self.ladder, self.ladder[1:])
        ):
            raise ConfigError("resolution ladder must be strictly increasing")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigError("CFL ratio must lie in (0, 1]")


def run_tri_resolution(cfg: TriStudyConfig, N: int) -> ResolutionRow:
    from .velocity import constant

    fld = constant(list(cfg.speed))
    mesh = structured_mesh(cfg.domain[0], cfg.domain[1], (N, N))
    dt = cfg.cfl * mesh.hbar / fld.a_inf
    report = check_cfl_tri(mesh, fld, dt)
    if not report.satisfied:
        raise CflError(report)
    start = time.perf_counter()
    mu = NodeMeasure(mesh, {node_nearest(mesh, cfg.x0): 1.0})
    steps = int(math.floor(cfg.T / dt + 1e-9))
    speed = np.asarray(cfg.speed)
    x0 = np.asarray(cfg.x0)
    worst = w1_to_point(mu, x0)
    cache: dict = {}
    dropped = 0.0
    for n in range(steps):
        mu = sl_step(mu, fld, n, dt, row_cache=cache)
        if cfg.prune > 0.0:
            kept = {i: w for i, w in mu.weights.items() if w >= cfg.prune}
            if len(kept) != len(mu.weights):
                dropped += math.fsum(
                    w for i, w in sorted(mu.weights.items()) if i not in kept
                )
                mu = NodeMeasure(mu.mesh, kept)
        worst = max(worst, w1_to_point(mu, x0 + (n + 1) * dt * speed))
    if dropped > 1e-10:
        raise RuntimeError(f"pruned mass {dropped:.3e} exceeds budget")
    runtime = time.perf_counter() - start
    h = (cfg.domain[1][0] - cfg.domain[0][0]) / N
    return ResolutionRow(N=N, dx=h, error=worst, runtime_s=runtime,
                         envelope_c=math.nan)


def run_tri_study(cfg: TriStudyConfig) -> ConvergenceReport:
    rows = tuple(run_tri_resolution(cfg, N) for N in cfg.ladder)
    slope, residual = fit_order(
        np.array([r.N for r in rows]), np.array([r.error for r in rows])
    )
    study = StudyConfig()  # placeholder echo; tri studies have their own config
    report = ConvergenceReport(config=study, rows=rows, slope=slope,
                               residual=residual)
    return report
