"""Shared randomized fixtures for the property suites.

Random velocity fields are built from per-axis nonincreasing step functions
a_i(x) = f_i(x_i): any such field satisfies the one-sided Lipschitz condition
with modulus 0, since each term (f_i(x_i) - f_i(y_i))(x_i - y_i) <= 0.
"""

from __future__ import annotations

import math

import numpy as np

from mtlab.measures import CartesianGrid, DiscreteMeasure
from mtlab.velocity import VelocityField


def random_osl_field(rng: np.random.Generator, dims: int, a_max: float = 1.0
                     ) -> VelocityField:
    axes = []
    for _ in range(dims):
        cuts = np.sort(rng.uniform(-2.0, 2.0, size=int(rng.integers(1, 4))))
        vals = np.sort(rng.uniform(-a_max, a_max, size=len(cuts) + 1))[::-1]
        axes.append((cuts, vals))

    def ev(t, x):
        x = np.asarray(x, dtype=float)
        if dims == 1:
            cuts, vals = axes[0]
            return vals[np.searchsorted(cuts, x, side="right")]
        out = np.empty_like(x)
        for i, (cuts, vals) in enumerate(axes):
            out[..., i] = vals[np.searchsorted(cuts, x[..., i], side="right")]
        return out

    a_inf = math.sqrt(sum(float(np.max(np.abs(vals))) ** 2 for _, vals in axes))
    return VelocityField(ev, a_inf=max(a_inf, 1e-9), dims=dims,
                         name="random-nonincreasing-steps")


def random_measure(rng: np.random.Generator, grid: CartesianGrid,
                   max_points: int = 6, span: int = 4) -> DiscreteMeasure:
    d = grid.dims
    count = int(rng.integers(1, max_points + 1))
    weights: dict = {}
    for _ in range(count):
        J = tuple(int(v) for v in rng.integers(-span, span + 1, size=d))
        weights[J] = weights.get(J, 0.0) + float(rng.uniform(0.1, 1.0))
    total = math.fsum(weights[J] for J in sorted(weights))
    return DiscreteMeasure(grid, {J: w / total for J, w in weights.items()})


def grid_for(field: VelocityField, dims: int, dx: float = 0.25,
             safety: float = 1.0) -> CartesianGrid:
    """Grid whose dt saturates a fraction `safety` of the upwind CFL bound."""
    dt = safety * dx / (field.a_inf * dims)
    return CartesianGrid(dx=(dx,) * dims, dt=dt)
