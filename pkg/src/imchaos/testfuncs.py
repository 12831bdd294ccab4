"""Built-in test functions.

The named builtins (one, ramp, step-sign, bump) exist in two flavors:
on a closed box grid (default [0, 1], used by the phase solver) and on
the circle grid (used by the chaos ensembles).  Each carries an exact
pointwise evaluator so refined-grid verification does not depend on
interpolating the sampled values.
"""

from __future__ import annotations

import numpy as np

from .chaos import TestFunction, test_function
from .grids import Grid, box_grid, circle_grid

BUILTIN_NAMES = ("one", "ramp", "step-sign", "bump")


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float), dtype=complex)


def _ramp_box(a, b):
    def f(x):
        x = np.asarray(x, dtype=float)
        return ((x - a) / (b - a)).astype(complex)

    return f


def _step_sign(a, b):
    mid = 0.5 * (a + b)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= mid, 1.0 + 0.0j, -1.0 + 0.0j)

    return f


def _bump(a, b):
    # Smooth bump supported on the middle 70% of the window, so mollified
    # phases are undistorted on supp f for mollifier widths up to 0.15|b-a|.
    c = 0.5 * (a + b)
    r = 0.35 * (b - a)

    def f(x):
        x = np.asarray(x, dtype=float)
        t = (x - c) / r
        out = np.zeros_like(t, dtype=complex)
        inside = np.abs(t) < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out

    return f


def builtin_on_grid(name: str, grid: Grid) -> TestFunction:
    """Sample a named builtin on an existing grid."""
    a, b = float(grid.x[0]), float(grid.x[-1] + (grid.spacing if grid.periodic else 0.0))
    if name == "one":
        ev = _one
    elif name == "ramp":
        ev = _ramp_box(a, b)
    elif name == "step-sign":
        ev = _step_sign(a, b)
    elif name == "bump":
        ev = _bump(a, b)
    else:
        raise ValueError(f"unknown test function {name!r}; choose from {BUILTIN_NAMES}")
    return test_function(grid, ev(grid.x), evaluator=ev, name=name)


def builtin_box(name: str, n: int = 2049, a: float = 0.0, b: float = 1.0) -> TestFunction:
    """Named builtin on a closed box grid."""
    return builtin_on_grid(name, box_grid(a, b, n))


def builtin_circle(name: str, n: int) -> TestFunction:
    """Named builtin on the circle grid of n angles."""
    return builtin_on_grid(name, circle_grid(n))


def from_csv(path, grid: Grid) -> TestFunction:
    """Test function from a CSV file of grid values.

    Accepts one column (real values) or two (real, imaginary); the row
    count must match the grid.
    """
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[0] != grid.n:
        raise ValueError(f"CSV has {data.shape[0]} rows, grid has {grid.n} points")
    values = data[:, 0].astype(complex)
    if data.shape[1] > 1:
        values = values + 1j * data[:, 1]
    return test_function(grid, values, name=str(path))
