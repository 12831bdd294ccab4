"""Spatial grids and quadrature weights.

Two grid families appear throughout the package: the uniform periodic
grid on the circle [0, 2*pi) and uniform closed box grids [a, b].  The
quadrature conventions are fixed here once:

* eigenproblem / L2 weights: trapezoidal (uniform on the circle, where
  the rule is spectrally accurate for periodic integrands);
* integral evaluations of oscillatory chaos integrands: uniform
  trapezoid on the circle, composite Simpson on boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform 1-d grid with its topology flag.

    ``x`` holds the nodes; ``periodic`` distinguishes the circle grid
    (endpoint excluded, implied period ``length``) from a closed box.
    """

    x: np.ndarray
    periodic: bool
    length: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def spacing(self) -> float:
        return self.x[1] - self.x[0]

    def trapezoid_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights (uniform on periodic grids)."""
        h = self.spacing
        if self.periodic:
            return np.full(self.n, h)
        w = np.full(self.n, h)
        w[0] = w[-1] = h / 2.0
        return w

    def quad_weights(self) -> np.ndarray:
        """Weights for chaos integrals: uniform (circle) or Simpson (box)."""
        if self.periodic:
            return np.full(self.n, self.spacing)
        return simpson_weights(self.n, self.spacing)

    def same_as(self, other: "Grid") -> bool:
        return (
            self.periodic == other.periodic
            and self.n == other.n
            and np.array_equal(self.x, other.x)
        )


def circle_grid(n: int) -> Grid:
    """Uniform grid of n angles on [0, 2*pi), endpoint excluded."""
    x = 2.0 * np.pi * np.arange(n) / n
    return Grid(x=x, periodic=True, length=2.0 * np.pi)


def box_grid(a: float, b: float, n: int) -> Grid:
    """Uniform closed grid of n points on [a, b]."""
    if n < 3:
        raise ValueError("box grid needs at least 3 points")
    x = np.linspace(a, b, n)
    return Grid(x=x, periodic=False, length=b - a)


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights on a uniform grid of ``n`` points.

    For an even interval count the classic 1-4-2-...-4-1 pattern applies;
    for an odd count the last interval is handled with the three-point
    Newton-Cotes correction so no accuracy order is lost.
    """
    if n < 3:
        raise ValueError("Simpson weights need at least 3 points")
    w = np.zeros(n)
    m = n - 1  # interval count
    if m % 2 == 0:
        w[0:n:2] = 2.0
        w[1:n:2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
    else:
        # Simpson on the first m-1 intervals, cubic correction on the tail.
        w[0 : n - 1 : 2] = 2.0
        w[1 : n - 1 : 2] = 4.0
        w[0] = 1.0
        w[n - 2] = 1.0
        w *= h / 3.0
        w[n - 3] += -h / 12.0
        w[n - 2] += 2.0 * h / 3.0
        w[n - 1] += 5.0 * h / 12.0
    return w
