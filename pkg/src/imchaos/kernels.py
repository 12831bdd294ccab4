"""Covariance kernels of log-correlated Gaussian fields.

Three kernel families are provided:

* :class:`LogKernel` -- the generic logarithmic kernel
  ``C(x, y) = -log|x - y| + g(x, y)`` with a bounded symmetric regular
  part ``g``;
* :class:`CircleKernel` -- the fixed kernel
  ``C(t, t') = -log|e^{it} - e^{it'}|`` of the Gaussian free field
  restricted to the unit circle, with the cosine series
  ``sum_{k>=1} cos(k(t - t'))/k`` as its truncated form;
* :class:`StarScaleKernel` -- almost star-scale invariant covariances
  ``int_0^t k(e^u (x-y)) (1 - e^{-delta u}) du`` built from a compactly
  supported seed covariance ``k``.

All kernel objects are immutable after construction and evaluation is a
pure function, so they are safe to share across workers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DiagonalSingularity, InvalidWidth
from .quadrature import adaptive_simpson

# Pairs closer than this are treated as on-diagonal: the log kernels are
# genuinely singular there and callers must use truncated kernels instead.
DIAGONAL_GUARD = 1e-14

# Seed covariance radial profiles are tabulated on this many points.
SEED_PROFILE_POINTS = 4096

# Absolute tolerance of the adaptive Simpson rule for the scale integral.
SCALE_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class LogKernel:
    """Logarithmic kernel -log|x-y| + g(x,y) on a box domain.

    ``g`` must be symmetric and bounded from above; ``g=None`` means
    ``g == 0``.  Unboundedness of a user-supplied ``g`` away from the
    sampled grid is not detected.
    """

    dimension: int = 1
    g: Optional[Callable[[float, float], float]] = None
    domain: str = "box"

    def regular_part(self, x, y):
        return 0.0 if self.g is None else self.g(x, y)


@dataclass(frozen=True)
class CircleKernel:
    """Kernel -log|e^{it} - e^{it'}| of the circle free field."""

    dimension: int = 1


@dataclass(frozen=True)
class SeedCovariance:
    """Rotationally symmetric seed covariance on a radial grid.

    The profile satisfies k(0) = 1 and k(r) = 0 for r >= support_radius
    (and support_radius <= 1).  Its Fourier transform is nonnegative by
    construction and decays faster than (1 + xi^2)^{-s}.
    """

    radii: np.ndarray
    values: np.ndarray
    support_radius: float
    decay_exponent: float
    smoothness_order: float = math.inf
    dimension: int = 1
    _spline: CubicSpline = field(repr=False, default=None)

    def __call__(self, r):
        """Evaluate the radial profile at |r| (vectorized)."""
        r = np.abs(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        inside = r < self.support_radius
        if np.any(inside):
            out[inside] = self._spline(r[inside])
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class StarScaleKernel:
    """Almost star-scale invariant covariance built from a seed.

    ``t = math.inf`` selects the untruncated field, which is singular on
    the diagonal; finite ``t`` gives the smooth scale-t approximation.
    """

    seed: SeedCovariance
    delta: float
    t: float = math.inf

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.t < 0:
            raise ValueError("t must be nonnegative")


def log_kernel_eval(kernel: LogKernel, x, y) -> float:
    """Evaluate -log|x-y| + g(x,y).

    Raises DiagonalSingularity when |x-y| is below the diagonal guard;
    the kernel diverges there and truncated kernels must be used
    instead.
    """
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, float) - np.asarray(y, float))))
    if r < DIAGONAL_GUARD:
        raise DiagonalSingularity(f"|x-y|={r:.3e} below guard {DIAGONAL_GUARD:.0e}")
    return -math.log(r) + kernel.regular_part(x, y)


def circle_kernel_eval(theta, theta_p) -> float:
    """Evaluate -log|e^{i theta} - e^{i theta'}| = -log(2|sin((theta-theta')/2)|)."""
    d = math.remainder(theta - theta_p, 2.0 * math.pi)
    if abs(d) < DIAGONAL_GUARD:
        raise DiagonalSingularity("coincident angles")
    return -math.log(2.0 * abs(math.sin(d / 2.0)))


def circle_partial_sum(u, modes: int):
    """Truncated circle covariance sum_{k<=modes} cos(k u)/k (vectorized)."""
    u = np.asarray(u, dtype=float)
    k = np.arange(1, modes + 1)
    return np.cos(np.multiply.outer(u, k)) @ (1.0 / k)


def star_scale_variance(delta: float, t: float) -> float:
    """On-diagonal variance t - (1 - e^{-delta t})/delta of the scale-t field."""
    if not math.isfinite(t):
        raise DiagonalSingularity("untruncated star-scale variance diverges")
    return t - (1.0 - math.exp(-delta * t)) / delta


def star_scale_cov(kernel: StarScaleKernel, x, y) -> float:
    """Covariance int_0^t k(e^u (x-y)) (1 - e^{-delta u}) du.

    The seed support makes the integrand vanish for u > log(1/|x-y|),
    so the integration range is finite even for t = inf off-diagonal.
    """
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, float) - np.asarray(y, float))))
    return star_scale_cov_r(kernel, r)


def star_scale_cov_r(kernel: StarScaleKernel, r: float) -> float:
    """Same as :func:`star_scale_cov` with the separation given directly."""
    if r < DIAGONAL_GUARD:
        return star_scale_variance(kernel.delta, kernel.t)
    if r >= kernel.seed.support_radius:
        return 0.0
    upper = math.log(kernel.seed.support_radius / r)
    upper = min(upper, kernel.t)
    if upper <= 0.0:
        return 0.0
    seed, delta = kernel.seed, kernel.delta

    def integrand(u):
        return float(seed(r * math.exp(u))) * (1.0 - math.exp(-delta * u))

    return adaptive_simpson(integrand, 0.0, upper, tol=SCALE_QUAD_TOL)


def build_seed_covariance(width: float) -> SeedCovariance:
    """Construct a valid seed covariance from a bump of radius ``width``.

    The seed is the self-convolution of the smooth compactly supported
    bump exp(-1/(1 - (x/w)^2)), normalized to k(0) = 1.  Self-convolution
    forces the Fourier transform to be the square of a real even
    function, hence nonnegative, and the support radius is 2w <= 1.

    Raises InvalidWidth for widths outside (0, 0.5].
    """
    if not (0.0 < width <= 0.5):
        raise InvalidWidth(f"width {width} outside (0, 0.5]")
    # Self-convolution on a fine symmetric grid via FFT.
    m = 1 << 14
    half = 2.0 * width * 1.0001  # pad just beyond the support
    x = np.linspace(-half, half, m, endpoint=False)
    h = x[1] - x[0]
    bump = np.zeros(m)
    inside = np.abs(x) < width
    bump[inside] = np.exp(-1.0 / (1.0 - (x[inside] / width) ** 2))
    conv = np.fft.irfft(np.fft.rfft(np.fft.ifftshift(bump)) ** 2, n=m) * h
    conv = np.fft.fftshift(conv)
    conv /= conv[m // 2]  # normalize k(0) = 1
    radii = np.linspace(0.0, 1.0, SEED_PROFILE_POINTS)
    values = np.interp(radii, x[m // 2 :], conv[m // 2 :], left=1.0, right=0.0)
    values[radii >= 2.0 * width] = 0.0
    spline = CubicSpline(radii, values)
    return SeedCovariance(
        radii=radii,
        values=values,
        support_radius=2.0 * width,
        decay_exponent=2.0,
        _spline=spline,
    )


def kernel_to_json(kernel) -> str:
    """Serialize a kernel specification to its JSON document."""
    if isinstance(kernel, CircleKernel):
        doc = {"kind": "circle", "d": kernel.dimension}
    elif isinstance(kernel, LogKernel):
        doc = {"kind": "log", "d": kernel.dimension}
    elif isinstance(kernel, StarScaleKernel):
        doc = {
            "kind": "star-scale",
            "d": kernel.seed.dimension,
            "delta": kernel.delta,
            "t": "inf" if math.isinf(kernel.t) else kernel.t,
            "seed_width": kernel.seed.support_radius / 2.0,
        }
    else:
        raise TypeError(f"not a serializable kernel: {type(kernel)!r}")
    return json.dumps(doc, sort_keys=True)


def kernel_from_json(doc: str):
    """Inverse of :func:`kernel_to_json`.

    Log kernels deserialize with g == 0; callables are not serialized.
    """
    spec = json.loads(doc)
    kind = spec["kind"]
    if kind == "circle":
        return CircleKernel(dimension=spec.get("d", 1))
    if kind == "log":
        return LogKernel(dimension=spec.get("d", 1))
    if kind == "star-scale":
        seed = build_seed_covariance(spec["seed_width"])
        t = math.inf if spec["t"] == "inf" else float(spec["t"])
        return StarScaleKernel(seed=seed, delta=float(spec["delta"]), t=t)
    raise ValueError(f"unknown kernel kind {kind!r}")


def kernel_id(kernel) -> str:
    """Stable hash of a kernel specification (used to key basis caches)."""
    return hashlib.sha256(kernel_to_json(kernel).encode()).hexdigest()
