"""Bessel functions of the first kind and the oscillatory circle map.

The map

    F(s1, s2) = int_0^{2pi} e^{i (s1 sin(t) + s2 cos(2t))} dt

ties the first two reordered Fourier coordinates of the circle field to
Bessel values: F(s, 0) = 2 pi J_0(|s|), and at (j0, 0), with j0 the
smallest positive root of J_0, the Jacobian has determinant of modulus
(2 pi)^2 J_1(j0) J_2(j0) != 0, so F is locally invertible there.  The
companion map phi0 reweights the same integrand by the truncated
variance profile of the circle field and collapses to K * F whenever
the truncation closes full sine/cosine pairs.

Bessel evaluation is self-contained: ascending series for |x| <= 12,
the integral representation (1/pi) int_0^pi cos(n t - x sin t) dt on a
256-node trapezoid beyond (the integrand extends to an even periodic
function, so the trapezoid rule converges geometrically).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ImchaosError

SERIES_SPLIT = 12.0
MAX_ORDER = 8
MAX_ARGUMENT = 50.0
QUAD_NODES_F = 1024
QUAD_NODES_BESSEL = 256


class OrderOutOfRange(ImchaosError):
    """Bessel order outside the supported range 0..8."""


class ArgumentOutOfRange(ImchaosError):
    """Bessel argument outside |x| <= 50."""


def bessel_j(n: int, x: float) -> float:
    """J_n(x) for integer order 0 <= n <= 8 and |x| <= 50."""
    if not (0 <= n <= MAX_ORDER):
        raise OrderOutOfRange(f"order {n} outside [0, {MAX_ORDER}]")
    if abs(x) > MAX_ARGUMENT:
        raise ArgumentOutOfRange(f"|x|={abs(x)} exceeds {MAX_ARGUMENT}")
    if abs(x) <= SERIES_SPLIT:
        return _series(n, x)
    return _integral(n, x)


def _series(n: int, x: float) -> float:
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    q = half * half
    m = 0
    while True:
        m += 1
        term *= -q / (m * (m + n))
        total += term
        if abs(term) <= 1e-16 * max(abs(total), 1e-300) or m > 200:
            return total


def _integral(n: int, x: float) -> float:
    # Trapezoid on [0, pi]; the integrand extends to an even 2pi-periodic
    # function, so this is half a full-period rule and converges geometrically.
    t = np.linspace(0.0, np.pi, QUAD_NODES_BESSEL + 1)
    vals = np.cos(n * t - x * np.sin(t))
    vals[0] *= 0.5
    vals[-1] *= 0.5
    return float(np.sum(vals) / QUAD_NODES_BESSEL)


def bessel_j0_root() -> float:
    """Smallest positive root of J_0, by bisection on [2, 3] to |J_0| <= 1e-14."""
    lo, hi = 2.0, 3.0
    flo = bessel_j(0, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = bessel_j(0, mid)
        if abs(fmid) <= 1e-14 or (hi - lo) < 4e-16 * mid:
            return mid
        if (flo > 0) == (fmid > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_THETA = 2.0 * np.pi * np.arange(QUAD_NODES_F) / QUAD_NODES_F
_SIN = np.sin(_THETA)
_COS2 = np.cos(2.0 * _THETA)
_DTHETA = 2.0 * np.pi / QUAD_NODES_F


def circle_map(s1: float, s2: float) -> complex:
    """F(s1, s2) = int_0^{2pi} e^{i(s1 sin t + s2 cos 2t)} dt.

    Periodic trapezoid with 1024 nodes; the integrand is entire in t,
    so the rule is far past saturation for |s| <= 50.
    """
    return complex(np.sum(np.exp(1j * (s1 * _SIN + s2 * _COS2))) * _DTHETA)


def circle_map_jacobian(s1: float, s2: float) -> np.ndarray:
    """Real 2x2 Jacobian [Re d1F, Re d2F; Im d1F, Im d2F].

    The partials are the analytic quadratures
    d1 F = i int sin(t) e^{i(...)} dt,  d2 F = i int cos(2t) e^{i(...)} dt.
    """
    phase = np.exp(1j * (s1 * _SIN + s2 * _COS2))
    d1 = complex(np.sum(1j * _SIN * phase) * _DTHETA)
    d2 = complex(np.sum(1j * _COS2 * phase) * _DTHETA)
    return np.array([[d1.real, d2.real], [d1.imag, d2.imag]])


def invert_circle_map(
    target: complex,
    start=(None, 0.0),
    tol: float = 1e-12,
    max_iter: int = 60,
):
    """Newton inversion of F from ``start`` (default (j0, 0)).

    Returns the parameter pair (s1, s2) with F(s) = target, or raises
    ImchaosError when Newton stalls.
    """
    s = np.array([bessel_j0_root() if start[0] is None else start[0], start[1]], dtype=float)
    for _ in range(max_iter):
        val = circle_map(s[0], s[1])
        err = np.array([val.real - target.real, val.imag - target.imag])
        if np.linalg.norm(err) <= tol:
            return s
        jac = circle_map_jacobian(s[0], s[1])
        try:
            step = np.linalg.solve(jac, -err)
        except np.linalg.LinAlgError:
            raise ImchaosError("singular Jacobian during circle-map inversion")
        t = 1.0
        base = np.linalg.norm(err)
        while t > 1e-8:
            trial = s + t * step
            tval = circle_map(trial[0], trial[1])
            terr = np.hypot(tval.real - target.real, tval.imag - target.imag)
            if terr < base:
                s = trial
                break
            t *= 0.5
        else:
            raise ImchaosError("circle-map inversion stalled")
    raise ImchaosError("circle-map inversion did not converge")


def circle_basis_sq_prefix(theta: np.ndarray, n_zero: int) -> np.ndarray:
    """sum_{n <= n_zero} h_n(theta)^2 over the reordered circle basis.

    The orthonormal basis {sin(kt)/sqrt(k), cos(kt)/sqrt(k)} is
    reordered so h_1 = sin(t) and h_2 = cos(2t)/sqrt(2); the displaced
    functions cos(t) and sin(2t)/sqrt(2) take positions 3 and 4, and
    pairs k >= 3 follow in (sin, cos) order.  Whenever the prefix closes
    full pairs the sum is the constant H_k, and the weight in phi0 is
    exactly flat.
    """
    out = np.zeros_like(theta)
    remaining = n_zero
    head = (
        np.sin(theta) ** 2,
        np.cos(2.0 * theta) ** 2 / 2.0,
        np.cos(theta) ** 2,
        np.sin(2.0 * theta) ** 2 / 2.0,
    )
    for hsq in head:
        if remaining == 0:
            return out
        out += hsq
        remaining -= 1
    k = 3
    while remaining > 0:
        out += np.sin(k * theta) ** 2 / k
        remaining -= 1
        if remaining > 0:
            out += np.cos(k * theta) ** 2 / k
            remaining -= 1
        k += 1
    return out


def phi0_map(s1: float, s2: float, n_zero: int, beta: float):
    """Conditional-mean map of the truncated circle chaos and its constant.

    Returns (phi0(s1, s2), K) with

        phi0 = int_0^{2pi} e^{(beta^2/2) sum_{n<=n_zero} h_n^2}
                           e^{i beta (s1 h1 + s2 h2)} dt,
        K    = (1/2pi) int_0^{2pi} e^{(beta^2/2) sum_{n<=n_zero} h_n^2} dt,

    where h1 = sin t and h2 = cos(2t)/sqrt(2).
    """
    if n_zero < 2:
        raise ValueError("n_zero must be >= 2")
    weight = np.exp(0.5 * beta * beta * circle_basis_sq_prefix(_THETA, n_zero))
    k_const = float(np.sum(weight) * _DTHETA / (2.0 * np.pi))
    phase = np.exp(1j * beta * (s1 * _SIN + s2 * _COS2 / math.sqrt(2.0)))
    value = complex(np.sum(weight * phase) * _DTHETA)
    return value, k_const


def phi0_flatness(n_zero: int, beta: float, s_max: float = 3.0, probes: int = 7) -> float:
    """sup over an |s|<=s_max grid of |phi0 - K F(beta s1, beta s2/sqrt 2)| / K."""
    grid = np.linspace(-s_max, s_max, probes)
    sup = 0.0
    for s1 in grid:
        for s2 in grid:
            val, k_const = phi0_map(s1, s2, n_zero, beta)
            ref = circle_map(beta * s1, beta * s2 / math.sqrt(2.0))
            sup = max(sup, abs(val - k_const * ref) / k_const)
    return sup


def bessel_report() -> dict:
    """Self-check report of the circle-map diffeomorphism witness."""
    j0 = bessel_j0_root()
    j1 = bessel_j(1, j0)
    j2 = bessel_j(2, j0)
    jac = circle_map_jacobian(j0, 0.0)
    det = float(np.linalg.det(jac))
    fd = _finite_difference_jacobian(j0, 0.0)
    fd_error = float(np.max(np.abs(jac - fd)))
    inv_err = 0.0
    radius = 0.3 * math.sqrt(abs(det))
    for angle in np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False):
        offset = np.linalg.solve(jac, radius * np.array([np.cos(angle), np.sin(angle)]))
        s_true = np.array([j0, 0.0]) + 0.5 * offset
        target = circle_map(s_true[0], s_true[1])
        s_back = invert_circle_map(target)
        inv_err = max(inv_err, float(np.max(np.abs(s_back - s_true))))
    return {
        "j0": j0,
        "J1_at_j0": j1,
        "J2_at_j0": j2,
        "det_DF": det,
        "fd_error": fd_error,
        "inversion_max_error": inv_err,
    }


def _finite_difference_jacobian(s1: float, s2: float, step: float = 1e-5) -> np.ndarray:
    d1 = (circle_map(s1 + step, s2) - circle_map(s1 - step, s2)) / (2.0 * step)
    d2 = (circle_map(s1, s2 + step) - circle_map(s1, s2 - step)) / (2.0 * step)
    return np.array([[d1.real, d2.real], [d1.imag, d2.imag]])
