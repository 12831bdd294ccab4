"""Constructive phase solver: given f and a target z0 with |z0| < ||f||_1,
produce a smooth real phase a with  int f e^{i beta a} = z0.

The construction runs in three layers:

1. :func:`zero_phase` builds an explicit (generally non-smooth) phase
   killing the integral: with v = -arg(f)/beta the product f e^{i beta v}
   equals |f|, and winding a cumulative phase b through exactly one full
   period against the mass |f| makes the integral vanish.
2. :func:`smooth_zero_phase` mollifies that phase and repairs the
   mollification error with a damped two-parameter Newton iteration on
   localized perturbations g1, g2 whose responses are not linearly
   correlated -- a constructive stand-in for the Brouwer fixed-point
   step that guarantees a nearby zero survives smoothing.
3. :func:`phase_for_target` reaches nonzero targets by a continuous
   homotopy between the modulus-maximizing phase v and the smooth zero
   phase, bisecting the interpolation parameter for the requested
   modulus and fixing the argument with an added constant.

Targets with |z0| >= ||f||_1 are rejected: no phase can reach them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .chaos import TestFunction
from .errors import (
    DegeneratePerturbations,
    NoConvergence,
    NonUnimodalBracket,
    TargetTooLarge,
    ZeroFunction,
)
from .grids import box_grid

# Newton controls (damped, Armijo backtracking).
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
TRUST_RADIUS = 2.0
ARMIJO_C = 1e-4

# Geometric mollifier-width schedule, in units of the window length.
EPS_SCHEDULE = tuple(0.1 * 2.0**-k for k in range(13))

# Normalized-determinant threshold for admissible perturbation pairs.
DET_THRESHOLD = 0.1

# Feasibility margin: targets need |z0| < (1 - margin) ||f||_1.
TARGET_MARGIN = 1e-3


@dataclass(frozen=True)
class PhaseProfile:
    """A solved phase with its residual diagnostics."""

    values: np.ndarray
    epsilon: float
    s1: float
    s2: float
    residual: float
    target: complex
    theta: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class PerturbationPair:
    """Two localized perturbations with linearly independent responses."""

    g1: np.ndarray
    g2: np.ndarray
    theta1: complex
    theta2: complex

    @property
    def normalized_det(self) -> float:
        m = np.array(
            [
                [self.theta1.real, self.theta2.real],
                [self.theta1.imag, self.theta2.imag],
            ]
        )
        denom = abs(self.theta1) * abs(self.theta2)
        return abs(np.linalg.det(m)) / denom if denom > 0 else 0.0


def _quad(f: TestFunction, integrand: np.ndarray) -> complex:
    return complex(np.sum(f.grid.quad_weights() * integrand))


def _unwrapped_arg(f: TestFunction) -> np.ndarray:
    """arg(f), unwrapped inside each connected support run, 0 off support."""
    arg = np.zeros(f.grid.n)
    mask = f.support
    if not mask.any():
        return arg
    idx = np.flatnonzero(mask)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        arg[run] = np.unwrap(np.angle(f.values[run]))
    return arg


def mollifier_kernel(eps: float, h: float) -> np.ndarray:
    """Discrete unit-mass bump exp(-1/(1-(t/eps)^2)) sampled at spacing h."""
    m = int(np.floor(eps / h))
    if m < 1:
        return np.array([1.0])
    t = np.arange(-m, m + 1) * h / eps
    kern = np.zeros(t.size)
    inside = np.abs(t) < 1.0
    kern[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return kern / kern.sum()


def mollify(values: np.ndarray, eps: float, h: float) -> np.ndarray:
    """Convolution with the eps-mollifier, zero extension outside the window.

    Phases outside the support of f are free, so the extension choice
    only shows up through an O(eps) residual near the window edges,
    which the Newton stage absorbs.
    """
    kern = mollifier_kernel(eps, h)
    m = (kern.size - 1) // 2
    if m == 0:
        return values.copy()
    padded = np.pad(values, (m, m), mode="constant")
    return np.convolve(padded, kern, mode="valid")


def zero_phase(f: TestFunction, beta: float) -> PhaseProfile:
    """Explicit phase with int f e^{i beta a} = 0 (quadrature-exact winding).

    a = v + b where v = -arg(f)/beta flattens the phase of f and
    b winds through exactly one 2*pi/beta period against the cumulative
    mass of |f| along the (last) coordinate.
    """
    l1 = f.l1_norm
    if l1 <= 0.0:
        raise ZeroFunction("test function has zero L1 norm")
    x = f.grid.x
    absf = np.abs(f.values)
    cumulative = CubicSpline(x, absf).antiderivative()(x)
    total = cumulative[-1]
    b = (2.0 * np.pi / beta) * cumulative / total
    v = -_unwrapped_arg(f) / beta
    a = v + b
    residual = abs(_quad(f, f.values * np.exp(1j * beta * a)))
    return PhaseProfile(
        values=a,
        epsilon=0.0,
        s1=0.0,
        s2=0.0,
        residual=residual,
        target=0.0 + 0.0j,
    )


def perturbation_dictionary(f: TestFunction, size: int = 16) -> list:
    """Bump-modulated sinusoids supported inside supp f.

    Sixteen entries by default: four centers spread across the support,
    two frequencies, two phase offsets.
    """
    x = f.grid.x
    idx = np.flatnonzero(f.support)
    if idx.size == 0:
        raise ZeroFunction("empty support")
    lo, hi = x[idx[0]], x[idx[-1]]
    span = max(hi - lo, f.grid.spacing)
    centers = lo + span * np.array([0.2, 0.4, 0.6, 0.8])
    width = 0.22 * span
    out = []
    for c in centers:
        t = (x - c) / width
        bump = np.zeros_like(x)
        inside = np.abs(t) < 1.0
        bump[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
        for q in (1.0, 2.0):
            for phi in (0.0, 0.5 * np.pi):
                g = bump * np.sin(2.0 * np.pi * q * t + phi)
                if len(out) < size:
                    out.append(g)
    return out


def select_perturbation_pair(
    f: TestFunction,
    beta: float,
    a_hat: np.ndarray,
    dictionary: Optional[Sequence[np.ndarray]] = None,
) -> PerturbationPair:
    """Pick the dictionary pair maximizing the normalized response determinant.

    Responses theta_j = int f g_j e^{i beta a_hat}; each admissible g is
    rescaled so |theta_j| = 1, and the pair must satisfy
    |det [Re theta; Im theta]| >= 0.1 |theta_1||theta_2|.
    """
    if dictionary is None:
        dictionary = perturbation_dictionary(f)
    phase = np.exp(1j * beta * a_hat)
    cands = []
    floor = 1e-10 * max(f.l1_norm, 1.0)
    for g in dictionary:
        theta = _quad(f, f.values * g * phase)
        if abs(theta) > floor:
            cands.append((g / abs(theta), theta / abs(theta), abs(theta)))
    best = None
    best_score = -1.0
    for i in range(len(cands)):
        for j in range(i + 1, len(cands)):
            det = abs(
                cands[i][1].real * cands[j][1].imag - cands[i][1].imag * cands[j][1].real
            )
            if det < DET_THRESHOLD:
                continue
            # Raw determinant |theta_i||theta_j| sin(angle): rewards strong
            # responses, so the normalized g stay mild perturbations.
            score = det * cands[i][2] * cands[j][2]
            if score > best_score:
                best_score = score
                best = PerturbationPair(
                    g1=cands[i][0], g2=cands[j][0], theta1=cands[i][1], theta2=cands[j][1]
                )
    if best is None:
        raise DegeneratePerturbations(
            f"no pair with normalized determinant >= {DET_THRESHOLD}"
        )
    return best


def _newton_zero(f, beta, a_eps, pair):
    """Damped Newton for eta(s) = int f e^{i(beta a_eps + s1 g1 + s2 g2)} = 0.

    Steps are damped twice over: an initial cap keeps the pointwise
    phase perturbation |s . g| below half a radian (the response-
    normalized g can have large sup norm), then Armijo backtracking on
    the squared-residual merit.
    """
    wf = f.grid.quad_weights() * f.values
    g1, g2 = pair.g1, pair.g2
    gmax = max(np.abs(g1).max(), np.abs(g2).max(), 1e-30)

    def eta_and_jac(s):
        phase = np.exp(1j * (beta * a_eps + s[0] * g1 + s[1] * g2))
        eta = complex(np.sum(wf * phase))
        d1 = complex(np.sum(wf * 1j * g1 * phase))
        d2 = complex(np.sum(wf * 1j * g2 * phase))
        return eta, np.array([[d1.real, d2.real], [d1.imag, d2.imag]])

    s = np.zeros(2)
    eta, jac = eta_and_jac(s)
    for it in range(1, NEWTON_MAX_ITER + 1):
        if abs(eta) <= NEWTON_TOL:
            return s, abs(eta), it
        rhs = -np.array([eta.real, eta.imag])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            return None
        t = min(1.0, 0.5 / (gmax * max(np.linalg.norm(step), 1e-30)))
        merit = abs(eta) ** 2
        accepted = False
        while t > 1e-8:
            trial = s + t * step
            if np.linalg.norm(trial) > TRUST_RADIUS:
                t *= 0.5
                continue
            eta_t, jac_t = eta_and_jac(trial)
            if abs(eta_t) ** 2 <= (1.0 - ARMIJO_C * t) * merit:
                s, eta, jac = trial, eta_t, jac_t
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return None
    if abs(eta) <= NEWTON_TOL:
        return s, abs(eta), NEWTON_MAX_ITER
    return None


def smooth_zero_phase(
    f: TestFunction,
    beta: float,
    eps_schedule: Optional[Sequence[float]] = None,
    dictionary: Optional[Sequence[np.ndarray]] = None,
) -> PhaseProfile:
    """Mollified phase with int f e^{i beta a} = 0 to Newton tolerance.

    For each width in the decreasing schedule the base phase is
    mollified and a_{eps,s} = mollified + (s1 g1 + s2 g2)/beta is solved
    for eta(s) = 0 by damped Newton with the analytic Jacobian
    d_j eta = int i f g_j e^{i(...)}.  The first width whose Newton run
    converges inside the trust radius wins.
    """
    base = zero_phase(f, beta)
    pair = select_perturbation_pair(f, beta, base.values, dictionary)
    if eps_schedule is None:
        eps_schedule = EPS_SCHEDULE
    window = f.grid.x[-1] - f.grid.x[0]
    h = f.grid.spacing
    for eps in eps_schedule:
        a_eps = mollify(base.values, eps * window, h)
        result = _newton_zero(f, beta, a_eps, pair)
        if result is not None:
            s, res, iters = result
            a = a_eps + (s[0] * pair.g1 + s[1] * pair.g2) / beta
            return PhaseProfile(
                values=a,
                epsilon=eps,
                s1=float(s[0]),
                s2=float(s[1]),
                residual=res,
                target=0.0 + 0.0j,
                iterations=iters,
            )
    raise NoConvergence("mollifier schedule exhausted without Newton convergence")


def phase_for_target(
    f: TestFunction,
    beta: float,
    z0: complex,
    eps_schedule: Optional[Sequence[float]] = None,
) -> PhaseProfile:
    """Phase with int f e^{i beta a} = z0 for any |z0| < ||f||_1.

    Interpolates b_eps = (1 - eps) * mollified(v) + eps * a0 between the
    modulus-||f||_1 phase v and the smooth zero phase a0; the modulus of
    the integral is continuous in eps, so the leftmost crossing of |z0|
    is bracketed by a 64-point scan and refined by bisection.  A final
    constant theta/beta rotates the result onto arg z0.
    """
    z0 = complex(z0)
    l1 = f.l1_norm
    if l1 <= 0.0:
        raise ZeroFunction("test function has zero L1 norm")
    if abs(z0) >= (1.0 - TARGET_MARGIN) * l1:
        raise TargetTooLarge(
            f"|z0|={abs(z0):.6g} not below (1-{TARGET_MARGIN}) * ||f||_1={l1:.6g}"
        )
    if z0 == 0:
        return smooth_zero_phase(f, beta, eps_schedule)
    a0 = smooth_zero_phase(f, beta, eps_schedule)
    v = -_unwrapped_arg(f) / beta
    window = f.grid.x[-1] - f.grid.x[0]
    h = f.grid.spacing
    wf = f.grid.quad_weights() * f.values

    def b_of(eps):
        if eps == 0.0:
            return v
        return (1.0 - eps) * mollify(v, eps * window, h) + eps * a0.values

    def response(eps):
        return complex(np.sum(wf * np.exp(1j * beta * b_of(eps))))

    def gap(eps):
        return abs(response(eps)) - abs(z0)

    scan = np.linspace(0.0, 1.0, 64)
    vals = [gap(e) for e in scan]
    bracket = None
    for i in range(len(scan) - 1):
        if vals[i] == 0.0:
            bracket = (scan[i], scan[i])
            break
        if vals[i] > 0.0 and vals[i + 1] <= 0.0:
            bracket = (scan[i], scan[i + 1])
            break
    if bracket is None:
        fine = np.linspace(0.0, 1.0, 512)
        fvals = [gap(e) for e in fine]
        for i in range(len(fine) - 1):
            if fvals[i] > 0.0 and fvals[i + 1] <= 0.0:
                bracket = (fine[i], fine[i + 1])
                break
    if bracket is None:
        raise NonUnimodalBracket("could not bracket the target modulus")
    if bracket[0] == bracket[1]:
        eps_star = bracket[0]
    else:
        eps_star = brentq(gap, bracket[0], bracket[1], xtol=1e-14, rtol=8.9e-16)
    b_star = b_of(eps_star)
    eta = response(eps_star)
    theta = float(np.angle(z0) - np.angle(eta))
    a = b_star + theta / beta
    residual = abs(complex(np.sum(wf * np.exp(1j * beta * a))) - z0)
    return PhaseProfile(
        values=a,
        epsilon=float(eps_star),
        s1=a0.s1,
        s2=a0.s2,
        residual=residual,
        target=z0,
        theta=theta,
        iterations=a0.iterations,
    )


def verify_phase(f: TestFunction, beta: float, profile: PhaseProfile, z0: complex) -> float:
    """Recompute int f e^{i beta a} at doubled resolution; return |result - z0|.

    The profile is interpolated cubically; f is evaluated exactly when
    it carries an evaluator and linearly interpolated otherwise.
    """
    x = f.grid.x
    fine_n = 2 * f.grid.n - 1
    fine = box_grid(float(x[0]), float(x[-1]), fine_n)
    a_fine = CubicSpline(x, profile.values)(fine.x)
    if f.evaluator is not None:
        f_fine = np.asarray(f.evaluator(fine.x), dtype=complex)
    else:
        f_fine = np.interp(fine.x, x, f.values.real) + 1j * np.interp(
            fine.x, x, f.values.imag
        )
    val = complex(np.sum(fine.quad_weights() * f_fine * np.exp(1j * beta * a_fine)))
    return abs(val - complex(z0))


def profile_to_csv(profile: PhaseProfile, f: TestFunction, path) -> None:
    """CSV export of the solved phase, columns x, a."""
    data = np.column_stack([f.grid.x, profile.values])
    np.savetxt(path, data, delimiter=",", header="x,a", comments="", fmt="%.17g")


def profile_diagnostics(profile: PhaseProfile) -> dict:
    """JSON-ready diagnostics of a solve."""
    return {
        "target": [profile.target.real, profile.target.imag],
        "residual": profile.residual,
        "epsilon": profile.epsilon,
        "s1": profile.s1,
        "s2": profile.s2,
        "theta": profile.theta,
        "iterations": profile.iterations,
    }
