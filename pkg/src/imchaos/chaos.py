"""Wick-renormalized chaos integrals and their analytic moments.

The central object is the renormalized integral

    mu_N(f) = int f(x) e^{i beta Gamma_N(x)} e^{beta^2 sigma_N^2(x)/2} dx

of a truncated field sample Gamma_N with variance profile sigma_N^2.
The exponential weight makes e^{i beta Gamma_N(x)} mean-one pointwise,
so E[mu_N(f)] = int f for every truncation.  The limit object mu(f) is
represented only through its truncations; convergence is witnessed by
the analytic truncation gap E|mu_N - mu_M|^2, never by extrapolation.

Quadrature: uniform trapezoid on the periodic circle (spectrally
accurate), composite Simpson on boxes; both live in the grid's
``quad_weights``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .errors import DivergentMoment, EmptyEnsemble, GridMismatch, SupportTouchesBoundary
from .grids import Grid
from .kernels import CircleKernel, StarScaleKernel, circle_partial_sum, star_scale_cov_r
from .sampler import FieldSample


@dataclass(frozen=True)
class TestFunction:
    """Grid-sampled complex test function with support bookkeeping."""

    grid: Grid
    values: np.ndarray
    support: np.ndarray
    evaluator: Optional[Callable] = None
    name: str = ""
    dimension: int = 1

    @property
    def l1_norm(self) -> float:
        return float(self.grid.quad_weights() @ np.abs(self.values))

    @property
    def f_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.grid.x, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.values, dtype="<c16").tobytes())
        return h.hexdigest()


def test_function(grid: Grid, values, evaluator=None, name: str = "") -> TestFunction:
    """Build a TestFunction; the support mask is where values are nonzero."""
    values = np.asarray(values, dtype=complex)
    if values.shape != grid.x.shape:
        raise GridMismatch("values do not match the grid")
    return TestFunction(
        grid=grid,
        values=values,
        support=np.abs(values) > 0.0,
        evaluator=evaluator,
        name=name,
    )


@dataclass(frozen=True)
class ChaosObservable:
    """One evaluation of mu_N(f) with its generation metadata."""

    value: complex
    beta: float
    truncation: dict
    f_id: str
    provenance: str


@dataclass(frozen=True)
class SobolevSpec:
    """Negative Sobolev norm H^{-s} specification.

    ``s`` must exceed d/2; the window is embedded in a zero-padded
    periodic box ``padding`` times its size before the discrete
    transform.
    """

    s: float
    padding: int = 4
    grid_n: int = 0
    dimension: int = 1

    def __post_init__(self):
        if self.s <= self.dimension / 2.0:
            raise ValueError(f"s={self.s} must exceed d/2={self.dimension / 2.0}")
        if self.padding < 4:
            raise ValueError("padding factor must be an integer >= 4")


def default_sobolev_spec(grid_n: int = 0, dimension: int = 1, padding: int = 4) -> SobolevSpec:
    """Default order s = d/2 + 0.5, keeping the discrete sum well conditioned."""
    return SobolevSpec(s=dimension / 2.0 + 0.5, padding=padding, grid_n=grid_n, dimension=dimension)


def wick_weight(sample: FieldSample, beta: float) -> np.ndarray:
    """Renormalization weight e^{beta^2 sigma^2(x)/2} on the sample grid."""
    return np.exp(0.5 * beta * beta * sample.variance)


def chaos_integral(f: TestFunction, sample: FieldSample, beta: float) -> ChaosObservable:
    """Quadrature of f(x) e^{i beta Gamma(x)} e^{beta^2 sigma^2(x)/2}."""
    if not f.grid.same_as(sample.grid):
        raise GridMismatch("test function and sample grids differ")
    w = f.grid.quad_weights()
    value = complex(np.sum(w * f.values * np.exp(1j * beta * sample.values) * wick_weight(sample, beta)))
    return ChaosObservable(
        value=value,
        beta=beta,
        truncation=dict(sample.truncation),
        f_id=f.f_hash,
        provenance=f"{sample.kind}/stream{sample.stream_id}",
    )


def dilate_mask(mask: np.ndarray, cells: int, periodic: bool) -> np.ndarray:
    """Grow a boolean mask by ``cells`` grid cells on each side."""
    out = mask.copy()
    for shift in range(1, cells + 1):
        if periodic:
            out |= np.roll(mask, shift) | np.roll(mask, -shift)
        else:
            out[shift:] |= mask[:-shift]
            out[:-shift] |= mask[shift:]
    return out


def chaos_field(
    f: TestFunction,
    sample: FieldSample,
    beta: float,
    window_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Pointwise f e^{i beta Gamma} e^{beta^2 sigma^2/2} - 1 on a window.

    The compact window K defaults to the support of f dilated by one
    grid cell.  Inside K the renormalized field minus one is returned,
    outside K the value is zero.
    """
    if not f.grid.same_as(sample.grid):
        raise GridMismatch("test function and sample grids differ")
    if window_mask is None:
        window_mask = dilate_mask(f.support, 1, f.grid.periodic)
    out = np.zeros(f.grid.n, dtype=complex)
    inside = window_mask
    out[inside] = (
        f.values[inside]
        * np.exp(1j * beta * sample.values[inside])
        * wick_weight(sample, beta)[inside]
        - 1.0
    )
    return out


def covariance_on_grid(kernel, grid: Grid, truncation: Optional[int]) -> np.ndarray:
    """Bounded two-point covariance matrix used by the moment formulas."""
    n = grid.n
    if isinstance(kernel, np.ndarray):
        return kernel
    if isinstance(kernel, CircleKernel):
        if truncation is None:
            raise DivergentMoment("untruncated circle kernel is unbounded on the diagonal")
        row = circle_partial_sum(grid.x - grid.x[0], truncation)
        idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        return row[idx]
    if isinstance(kernel, StarScaleKernel):
        if not math.isfinite(kernel.t):
            raise DivergentMoment("star-scale kernel with t=inf is unbounded on the diagonal")
        seps = np.abs(np.subtract.outer(grid.x, grid.x))
        uniq, inv = np.unique(np.round(seps / grid.spacing).astype(int), return_inverse=True)
        vals = np.array([star_scale_cov_r(kernel, grid.spacing * u) for u in uniq])
        return vals[inv].reshape(n, n)
    raise TypeError(f"unsupported kernel type {type(kernel)!r}")


def second_moment_analytic(
    f: TestFunction,
    kernel,
    beta: float,
    truncation: Optional[int] = None,
) -> float:
    """E|mu(f)|^2 via the two-point identity E[:e^{i b G(x)}::e^{-i b G(y)}:] = e^{b^2 C(x,y)}.

    With a truncation (or a bounded kernel) this is the double
    quadrature of f(x) conj(f(y)) e^{beta^2 C(x,y)} on the grid of f,
    which is the exact expectation of the discrete chaos integral.  For
    the untruncated circle kernel the integrand has the integrable
    singularity |2 sin(u/2)|^{-beta^2}; that route requires beta^2 < d
    and evaluates the spectral autocorrelation of f against the
    singular factor by adaptive quadrature.
    """
    if isinstance(kernel, CircleKernel) and truncation is None:
        d = kernel.dimension
        if beta * beta >= d:
            raise DivergentMoment(f"beta^2={beta * beta} >= d={d} for the untruncated kernel")
        return _untruncated_circle_second_moment(f, beta)
    c = covariance_on_grid(kernel, f.grid, truncation)
    w = f.grid.quad_weights()
    wf = w * f.values
    val = np.real(wf @ np.exp(beta * beta * c) @ np.conj(wf))
    return float(val)


def _untruncated_circle_second_moment(f: TestFunction, beta: float) -> float:
    n = f.grid.n
    coeff = np.fft.fft(f.values) / n  # c_m = (1/2pi) int f e^{-im t} dt, grid-exact
    power = np.abs(coeff) ** 2
    m = np.fft.fftfreq(n, d=1.0 / n)

    def autocorr(u):
        # rho_f(u) = int f(t) conj(f(t-u)) dt = 2 pi sum_m |c_m|^2 e^{imu}
        return 2.0 * np.pi * float(np.real(np.sum(power * np.exp(1j * m * u))))

    b2 = beta * beta

    def integrand(u):
        return autocorr(u) * (2.0 * math.sin(u / 2.0)) ** (-b2)

    val, _ = quad(integrand, 0.0, 2.0 * math.pi, limit=300)
    return float(val)


def truncation_gap(n_low: int, n_high: int, f: TestFunction, beta: float) -> float:
    """Analytic E|mu_N(f) - mu_M(f)|^2 for coupled truncations N < M.

    Uses E[mu_N conj(mu_M)] = double-quad of f conj(f) e^{beta^2 C_min},
    which for coupled coefficients collapses the gap to the double
    quadrature of f conj(f) (e^{beta^2 C_M} - e^{beta^2 C_N}).
    """
    if n_low > n_high:
        n_low, n_high = n_high, n_low
    if n_low == n_high:
        return 0.0
    kernel = CircleKernel()
    low = second_moment_analytic(f, kernel, beta, truncation=n_low)
    high = second_moment_analytic(f, kernel, beta, truncation=n_high)
    return float(high - low)


def sobolev_neg_norm(
    field: np.ndarray,
    spec: SobolevSpec,
    grid: Grid,
    support_mask: Optional[np.ndarray] = None,
) -> float:
    """Negative Sobolev norm H^{-s} of a compactly supported grid field.

    Normalization (exact formulas used):
      h = grid spacing, ntot = padding * n, L = ntot * h,
      uhat_m = h * sum_j u_j exp(-2 pi i m j / ntot)   (approximates the
          continuous transform int u(x) e^{-2 pi i xi x} dx at xi = m/L),
      norm^2 = (1/L) * sum_m (1 + (m/L)^2)^{-s} |uhat_m|^2
          (Riemann sum of int (1+xi^2)^{-s} |uhat(xi)|^2 dxi with
          spacing dxi = 1/L).

    Non-periodic windows whose support mask reaches the window edge
    raise SupportTouchesBoundary (the support may be cut off there);
    the circle window wraps, so the guard does not apply.
    """
    field = np.asarray(field, dtype=complex)
    return float(_sobolev_batch(field[None, :], spec, grid, support_mask)[0])


def sobolev_neg_norm_batch(
    fields: np.ndarray,
    spec: SobolevSpec,
    grid: Grid,
    support_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Vectorized :func:`sobolev_neg_norm` over rows of ``fields``."""
    return _sobolev_batch(np.asarray(fields, dtype=complex), spec, grid, support_mask)


def _sobolev_batch(fields, spec, grid, support_mask):
    n = grid.n
    if fields.shape[-1] != n:
        raise GridMismatch("field does not match the grid")
    if support_mask is None:
        support_mask = np.any(np.abs(fields) > 0.0, axis=0)
    if not grid.periodic and n > 1 and (support_mask[0] or support_mask[-1]):
        raise SupportTouchesBoundary("support reaches the unpadded window edge")
    h = grid.spacing
    ntot = spec.padding * n
    length = ntot * h
    padded = np.zeros(fields.shape[:-1] + (ntot,), dtype=complex)
    padded[..., :n] = fields
    uhat = np.fft.fft(padded, axis=-1) * h
    xi = np.fft.fftfreq(ntot, d=h)
    weight = (1.0 + xi * xi) ** (-spec.s)
    return np.sqrt(np.sum(weight * np.abs(uhat) ** 2, axis=-1) / length)


# ---------------------------------------------------------------------------
# Ensemble persistence: little-endian binary records plus a JSON sidecar.

_RECORD = np.dtype([("sid", "<u8"), ("re", "<f8"), ("im", "<f8")])


def write_ensemble(path, values: np.ndarray, stream_ids: np.ndarray, meta: dict) -> None:
    """Stream complex samples to disk as (stream id u64, re f64, im f64)."""
    values = np.asarray(values, dtype=complex)
    rec = np.empty(values.size, dtype=_RECORD)
    rec["sid"] = np.asarray(stream_ids, dtype=np.uint64)
    rec["re"] = values.real
    rec["im"] = values.imag
    with open(path, "wb") as fh:
        fh.write(rec.tobytes())
    sidecar = dict(meta)
    sidecar["count"] = int(values.size)
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_ensemble(path):
    """Read back (values, stream_ids, meta) written by :func:`write_ensemble`."""
    with open(path, "rb") as fh:
        rec = np.frombuffer(fh.read(), dtype=_RECORD)
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    if meta.get("count") != rec.size:
        raise ValueError("sidecar count disagrees with record count")
    return rec["re"] + 1j * rec["im"], rec["sid"].copy(), meta


def ensemble_to_csv(path, values: np.ndarray) -> None:
    """CSV export (columns re, im) for small ensembles."""
    values = np.asarray(values, dtype=complex)
    np.savetxt(
        path,
        np.column_stack([values.real, values.imag]),
        delimiter=",",
        header="re,im",
        comments="",
        fmt="%.17g",
    )
