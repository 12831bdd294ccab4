"""Sampling of truncated log-correlated Gaussian fields.

Three sampling routes:

* the circle free field through its explicit sine/cosine series
  ``sum_{k<=N} (A_k sin(k t) + B_k cos(k t))/sqrt(k)``;
* arbitrary positive semidefinite kernels through the discretized
  Karhunen-Loeve expansion ``sum_k A_k sqrt(lambda_k) f_k``;
* deterministic Cameron-Martin shifts, applied additively to the
  i.i.d. standard Gaussian coefficients A_k.

Every sample records the deterministic variance profile
``sigma^2(x) = E[Gamma(x)^2]`` of its truncation, which the chaos
module needs for Wick renormalization.  Samplers are stateless given
(configuration, stream id): the same stream id reproduces the same
field bit for bit regardless of scheduling.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AliasedGrid, IndexOutOfRange, NotPositive
from .grids import Grid, box_grid, circle_grid
from .kernels import (
    CircleKernel,
    LogKernel,
    StarScaleKernel,
    circle_partial_sum,
    kernel_id,
    log_kernel_eval,
    star_scale_cov_r,
    star_scale_variance,
)
from .rng import stream

# Retained eigenvalues must exceed RETENTION_TOL * lambda_1.
RETENTION_TOL = 1e-12

# Minimum eigenvalue below -PSD_TOL * max eigenvalue trips NotPositive.
PSD_TOL = 1e-6

_BASIS_MAGIC = b"IMCKLB1\x00"


@dataclass(frozen=True)
class KLBasis:
    """Eigenpairs of a discretized covariance operator.

    ``modes`` has shape (m, n): row k is the grid function f_k, weighted
    orthonormal in the sense sum_i w_i f_j(x_i) f_k(x_i) = delta_jk.
    Eigenvalues are sorted nonincreasing and all exceed the retention
    tolerance relative to the largest.
    """

    grid: Grid
    weights: np.ndarray
    eigenvalues: np.ndarray
    modes: np.ndarray
    kernel_hash: str

    @property
    def m(self) -> int:
        return self.eigenvalues.size

    def variance_profile(self) -> np.ndarray:
        return self.eigenvalues @ self.modes**2

    def reconstruct(self) -> np.ndarray:
        """Covariance matrix sum_k lambda_k f_k f_k^T implied by the basis."""
        return (self.modes.T * self.eigenvalues) @ self.modes


@dataclass(frozen=True)
class FieldSample:
    """One realization of a truncated field on its grid."""

    grid: Grid
    values: np.ndarray
    variance: np.ndarray
    truncation: dict
    stream_id: int
    kind: str


@dataclass(frozen=True)
class CoefficientShift:
    """Deterministic additive shift of selected Gaussian coefficients."""

    indices: np.ndarray
    values: np.ndarray
    basis_id: str = ""


def circle_mode_matrix(modes: int, grid: Grid) -> np.ndarray:
    """(2N, n) matrix of sin(k t)/sqrt(k) rows followed by cos(k t)/sqrt(k)."""
    k = np.arange(1, modes + 1)
    kt = np.multiply.outer(k, grid.x)
    root = np.sqrt(k)[:, None]
    return np.vstack([np.sin(kt) / root, np.cos(kt) / root])


def sample_circle_field(
    modes: int,
    grid_n: int,
    seed: int,
    stream_id: int = 0,
    coeffs: Optional[tuple] = None,
) -> FieldSample:
    """Draw the N-mode circle field on a uniform grid of ``grid_n`` angles.

    Requires grid_n >= 4 * modes (anti-aliasing: the chaos integrand
    e^{i beta Gamma} oscillates faster than Gamma itself).  ``coeffs``
    is a test hook forcing the (A, B) coefficient vectors.
    """
    if modes < 1:
        raise ValueError("modes must be >= 1")
    if grid_n < 4 * modes:
        raise AliasedGrid(f"grid {grid_n} < 4*{modes}")
    grid = circle_grid(grid_n)
    if coeffs is None:
        g = stream(seed, stream_id)
        a = g.standard_normal(modes)
        b = g.standard_normal(modes)
    else:
        a, b = (np.asarray(c, dtype=float) for c in coeffs)
    k = np.arange(1, modes + 1)
    root = np.sqrt(k)
    values = (a / root) @ np.sin(np.multiply.outer(k, grid.x)) + (b / root) @ np.cos(
        np.multiply.outer(k, grid.x)
    )
    harmonic = float(np.sum(1.0 / k))
    return FieldSample(
        grid=grid,
        values=values,
        variance=np.full(grid_n, harmonic),
        truncation={"modes": modes},
        stream_id=stream_id,
        kind="circle",
    )


def covariance_matrix(kernel, grid: Grid) -> np.ndarray:
    """Dense covariance matrix of ``kernel`` on ``grid``.

    Singular kernels get their diagonal regularized at the grid scale:
    the matrix returned is the covariance of the field truncated at
    resolution h (mode count n/4 on the circle, scale log(1/h) for
    star-scale and log kernels), which is what a lattice field at that
    resolution actually has for a self-variance and keeps the matrix
    positive semidefinite.
    """
    x = grid.x
    n = grid.n
    h = grid.spacing
    if isinstance(kernel, np.ndarray):
        if kernel.shape != (n, n):
            raise ValueError("matrix kernel has wrong shape")
        return np.array(kernel, dtype=float)
    if isinstance(kernel, CircleKernel):
        u = x - x[0]
        row = circle_partial_sum(u, max(n // 4, 1))
        idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        return row[idx]
    if isinstance(kernel, StarScaleKernel):
        t_eff = kernel.t if math.isfinite(kernel.t) else math.log(1.0 / h)
        seps = h * np.arange(n)
        if np.allclose(np.diff(x), h, rtol=1e-12, atol=0.0):
            row = np.array([star_scale_cov_r(kernel, s) for s in seps])
            row[0] = star_scale_variance(kernel.delta, t_eff)
            idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
            return row[idx]
        c = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                r = abs(x[i] - x[j])
                c[i, j] = c[j, i] = (
                    star_scale_variance(kernel.delta, t_eff)
                    if r < h / 2
                    else star_scale_cov_r(kernel, r)
                )
        return c
    if isinstance(kernel, LogKernel):
        # Cell-averaged self-value of the log singularity: the mean of
        # -log|u - v| over one grid cell squared is -log h + 3/2, which is
        # the self-variance of the field averaged at resolution h and (unlike
        # smaller diagonals) keeps the matrix positive definite.
        diag = math.log(1.0 / h) + 1.5
        c = np.empty((n, n))
        for i in range(n):
            c[i, i] = diag + kernel.regular_part(x[i], x[i])
            for j in range(i + 1, n):
                c[i, j] = c[j, i] = log_kernel_eval(kernel, x[i], x[j])
        return c
    raise TypeError(f"unsupported kernel type {type(kernel)!r}")


def kl_decompose(kernel, grid_n: int, mode_cap: Optional[int] = None, domain=(0.0, 1.0)) -> KLBasis:
    """Eigendecompose W^{1/2} C W^{1/2} on a grid of ``grid_n`` points.

    ``W`` holds trapezoidal quadrature weights (exact for the periodic
    circle).  At most ``mode_cap`` eigenpairs above the retention
    tolerance are returned, eigenvalues nonincreasing.  Raises
    NotPositive when the smallest eigenvalue drops below
    -PSD_TOL * (largest eigenvalue).
    """
    if isinstance(kernel, CircleKernel):
        grid = circle_grid(grid_n)
    else:
        grid = box_grid(domain[0], domain[1], grid_n)
    w = grid.trapezoid_weights()
    c = covariance_matrix(kernel, grid)
    root_w = np.sqrt(w)
    b = root_w[:, None] * c * root_w[None, :]
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    if evals[0] <= 0:
        raise NotPositive("kernel has no positive eigenvalue at grid scale")
    if evals[-1] < -PSD_TOL * evals[0]:
        raise NotPositive(
            f"min eigenvalue {evals[-1]:.3e} < -{PSD_TOL:.0e} * max {evals[0]:.3e}"
        )
    keep = evals > RETENTION_TOL * evals[0]
    if mode_cap is not None:
        keep &= np.arange(evals.size) < mode_cap
    evals = evals[keep]
    modes = (evecs[:, keep] / root_w[:, None]).T
    try:
        khash = kernel_id(kernel)
    except TypeError:
        khash = "raw-matrix"
    return KLBasis(
        grid=grid,
        weights=w,
        eigenvalues=evals,
        modes=np.ascontiguousarray(modes),
        kernel_hash=khash,
    )


def sample_kl(
    basis: KLBasis,
    seed: int,
    stream_id: int = 0,
    coeffs: Optional[np.ndarray] = None,
) -> FieldSample:
    """Draw Gamma = sum_k A_k sqrt(lambda_k) f_k from a KL basis."""
    if coeffs is None:
        a = stream(seed, stream_id).standard_normal(basis.m)
    else:
        a = np.asarray(coeffs, dtype=float)
        if a.shape != (basis.m,):
            raise ValueError("coefficient vector has wrong length")
    values = (a * np.sqrt(basis.eigenvalues)) @ basis.modes
    return FieldSample(
        grid=basis.grid,
        values=values,
        variance=basis.variance_profile(),
        truncation={"kl_modes": basis.m, "kernel": basis.kernel_hash},
        stream_id=stream_id,
        kind="kl",
    )


def sample_shifted(
    basis: KLBasis,
    shift: CoefficientShift,
    seed: int,
    stream_id: int = 0,
    coeffs: Optional[np.ndarray] = None,
) -> FieldSample:
    """Like :func:`sample_kl` with A_k -> A_k + shift_k on selected modes.

    The shift is deterministic, so the variance profile is unchanged.
    """
    idx = np.asarray(shift.indices, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= basis.m):
        raise IndexOutOfRange(f"shift index outside [0, {basis.m})")
    if coeffs is None:
        a = stream(seed, stream_id).standard_normal(basis.m)
    else:
        a = np.array(coeffs, dtype=float)
    a = a.copy()
    a[idx] += np.asarray(shift.values, dtype=float)
    values = (a * np.sqrt(basis.eigenvalues)) @ basis.modes
    return FieldSample(
        grid=basis.grid,
        values=values,
        variance=basis.variance_profile(),
        truncation={"kl_modes": basis.m, "kernel": basis.kernel_hash},
        stream_id=stream_id,
        kind="kl-shifted",
    )


def field_to_csv(sample: FieldSample, path) -> None:
    """Write a sample as CSV with columns x, gamma, variance."""
    data = np.column_stack([sample.grid.x, sample.values, sample.variance])
    np.savetxt(path, data, delimiter=",", header="x,gamma,variance", comments="", fmt="%.17g")


def save_basis(basis: KLBasis, path) -> None:
    """Binary basis cache: header plus little-endian float64 payload."""
    with open(path, "wb") as fh:
        fh.write(_BASIS_MAGIC)
        fh.write(struct.pack("<QQ", basis.grid.n, basis.m))
        fh.write(struct.pack("<?d", basis.grid.periodic, basis.grid.length))
        fh.write(bytes.fromhex(basis.kernel_hash) if _is_hex(basis.kernel_hash) else b"\x00" * 32)
        for arr in (basis.grid.x, basis.weights, basis.eigenvalues, basis.modes):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_basis(path) -> KLBasis:
    """Inverse of :func:`save_basis`."""
    with open(path, "rb") as fh:
        if fh.read(len(_BASIS_MAGIC)) != _BASIS_MAGIC:
            raise ValueError("not a basis cache file")
        n, m = struct.unpack("<QQ", fh.read(16))
        periodic, length = struct.unpack("<?d", fh.read(9))
        khash = fh.read(32).hex()
        x = np.frombuffer(fh.read(8 * n), dtype="<f8")
        w = np.frombuffer(fh.read(8 * n), dtype="<f8")
        evals = np.frombuffer(fh.read(8 * m), dtype="<f8")
        modes = np.frombuffer(fh.read(8 * m * n), dtype="<f8").reshape(m, n)
    grid = Grid(x=x.copy(), periodic=periodic, length=length)
    return KLBasis(
        grid=grid,
        weights=w.copy(),
        eigenvalues=evals.copy(),
        modes=modes.copy(),
        kernel_hash=khash,
    )


def basis_cache_path(directory, kernel, grid_n: int) -> str:
    """Cache file name keyed by the kernel hash and grid size."""
    return f"{directory}/kl_{kernel_id(kernel)[:16]}_n{grid_n}.klb"


def _is_hex(s: str) -> bool:
    try:
        return len(bytes.fromhex(s)) == 32
    except ValueError:
        return False
