"""Monte Carlo engine over chaos ensembles.

Work is partitioned into fixed-size blocks of samples; block b draws
its Gaussians from the counter-based stream (seed, ENSEMBLE_BASE + b)
and results are merged in block order, so the output is a pure function
of (configuration, seed) regardless of worker count or scheduling.
Moment accumulation uses numpy's fixed-order pairwise summation over
the merged array for the same reason.

Estimated ball probabilities carry Wilson score intervals, which stay
honest at zero hit counts.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .chaos import TestFunction, default_sobolev_spec, dilate_mask, sobolev_neg_norm_batch
from .errors import EmptyEnsemble
from .grids import circle_grid
from .kernels import LogKernel, StarScaleKernel, build_seed_covariance
from .rng import ENSEMBLE_BASE, stream
from .sampler import circle_mode_matrix, kl_decompose
from .testfuncs import builtin_on_grid, from_csv

BLOCK_SIZE = 8192
WILSON_Z = 1.959963984540054  # 95% normal quantile

FIELD_KINDS = ("circle", "star-scale", "kl-grid")


@dataclass(frozen=True)
class EnsembleConfig:
    """Full configuration of a chaos ensemble run."""

    kind: str = "circle"
    beta: float = 0.5
    modes: int = 64
    grid_n: int = 256
    samples: int = 1000
    seed: int = 0
    workers: int = 1
    f_name: str = "one"
    delta: float = 1.0
    t: float = 3.0
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"field kind {self.kind!r} not in {FIELD_KINDS}")
        if not (0.0 <= self.beta < 1.0):
            raise ValueError("beta must lie in [0, sqrt(d)) with d = 1")
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.kind == "circle" and self.grid_n < 4 * self.modes:
            raise ValueError(f"grid {self.grid_n} < 4 * modes {self.modes}")

    def canonical(self) -> dict:
        d = asdict(self)
        d["domain"] = list(d["domain"])
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.canonical(), sort_keys=True).encode()
        ).hexdigest()


@dataclass(frozen=True)
class ChaosEnsemble:
    """Complex chaos samples with their generation metadata."""

    values: np.ndarray
    config: EnsembleConfig
    stream_ids: np.ndarray
    f_hash: str

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class FieldModel:
    """Vectorized sampling model: Gamma-block = coeffs @ row_matrix."""

    grid: "object"
    rows: np.ndarray
    variance: np.ndarray
    truncation: dict


def field_model(config: EnsembleConfig) -> FieldModel:
    """Resolve the configured field kind into its sampling matrix."""
    if config.kind == "circle":
        grid = circle_grid(config.grid_n)
        rows = circle_mode_matrix(config.modes, grid)
        harmonic = float(np.sum(1.0 / np.arange(1, config.modes + 1)))
        return FieldModel(
            grid=grid,
            rows=rows,
            variance=np.full(config.grid_n, harmonic),
            truncation={"modes": config.modes},
        )
    if config.kind == "star-scale":
        kernel = StarScaleKernel(
            seed=build_seed_covariance(0.5), delta=config.delta, t=config.t
        )
        basis = kl_decompose(kernel, config.grid_n, mode_cap=config.modes, domain=config.domain)
    else:  # kl-grid
        basis = kl_decompose(
            LogKernel(), config.grid_n, mode_cap=config.modes, domain=config.domain
        )
    rows = np.sqrt(basis.eigenvalues)[:, None] * basis.modes
    return FieldModel(
        grid=basis.grid,
        rows=rows,
        variance=basis.variance_profile(),
        truncation={"kl_modes": basis.m, "kernel": basis.kernel_hash},
    )


def resolve_test_function(config: EnsembleConfig, grid) -> TestFunction:
    """Named builtin or CSV path on the field grid."""
    if config.f_name.endswith(".csv"):
        return from_csv(config.f_name, grid)
    return builtin_on_grid(config.f_name, grid)


def _block_layout(total: int):
    blocks = []
    start = 0
    b = 0
    while start < total:
        nb = min(BLOCK_SIZE, total - start)
        blocks.append((b, start, nb))
        start += nb
        b += 1
    return blocks


def _run_blocks(config: EnsembleConfig, per_block):
    """Run ``per_block(rng, nb)`` over the fixed block layout, in parallel.

    Results land in slots indexed by block, so the merged output does
    not depend on the worker count.
    """
    blocks = _block_layout(config.samples)
    slots = [None] * len(blocks)

    def work(item):
        b, _, nb = item
        rng = stream(config.seed, ENSEMBLE_BASE + b)
        slots[b] = per_block(rng, nb)

    if config.workers <= 1:
        for item in blocks:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, blocks))
    return blocks, slots


def run_chaos_ensemble(config: EnsembleConfig, f: Optional[TestFunction] = None) -> ChaosEnsemble:
    """Draw ``config.samples`` independent chaos integrals mu_N(f)."""
    model = field_model(config)
    if f is None:
        f = resolve_test_function(config, model.grid)
    w = model.grid.quad_weights()
    wick = np.exp(0.5 * config.beta**2 * model.variance)
    weight_row = w * f.values * wick
    n_coeff = model.rows.shape[0]
    beta = config.beta

    def per_block(rng, nb):
        coeffs = rng.standard_normal((nb, n_coeff))
        gamma = coeffs @ model.rows
        return np.exp(1j * beta * gamma) @ weight_row

    blocks, slots = _run_blocks(config, per_block)
    values = np.concatenate(slots)
    sids = np.empty(config.samples, dtype=np.uint64)
    for b, start, nb in blocks:
        sids[start : start + nb] = ENSEMBLE_BASE + b
    return ChaosEnsemble(values=values, config=config, stream_ids=sids, f_hash=f.f_hash)


@dataclass(frozen=True)
class DensityGrid:
    """2-d histogram of an ensemble on the window [-R, R]^2."""

    window: float
    bins: int
    counts: np.ndarray
    total: int
    density: np.ndarray

    @property
    def out_of_window(self) -> int:
        return self.total - int(self.counts.sum())

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "bins": self.bins,
            "counts": self.counts.tolist(),
            "total": self.total,
        }


def density_histogram(ensemble: ChaosEnsemble, window: float, bins: int) -> DensityGrid:
    """Histogram of (Re mu, Im mu) with density counts/(total * binarea)."""
    if ensemble.size == 0:
        raise EmptyEnsemble("no samples")
    if bins < 8:
        raise ValueError("bins must be >= 8")
    if window <= 0:
        raise ValueError("window must be positive")
    counts, _, _ = np.histogram2d(
        ensemble.values.real,
        ensemble.values.imag,
        bins=bins,
        range=[[-window, window], [-window, window]],
    )
    counts = counts.astype(np.int64)
    binarea = (2.0 * window / bins) ** 2
    density = counts / (ensemble.size * binarea)
    return DensityGrid(
        window=window, bins=bins, counts=counts, total=ensemble.size, density=density
    )


def wilson_interval(hits: int, total: int, z: float = WILSON_Z):
    """Wilson score interval for a binomial proportion.

    The lower bound is exactly 0 iff hits == 0 and the upper bound is
    exactly 1 iff hits == total (the analytic endpoints; naive
    evaluation loses them to rounding).
    """
    if total <= 0:
        raise ValueError("total must be positive")
    p = hits / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p + z2 / (2.0 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total)) / denom
    lo = 0.0 if hits == 0 else max(center - half, 0.0)
    hi = 1.0 if hits == total else min(center + half, 1.0)
    return lo, hi


@dataclass(frozen=True)
class SmallBallEstimate:
    """r^{-2}-scaled ball probabilities around a target point."""

    center: complex
    radii: np.ndarray
    hits: np.ndarray
    estimates: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    total: int

    def to_dict(self) -> dict:
        return {
            "z0": [self.center.real, self.center.imag],
            "radii": self.radii.tolist(),
            "hits": self.hits.tolist(),
            "estimates": self.estimates.tolist(),
            "ci": [self.ci_low.tolist(), self.ci_high.tolist()],
            "total": self.total,
        }


def small_ball(ensemble: ChaosEnsemble, z0: complex, radii: Sequence[float]) -> SmallBallEstimate:
    """Per-radius hit fractions scaled by r^{-2}, with Wilson intervals."""
    if ensemble.size == 0:
        raise EmptyEnsemble("no samples")
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be positive and sorted decreasing")
    dist = np.abs(ensemble.values - complex(z0))
    hits = np.array([(dist < r).sum() for r in radii], dtype=np.int64)
    total = ensemble.size
    est = hits / total / radii**2
    lo = np.empty_like(radii)
    hi = np.empty_like(radii)
    for i, r in enumerate(radii):
        a, b = wilson_interval(int(hits[i]), total)
        lo[i] = a / r**2
        hi[i] = b / r**2
    return SmallBallEstimate(
        center=complex(z0),
        radii=radii,
        hits=hits,
        estimates=est,
        ci_low=lo,
        ci_high=hi,
        total=total,
    )


@dataclass(frozen=True)
class MomentReport:
    """Prefix-wise absolute moment estimates with growth diagnostics."""

    exponents: np.ndarray
    prefixes: np.ndarray
    estimates: np.ndarray  # shape (len(exponents), len(prefixes))
    growth_ratios: np.ndarray
    flags: list = field(default_factory=list)
    zero_counts: np.ndarray = None

    def to_dict(self) -> dict:
        return {
            "p": self.exponents.tolist(),
            "prefixes": self.prefixes.tolist(),
            "values": self.estimates.tolist(),
            "growth_ratios": self.growth_ratios.tolist(),
            "flags": list(self.flags),
            "zero_counts": self.zero_counts.tolist(),
        }


def moment_estimate(ensemble: ChaosEnsemble, exponents: Sequence[float]) -> MomentReport:
    """(1/M) sum |mu_i|^p over nested decade prefixes.

    Samples with |mu| = 0 are excluded for p < 0 (their count is
    reported).  A moment is flagged "divergent-suspect" when p <= -2
    and its estimate grows by more than 2x across consecutive decades;
    negative-moment blow-up stays a reported diagnostic, never a hard
    assertion, because any finite sample gives a finite number.
    """
    if ensemble.size == 0:
        raise EmptyEnsemble("no samples")
    exponents = np.asarray(exponents, dtype=float)
    total = ensemble.size
    prefixes = [10**k for k in range(3, 13) if 10**k <= total]
    if not prefixes or prefixes[-1] != total:
        prefixes.append(total)
    prefixes = np.array(sorted(set(prefixes)), dtype=np.int64)
    mod = np.abs(ensemble.values)
    est = np.empty((exponents.size, prefixes.size))
    zero_counts = np.zeros(exponents.size, dtype=np.int64)
    for i, p in enumerate(exponents):
        if p == 0.0:
            est[i, :] = 1.0
            continue
        if p < 0:
            nz = mod > 0.0
            zero_counts[i] = total - int(nz.sum())
            powers = np.where(nz, np.power(mod, p, where=nz, out=np.zeros_like(mod)), 0.0)
            for j, m in enumerate(prefixes):
                good = int(nz[:m].sum())
                est[i, j] = powers[:m].sum() / good if good else math.nan
        else:
            powers = mod**p
            for j, m in enumerate(prefixes):
                est[i, j] = float(np.mean(powers[:m]))
    ratios = est[:, 1:] / est[:, :-1]
    flags = []
    for i, p in enumerate(exponents):
        if p <= -2.0 and np.any(ratios[i] > 2.0):
            flags.append({"p": float(p), "flag": "divergent-suspect"})
    return MomentReport(
        exponents=exponents,
        prefixes=prefixes,
        estimates=est,
        growth_ratios=ratios,
        flags=flags,
        zero_counts=zero_counts,
    )


def sobolev_norm_samples(
    config: EnsembleConfig,
    spec=None,
    f: Optional[TestFunction] = None,
) -> np.ndarray:
    """Negative Sobolev norms of 1_K(f :e^{i beta Gamma}: - 1) per sample."""
    model = field_model(config)
    if f is None:
        f = resolve_test_function(config, model.grid)
    if spec is None:
        spec = default_sobolev_spec(grid_n=model.grid.n)
    window = dilate_mask(f.support, 1, model.grid.periodic)
    wick = np.exp(0.5 * config.beta**2 * model.variance)
    fw = f.values * wick
    beta = config.beta
    grid = model.grid
    n_coeff = model.rows.shape[0]

    def per_block(rng, nb):
        coeffs = rng.standard_normal((nb, n_coeff))
        gamma = coeffs @ model.rows
        fields = np.where(window, fw * np.exp(1j * beta * gamma) - 1.0, 0.0)
        return sobolev_neg_norm_batch(fields, spec, grid, support_mask=window)

    _, slots = _run_blocks(config, per_block)
    return np.concatenate(slots)


def sobolev_ball_probability(
    config: EnsembleConfig,
    eta: float,
    spec=None,
    f: Optional[TestFunction] = None,
):
    """Fraction of samples with chaos-field Sobolev norm <= eta, with CI.

    Returns (estimate, (ci_low, ci_high), norms).
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    norms = sobolev_norm_samples(config, spec, f)
    hits = int((norms <= eta).sum())
    est = hits / norms.size
    ci = wilson_interval(hits, norms.size)
    return est, ci, norms
