"""Command-line entry point.

Subcommands: density | small-ball | moments | sobolev-ball | phase-solve
| bessel-check | phi0-check | sample-field | truncation-gap.

Every run writes a JSON report (schema "imchaos-report/1") embedding the
resolved configuration and the artifact version hash, and prints a
one-line summary.  Reports are byte-identical across re-runs and across
worker counts: all randomness flows from the single --seed through
counter-based streams, the worker count is an execution detail excluded
from the report, and JSON is emitted with sorted keys and fixed
separators.

Exit codes: 0 success, 1 computational error (structured error JSON),
2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bessel import bessel_report, phi0_flatness
from .chaos import SobolevSpec, second_moment_analytic, truncation_gap
from .errors import ImchaosError
from .grids import circle_grid
from .kernels import CircleKernel
from .mc import (
    EnsembleConfig,
    density_histogram,
    moment_estimate,
    run_chaos_ensemble,
    small_ball,
    sobolev_ball_probability,
)
from .phase import phase_for_target, profile_diagnostics, profile_to_csv, smooth_zero_phase
from .sampler import field_to_csv, sample_circle_field
from .testfuncs import BUILTIN_NAMES, builtin_box, builtin_circle

SCHEMA = "imchaos-report/1"

_SOURCE_HASH = None


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation: subcommand plus its resolved parameters."""

    subcommand: str
    params: dict

    def report_config(self) -> dict:
        # workers is an execution detail; reports are identical across
        # worker counts by contract, so it stays out of the embedded config.
        return {k: v for k, v in self.params.items() if k != "workers"}


def source_hash() -> str:
    """Hash of the installed package sources, for report provenance."""
    global _SOURCE_HASH
    if _SOURCE_HASH is None:
        pkg_dir = os.path.dirname(os.path.abspath(__file__))
        h = hashlib.sha256()
        for name in sorted(os.listdir(pkg_dir)):
            if name.endswith(".py"):
                with open(os.path.join(pkg_dir, name), "rb") as fh:
                    h.update(name.encode())
                    h.update(fh.read())
        _SOURCE_HASH = h.hexdigest()[:16]
    return _SOURCE_HASH


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imchaos",
        description="Imaginary multiplicative chaos laboratory",
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def add_common(p, ensemble=True):
        p.add_argument("--out", default=None, help="report output path (default stdout)")
        p.add_argument("--seed", type=int, default=0, help="global u64 seed")
        if ensemble:
            p.add_argument("--field", default="circle", choices=["circle", "star-scale", "kl-grid"])
            p.add_argument("--beta", type=float, default=0.5)
            p.add_argument("--modes", type=int, default=64)
            p.add_argument("--grid", type=int, default=256)
            p.add_argument("--samples", type=int, default=10000)
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--f", default="one", help="builtin name or CSV path")

    p = sub.add_parser("density", help="2-d histogram of the chaos law")
    add_common(p)
    p.add_argument("--window", type=float, default=8.0)
    p.add_argument("--bins", type=int, default=64)

    p = sub.add_parser("small-ball", help="r^-2 scaled ball probabilities")
    add_common(p)
    p.add_argument("--z0-re", type=float, default=0.0)
    p.add_argument("--z0-im", type=float, default=0.0)
    p.add_argument("--radii", default="0.4,0.2,0.1", help="decreasing comma list")

    p = sub.add_parser("moments", help="prefix-wise absolute moment estimates")
    add_common(p)
    p.add_argument("--p", default="-2.5,-1.5,0,2", help="comma list of exponents")

    p = sub.add_parser("sobolev-ball", help="P(||1_K(f chaos - 1)||_{H^-s} <= eta)")
    add_common(p)
    p.add_argument("--eta", type=float, default=None, help="default: half the median norm")
    p.add_argument("--sobolev-s", type=float, default=1.0)
    p.add_argument("--padding", type=int, default=4)

    p = sub.add_parser("phase-solve", help="construct a with int f e^{i beta a} = z0")
    add_common(p, ensemble=False)
    p.add_argument("--f", default="one", help="builtin name or CSV path")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=2049)
    p.add_argument("--z0-re", type=float, default=0.0)
    p.add_argument("--z0-im", type=float, default=0.0)
    p.add_argument("--profile-out", default=None, help="CSV path for the phase profile")

    p = sub.add_parser("bessel-check", help="circle-map diffeomorphism self-check")
    add_common(p, ensemble=False)

    p = sub.add_parser("phi0-check", help="phi0 vs K*F flatness comparison")
    add_common(p, ensemble=False)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--n0", default="8,32,128", help="comma list of truncation sizes")

    p = sub.add_parser("sample-field", help="draw one field sample, export CSV")
    add_common(p, ensemble=False)
    p.add_argument("--field", default="circle", choices=["circle"])
    p.add_argument("--modes", type=int, default=64)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--stream", type=int, default=0)

    p = sub.add_parser("truncation-gap", help="analytic E|mu_N - mu_2N|^2 sequence")
    add_common(p, ensemble=False)
    p.add_argument("--f", default="one")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--modes", type=int, default=64, help="largest base truncation N")
    p.add_argument("--grid", type=int, default=0, help="0 = auto (4 * 2 * modes)")
    p.add_argument("--samples", type=int, default=0, help="if > 0, coupled MC check at N=modes")
    p.add_argument("--workers", type=int, default=1)

    return parser


def parse_and_validate(argv) -> RunConfig:
    """Parse argv into a validated RunConfig; usage errors exit with code 2."""
    parser = _parser()
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        parser.error("missing subcommand")
    params = vars(ns).copy()
    sub = params.pop("subcommand")
    beta = params.get("beta")
    if sub == "phase-solve":
        # The phase construction is deterministic and works for any beta > 0;
        # the beta < sqrt(d) gate is chaos semantics only.
        if beta is not None and beta <= 0.0:
            parser.error("--beta must be positive for phase-solve")
    elif beta is not None and not (0.0 <= beta < 1.0):
        parser.error(f"--beta {beta} outside [0, sqrt(d)) with d = 1")
    if params.get("samples", 1) < 1:
        parser.error("--samples must be >= 1")
    if params.get("workers", 1) < 1:
        parser.error("--workers must be >= 1")
    if sub in ("density", "small-ball", "moments", "sobolev-ball"):
        if params["field"] == "circle" and params["grid"] < 4 * params["modes"]:
            parser.error(f"--grid {params['grid']} < 4 * --modes {params['modes']}")
        if params["f"] not in BUILTIN_NAMES and not params["f"].endswith(".csv"):
            parser.error(f"--f must be one of {BUILTIN_NAMES} or a CSV path")
    if "radii" in params:
        try:
            radii = [float(t) for t in params["radii"].split(",")]
        except ValueError:
            parser.error("--radii must be a comma list of floats")
        if any(r <= 0 for r in radii) or any(
            b >= a for a, b in zip(radii, radii[1:])
        ):
            parser.error("--radii must be positive and strictly decreasing")
        params["radii"] = radii
    if "p" in params and isinstance(params["p"], str):
        try:
            params["p"] = [float(t) for t in params["p"].split(",")]
        except ValueError:
            parser.error("--p must be a comma list of floats")
    if "n0" in params and isinstance(params["n0"], str):
        try:
            params["n0"] = [int(t) for t in params["n0"].split(",")]
        except ValueError:
            parser.error("--n0 must be a comma list of integers")
    for key in ("out", "profile_out"):
        path = params.get(key)
        if path is not None:
            parent = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
                parser.error(f"--{key.replace('_', '-')} directory not writable: {parent}")
    return RunConfig(subcommand=sub, params=params)


def _ensemble_config(params) -> EnsembleConfig:
    return EnsembleConfig(
        kind=params["field"],
        beta=params["beta"],
        modes=params["modes"],
        grid_n=params["grid"],
        samples=params["samples"],
        seed=params["seed"],
        workers=params.get("workers", 1),
        f_name=params["f"],
    )


def _run_density(params):
    ens = run_chaos_ensemble(_ensemble_config(params))
    grid = density_histogram(ens, params["window"], params["bins"])
    result = grid.to_dict()
    result["out_of_window"] = grid.out_of_window
    summary = f"density: {ens.size} samples, {grid.out_of_window} outside window {params['window']}"
    return result, summary


def _run_small_ball(params):
    ens = run_chaos_ensemble(_ensemble_config(params))
    z0 = complex(params["z0_re"], params["z0_im"])
    est = small_ball(ens, z0, params["radii"])
    result = est.to_dict()
    summary = (
        f"small-ball at {z0}: hits {est.hits.tolist()} over {est.total}, "
        f"scaled estimates {[f'{e:.4g}' for e in est.estimates]}"
    )
    return result, summary


def _run_moments(params):
    ens = run_chaos_ensemble(_ensemble_config(params))
    report = moment_estimate(ens, params["p"])
    result = report.to_dict()
    summary = f"moments p={params['p']}: flags {result['flags']}"
    return result, summary


def _run_sobolev_ball(params):
    config = _ensemble_config(params)
    spec = SobolevSpec(s=params["sobolev_s"], padding=params["padding"], grid_n=params["grid"])
    eta = params["eta"]
    if eta is None:
        est, ci, norms = sobolev_ball_probability(config, math.inf, spec)
        eta = 0.5 * float(np.median(norms))
        hits = int((norms <= eta).sum())
        from .mc import wilson_interval

        est = hits / norms.size
        ci = wilson_interval(hits, norms.size)
    else:
        est, ci, norms = sobolev_ball_probability(config, eta, spec)
    result = {
        "eta": eta,
        "estimate": est,
        "ci": list(ci),
        "median_norm": float(np.median(norms)),
        "samples": int(norms.size),
    }
    summary = f"sobolev-ball: P(norm <= {eta:.6g}) ~ {est:.4g}, CI {ci}"
    return result, summary


def _run_phase_solve(params):
    f = builtin_box(params["f"], n=params["grid"]) if not params["f"].endswith(".csv") else None
    if f is None:
        from .grids import box_grid
        from .testfuncs import from_csv

        f = from_csv(params["f"], box_grid(0.0, 1.0, params["grid"]))
    z0 = complex(params["z0_re"], params["z0_im"])
    beta = params["beta"]
    profile = smooth_zero_phase(f, beta) if z0 == 0 else phase_for_target(f, beta, z0)
    if params.get("profile_out"):
        profile_to_csv(profile, f, params["profile_out"])
    result = profile_diagnostics(profile)
    result["l1_norm"] = f.l1_norm
    summary = f"phase-solve {params['f']} -> residual {profile.residual:.3e}"
    return result, summary


def _run_bessel_check(params):
    result = bessel_report()
    summary = (
        f"bessel-check: j0={result['j0']:.12f}, det DF={result['det_DF']:.6f}, "
        f"fd_error={result['fd_error']:.2e}, inversion={result['inversion_max_error']:.2e}"
    )
    return result, summary


def _run_phi0_check(params):
    beta = params["beta"]
    sups = {str(n0): phi0_flatness(n0, beta) for n0 in params["n0"]}
    result = {"beta": beta, "sup_ratio": sups}
    summary = "phi0-check: " + ", ".join(f"n0={k}: {v:.3e}" for k, v in sups.items())
    return result, summary


def _run_sample_field(params):
    sample = sample_circle_field(
        params["modes"], params["grid"], params["seed"], stream_id=params["stream"]
    )
    result = {
        "kind": sample.kind,
        "truncation": sample.truncation,
        "stream": sample.stream_id,
        "variance": float(sample.variance[0]),
        "gamma_first": float(sample.values[0]),
    }
    summary = f"sample-field: N={params['modes']} on {params['grid']} angles"
    return result, summary, sample


def _run_truncation_gap(params):
    beta = params["beta"]
    n_max = params["modes"]
    grid_n = params["grid"] or 8 * n_max
    f = builtin_circle(params["f"], grid_n)
    seq = []
    n = 8
    while n <= n_max:
        seq.append(n)
        n *= 2
    gaps = {str(n): truncation_gap(n, 2 * n, f, beta) for n in seq}
    result = {"beta": beta, "gaps": gaps}
    if params["samples"] > 0:
        n = n_max
        mc_gap = _coupled_gap_mc(f, beta, n, 2 * n, params["samples"], params["seed"], grid_n)
        result["mc_gap"] = {"N": n, "M": 2 * n, "estimate": mc_gap}
    summary = "truncation-gap: " + ", ".join(f"N={k}: {v:.5g}" for k, v in gaps.items())
    return result, summary


def _coupled_gap_mc(f, beta, n_low, n_high, samples, seed, grid_n):
    """Monte Carlo E|mu_N - mu_M|^2 with coupled coefficients."""
    from .rng import ENSEMBLE_BASE, stream
    from .sampler import circle_mode_matrix

    grid = circle_grid(grid_n)
    rows = circle_mode_matrix(n_high, grid)
    k = np.arange(1, n_high + 1)
    h_low = float(np.sum(1.0 / k[:n_low]))
    h_high = float(np.sum(1.0 / k))
    w = grid.quad_weights()
    wf_low = w * f.values * math.exp(0.5 * beta * beta * h_low)
    wf_high = w * f.values * math.exp(0.5 * beta * beta * h_high)
    total = 0.0
    count = 0
    b = 0
    low_rows = np.vstack([rows[:n_low], rows[n_high : n_high + n_low]])
    while count < samples:
        nb = min(8192, samples - count)
        rng = stream(seed, ENSEMBLE_BASE + b)
        coeffs = rng.standard_normal((nb, 2 * n_high))
        gamma_high = coeffs @ rows
        low_coeffs = np.hstack([coeffs[:, :n_low], coeffs[:, n_high : n_high + n_low]])
        gamma_low = low_coeffs @ low_rows
        mu_high = np.exp(1j * beta * gamma_high) @ wf_high
        mu_low = np.exp(1j * beta * gamma_low) @ wf_low
        total += float(np.sum(np.abs(mu_low - mu_high) ** 2))
        count += nb
        b += 1
    return total / samples


_HANDLERS = {
    "density": _run_density,
    "small-ball": _run_small_ball,
    "moments": _run_moments,
    "sobolev-ball": _run_sobolev_ball,
    "phase-solve": _run_phase_solve,
    "bessel-check": _run_bessel_check,
    "phi0-check": _run_phi0_check,
    "truncation-gap": _run_truncation_gap,
}


def _emit(doc: dict, out_path):
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def dispatch(config: RunConfig) -> int:
    """Run a validated config; write the report; return the exit code."""
    out_path = config.params.get("out")
    base = {
        "schema": SCHEMA,
        "subcommand": config.subcommand,
        "config": config.report_config(),
        "artifact": {"version": __version__, "source_hash": source_hash()},
    }
    try:
        if config.subcommand == "sample-field":
            result, summary, sample = _run_sample_field(config.params)
            if out_path:
                field_to_csv(sample, out_path)
                print(summary)
                return 0
            base["result"] = result
            _emit(base, None)
            print(summary, file=sys.stderr)
            return 0
        result, summary = _HANDLERS[config.subcommand](config.params)
    except ImchaosError as exc:
        err = dict(base)
        err["error"] = type(exc).__name__
        err["message"] = str(exc)
        _emit(err, out_path)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    base["result"] = result
    _emit(base, out_path)
    print(summary, file=sys.stderr if not out_path else sys.stdout)
    return 0


def main(argv=None) -> int:
    config = parse_and_validate(sys.argv[1:] if argv is None else argv)
    return dispatch(config)


if __name__ == "__main__":
    sys.exit(main())
