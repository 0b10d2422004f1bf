"""Batch command-line surface.

Subcommands: ge-curve, phase-diagram, optimal-rank, verify. All randomness
flows from --seed; outputs are byte-identical across reruns. Reals are
rendered with 17 significant digits so CSV round-trips 64-bit floats.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import csv
import json
import sys

import click
import numpy as np

from . import epca_theory
from .epca_theory import (
    EPCAConfig,
    classify_phase,
    collapse_threshold,
    dge_dr,
    ge_curve_asymptotic,
    optimal_rank,
    phase_grid,
    second_root,
)
from .kl_core import cost_f, kl_diag
from .mc_harness import (
    build_diamond_model,
    e_mixture,
    empirical_ge_curve,
    m_projection,
    sample_wishart,
    variance_term,
)
from .mp_spectrum import MPSpectrum, edges, integral_inv, quantile, tail_mass

CURVE_COLUMNS = [
    "n_k",
    "ge_empirical_eigen",
    "ge_empirical_diamond",
    "me_exact",
    "bias_exact",
    "var_exact",
    "residual",
    "ge_asymptotic",
    "me_asymptotic",
    "bias_asymptotic",
]

PHASE_COLUMNS = [
    "alpha",
    "eps",
    "regime_analytic",
    "regime_bruteforce",
    "r_star",
    "lambda_minus",
    "eps_star",
]


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_delimited(path: str, columns: list[str], rows: list[dict], fmt: str):
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(row[c]) for c in columns])
    else:
        with open(path, "w") as fh:
            json.dump({"columns": columns, "rows": rows}, fh, indent=2)
            fh.write("\n")


def _write_summary(path: str, summary: dict):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def _config_dict(subcommand: str, **kwargs) -> dict:
    return {"subcommand": subcommand, **kwargs}


def _validate(condition: bool, message: str):
    if not condition:
        raise click.UsageError(message)


@click.group()
def main():
    """KL generalization-error decomposition for eps-PCA on isotropic data."""


def _common_mc_options(fn):
    fn = click.option("--nv", type=int, default=64, show_default=True,
                      help="Visible dimension N_V.")(fn)
    fn = click.option("--d", "d_samples", type=int, default=96, show_default=True,
                      help="Sample count D (must exceed N_V).")(fn)
    fn = click.option("--eps", type=float, default=0.5, show_default=True,
                      help="Noise floor on discarded directions.")(fn)
    return fn


def _check_mc_args(nv, d_samples, eps, realizations=1, seed=0):
    _validate(nv >= 1, "--nv must be >= 1")
    _validate(d_samples > nv, "--d must exceed --nv (alpha < 1 required)")
    _validate(eps > 0, "--eps must be positive")
    _validate(realizations >= 1, "--realizations must be >= 1")
    _validate(seed >= 0, "--seed must be non-negative")


@main.command("ge-curve")
@_common_mc_options
@click.option("--realizations", type=int, default=800, show_default=True)
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--out", type=str, default="ge_curve.csv", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--plot", is_flag=True, help="Also render a figure next to the data.")
def ge_curve_cmd(nv, d_samples, eps, realizations, seed, out, fmt, plot):
    """Empirical and closed-form GE curve over all ranks, plus a JSON summary."""
    _check_mc_args(nv, d_samples, eps, realizations, seed)
    result = empirical_ge_curve(nv, d_samples, eps, realizations, seed)
    cfg = EPCAConfig(nv, d_samples, eps)
    n_k_star, r_star, cut_star = optimal_rank(cfg)
    rows = [
        {c: getattr(p, c) for c in CURVE_COLUMNS} for p in result.points
    ]
    summary = {
        "config": _config_dict(
            "ge-curve", nv=nv, d_samples=d_samples, eps=eps,
            realizations=realizations, seed=seed, out=out, format=fmt,
        ),
        "argmin_n_k": result.argmin_n_k("eigen"),
        "n_k_star": n_k_star,
        "r_star": r_star,
        "lambda_cut_star": cut_star,
        "max_residual": result.max_residual,
        "max_rotational_deviation": result.max_rot_deviation,
    }
    try:
        _write_delimited(out, CURVE_COLUMNS, rows, fmt)
        _write_summary(out + ".summary.json", summary)
        if plot:
            from .plots import render_ge_curve

            render_ge_curve(result.points, n_k_star, out + ".png")
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"wrote {out} and {out}.summary.json")


@main.command("phase-diagram")
@click.option("--alpha-min", type=float, default=0.05, show_default=True)
@click.option("--alpha-max", type=float, default=0.95, show_default=True)
@click.option("--alpha-steps", type=int, default=22, show_default=True)
@click.option("--eps-min", type=float, default=0.02, show_default=True)
@click.option("--eps-max", type=float, default=0.98, show_default=True)
@click.option("--eps-steps", type=int, default=22, show_default=True)
@click.option("--out", type=str, default="phase_diagram.csv", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--plot", is_flag=True, help="Also render a figure next to the data.")
def phase_diagram_cmd(alpha_min, alpha_max, alpha_steps, eps_min, eps_max,
                      eps_steps, out, fmt, plot):
    """Three-regime phase grid (analytic and brute-force) plus boundary curves."""
    _validate(0.0 < alpha_min <= alpha_max < 1.0,
              "alpha range must satisfy 0 < min <= max < 1")
    _validate(eps_min > 0 and eps_min <= eps_max, "eps range must be positive")
    _validate(alpha_steps >= 1 and eps_steps >= 1, "step counts must be >= 1")
    alphas = np.linspace(alpha_min, alpha_max, alpha_steps)
    eps_values = np.linspace(eps_min, eps_max, eps_steps)
    grid = phase_grid(alphas, eps_values)
    rows = [
        {
            "alpha": g.point.alpha,
            "eps": g.point.eps,
            "regime_analytic": g.point.regime.value,
            "regime_bruteforce": g.brute_force_regime.value,
            "r_star": g.point.r_star,
            "lambda_minus": g.lambda_minus,
            "eps_star": g.eps_star,
        }
        for g in grid
    ]
    boundary_alphas = np.linspace(alpha_min, alpha_max, 200)
    boundary_rows = []
    for a in boundary_alphas:
        spec = MPSpectrum(a)
        boundary_rows.append(
            {
                "alpha": float(a),
                "lambda_minus": spec.lambda_minus,
                "eps_star": collapse_threshold(spec),
            }
        )
    boundary_path = out + ".boundaries.csv"
    try:
        _write_delimited(out, PHASE_COLUMNS, rows, fmt)
        _write_delimited(boundary_path, ["alpha", "lambda_minus", "eps_star"],
                         boundary_rows, "csv")
        if plot:
            from .plots import render_phase_diagram

            render_phase_diagram(
                grid,
                boundary_alphas,
                np.array([r["lambda_minus"] for r in boundary_rows]),
                np.array([r["eps_star"] for r in boundary_rows]),
                out + ".png",
            )
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"wrote {out} and {boundary_path}")


@main.command("optimal-rank")
@_common_mc_options
def optimal_rank_cmd(nv, d_samples, eps):
    """Closed-form optimal rank and phase data for one configuration (JSON)."""
    _check_mc_args(nv, d_samples, eps)
    cfg = EPCAConfig(nv, d_samples, eps)
    spec = cfg.spectrum()
    point = classify_phase(eps, spec)
    n_k_star, r_star, cut_star = optimal_rank(cfg)
    payload = {
        "config": _config_dict("optimal-rank", nv=nv, d_samples=d_samples, eps=eps),
        "regime": point.regime.value,
        "lambda_cut_star": cut_star,
        "r_star": r_star,
        "n_k_star": n_k_star,
        "second_root": second_root(eps) if 0.0 < eps < 1.0 else None,
        "eps_star": collapse_threshold(spec),
        "lambda_minus": spec.lambda_minus,
        "outside_theory": point.outside_theory,
    }
    click.echo(json.dumps(payload, indent=2))


def _verify_checks(nv, d_samples, eps, realizations, seed, tol_scale):
    """(name, value, tolerance) triples for the full invariant checklist.

    Boolean conditions are encoded as 0.0 (holds) / 1.0 (violated) against a
    0.5 tolerance.
    """
    cfg = EPCAConfig(nv, d_samples, eps)
    spec = cfg.spectrum()
    lo, hi = edges(spec)
    checks = []

    checks.append(("mp_total_mass", abs(tail_mass(spec, lo) - 1.0), 1e-10))
    round_trip = max(
        abs(tail_mass(spec, quantile(spec, r)) - r) for r in np.linspace(0, 1, 21)
    )
    checks.append(("mp_quantile_round_trip", round_trip, 1e-9))
    checks.append(
        ("mp_inverse_moment",
         abs(integral_inv(spec, lo) - 1.0 / (1.0 - spec.alpha)), 1e-8)
    )

    curve = empirical_ge_curve(nv, d_samples, eps, realizations, seed)
    checks.append(("rotational_equivalence", curve.max_rot_deviation, 1e-10))
    checks.append(("additive_identity", curve.max_residual, 1e-12))
    checks.append(
        ("data_bias_nonnegative",
         max(-p.bias_exact for p in curve.points), 1e-12)
    )
    checks.append(
        ("variance_nonnegative",
         max(-p.var_exact for p in curve.points), 1e-12)
    )

    n_k_star, _, _ = optimal_rank(cfg)
    k = n_k_star if n_k_star > 0 else max(1, nv // 2)
    models = [
        build_diamond_model(sample_wishart(nv, d_samples, seed, m), k, eps)
        for m in range(realizations)
    ]
    mix = e_mixture(models)
    checks.append(
        ("fbar_identity", abs(variance_term(mix, models) - mix.f_bar), 1e-11)
    )
    q0 = m_projection(nv, k, eps)
    ones = np.ones(nv)
    gpt_residual = abs(
        kl_diag(ones, mix.variances)
        - kl_diag(ones, q0.variances)
        - kl_diag(q0.variances, mix.variances)
    )
    checks.append(("gpt_identity", gpt_residual, 1e-10))

    if lo < eps < 1.0:
        delta = 1e-6
        ok = (
            dge_dr(eps, eps) == 0.0
            and dge_dr(eps * (1 + delta), eps) < 0.0
            and dge_dr(eps * (1 - delta), eps) > 0.0
        )
        lam_tilde = second_root(eps)
        if lam_tilde < hi:
            ok = ok and dge_dr(lam_tilde * (1 + delta), eps) > 0.0
            ok = ok and dge_dr(lam_tilde * (1 - delta), eps) < 0.0
        checks.append(("dge_sign_pattern", 0.0 if ok else 1.0, 0.5))

        asym = ge_curve_asymptotic(cfg)
        k0 = min(max(n_k_star, 1), nv - 1)
        second_diff = asym[k0 - 1][2] - 2.0 * asym[k0][2] + asym[k0 + 1][2]
        checks.append(
            ("second_difference_positive", 0.0 if second_diff > 0 else 1.0, 0.5)
        )

    # Retain-all regime: GE non-increasing in r (non-decreasing in the cutoff).
    eps_ra = lo / 2.0
    _, r_grid, ii_grid = epca_theory._cut_grid_integrals(spec, 200)
    ge_grid = (1.0 - r_grid) * (cost_f(eps_ra) - 1.0) + (ii_grid - r_grid)
    # cuts ascend, so r descends and GE must be non-decreasing in the cutoff
    max_decrease = float(np.max(-np.diff(ge_grid)))
    checks.append(("retain_all_monotonicity", max(max_decrease, 0.0), 1e-9))

    return [(name, value, tol * tol_scale) for name, value, tol in checks]


@main.command("verify")
@_common_mc_options
@click.option("--realizations", type=int, default=800, show_default=True)
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--tolerance", type=float, default=1.0, show_default=True,
              help="Multiplier applied to every check tolerance.")
def verify_cmd(nv, d_samples, eps, realizations, seed, tolerance):
    """Run the full invariant checklist; exit 0 iff every check passes."""
    _check_mc_args(nv, d_samples, eps, realizations, seed)
    _validate(tolerance > 0, "--tolerance must be positive")
    checks = _verify_checks(nv, d_samples, eps, realizations, seed, tolerance)
    failed = []
    for name, value, tol in checks:
        status = "PASS" if value <= tol else "FAIL"
        if status == "FAIL":
            failed.append(name)
        click.echo(f"{status} {name} (value={value:.3e}, tol={tol:.3e})")
    if failed:
        click.echo(f"failed checks: {', '.join(failed)}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
