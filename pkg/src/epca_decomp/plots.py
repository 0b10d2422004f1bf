"""Matplotlib rendering of the report figures, written next to the data files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .epca_theory import PhaseGridPoint, Regime
from .mc_harness import GECurvePoint

_REGIME_COLORS = {
    Regime.RETAIN_ALL: "tab:blue",
    Regime.INTERIOR: "tab:green",
    Regime.COLLAPSE: "0.5",
}


def render_ge_curve(points: list[GECurvePoint], n_k_star: int, path: str) -> None:
    """GE curve with its three components and the predicted optimal rank."""
    n_k = [p.n_k for p in points]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(n_k, [p.ge_empirical_eigen for p in points], "k-", lw=1.8,
            label="empirical GE (eigen model)")
    ax.plot(n_k, [p.me_exact for p in points], "rs", ms=3, label="model error")
    ax.plot(n_k, [p.bias_exact for p in points], "g^", ms=3, label="data bias")
    ax.plot(n_k, [p.var_exact for p in points], "bv", ms=3, label="variance")
    ax.plot(
        n_k,
        [p.me_exact + p.bias_exact + p.var_exact for p in points],
        "--", color="0.5", lw=1.2, label="component sum",
    )
    ax.plot(n_k, [p.ge_asymptotic for p in points], ":", color="tab:orange",
            lw=1.4, label="asymptotic GE")
    ax.axvline(n_k_star, color="r", ls=":", lw=1.2, label=r"predicted $N_K^*$")
    ax.set_xlabel(r"retained rank $N_K$")
    ax.set_ylabel("nats")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_phase_diagram(
    grid: list[PhaseGridPoint],
    boundary_alpha: np.ndarray,
    boundary_lambda_minus: np.ndarray,
    boundary_eps_star: np.ndarray,
    path: str,
) -> None:
    """Regime scatter on the (alpha, eps) plane with both boundary curves."""
    fig, ax = plt.subplots(figsize=(6.5, 5))
    for regime in Regime:
        xs = [g.point.alpha for g in grid if g.point.regime is regime]
        ys = [g.point.eps for g in grid if g.point.regime is regime]
        ax.scatter(xs, ys, s=14, color=_REGIME_COLORS[regime],
                   label=regime.value, zorder=3)
    ax.plot(boundary_alpha, boundary_lambda_minus, color="navy", lw=1.5,
            label=r"$\lambda_-(\alpha)$")
    ax.plot(boundary_alpha, boundary_eps_star, color="darkgreen", lw=1.5,
            label=r"$\epsilon_*(\alpha)$")
    ax.set_xlabel(r"aspect ratio $\alpha$")
    ax.set_ylabel(r"noise floor $\epsilon$")
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
