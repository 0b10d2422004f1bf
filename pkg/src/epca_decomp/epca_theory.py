"""Asymptotic closed forms for the eps-PCA generalization error.

Per-direction cost accounting in the Marchenko-Pastur limit: model error is
linear in the rank ratio, the data-bias term comes from the two tail
integrals, the GE derivative in the rank ratio is f(cut) - f(eps), and the
optimal cutoff sits at cut = eps. Comparing the interior optimum against the
rank-zero boundary yields the three-regime phase structure with the collapse
threshold eps_star(alpha).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .kl_core import cost_f
from .mp_spectrum import (
    MPSpectrum,
    integral_inv,
    integral_log,
    quantile,
    tail_integrals_on_grid,
    tail_mass,
)

ROOT_TOL = 1e-12  # absolute tolerance in the argument for bisections


class Regime(str, enum.Enum):
    RETAIN_ALL = "retain_all"
    INTERIOR = "interior"
    COLLAPSE = "collapse"


@dataclass(frozen=True)
class EPCAConfig:
    """Problem size: visible dimension, sample count, and noise floor."""

    n_v: int
    d_samples: int
    eps: float

    def __post_init__(self):
        if self.n_v < 1:
            raise ValueError("n_v must be >= 1")
        if self.d_samples <= self.n_v:
            raise ValueError("d_samples must exceed n_v (alpha < 1 required)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def alpha(self) -> float:
        return self.n_v / self.d_samples

    def spectrum(self) -> MPSpectrum:
        return MPSpectrum(self.alpha)


@dataclass(frozen=True)
class PhasePoint:
    """Classified point of the (alpha, eps) phase plane."""

    alpha: float
    eps: float
    regime: Regime
    r_star: float
    outside_theory: bool = False  # eps >= 1 lies outside the theorem hypothesis

    def __post_init__(self):
        if self.regime is Regime.RETAIN_ALL and self.r_star != 1.0:
            raise ValueError("retain_all requires r_star = 1")
        if self.regime is Regime.COLLAPSE and self.r_star != 0.0:
            raise ValueError("collapse requires r_star = 0")
        if self.regime is Regime.INTERIOR and not 0.0 < self.r_star < 1.0:
            raise ValueError("interior requires 0 < r_star < 1")


@dataclass(frozen=True)
class DecompResult:
    """Three-component decomposition of a GE value, plus the additive residual."""

    ge: float
    model_error: float
    data_bias: float
    variance: float
    residual: float


def model_error(r: float, eps: float, n_v: int) -> float:
    """ME(r) = (N_V/2) (1 - r)(f(eps) - 1), in nats."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    return 0.5 * n_v * (1.0 - r) * (cost_f(eps) - 1.0)


def data_bias_asymptotic(lambda_cut: float, spec: MPSpectrum, n_v: int) -> float:
    """Data bias (N_V/2) [I_inv(cut) + I_log(cut) - r(cut)], in nats."""
    r = tail_mass(spec, lambda_cut)
    return 0.5 * n_v * (integral_inv(spec, lambda_cut) + integral_log(spec, lambda_cut) - r)


def ge_asymptotic(lambda_cut: float, cfg: EPCAConfig) -> float:
    """Asymptotic GE(cut) = ME(r(cut)) + DataBias(cut), in nats."""
    spec = cfg.spectrum()
    r = tail_mass(spec, lambda_cut)
    return model_error(r, cfg.eps, cfg.n_v) + data_bias_asymptotic(lambda_cut, spec, cfg.n_v)


def dge_dr(lambda_cut: float, eps: float) -> float:
    """d(2 GE / N_V)/dr = f(cut) - f(eps) (per-direction units)."""
    return cost_f(lambda_cut) - cost_f(eps)


def second_root(eps: float) -> float:
    """The root lam_tilde > 1 of f(lam) = f(eps) for eps in (0, 1).

    Marks a local maximum of GE on the kept branch; found by bisection after
    doubling an upper bracket (f is strictly increasing on (1, inf)).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    target = cost_f(eps)
    lo = 1.0 + 1e-9
    hi = 2.0
    while cost_f(hi) < target:
        hi *= 2.0
    # Relative tolerance: for small eps the root grows like exp(f(eps)), far
    # beyond where an absolute 1e-12 gap is representable in binary64.
    while hi - lo > ROOT_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if cost_f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _interior_minus_collapse(eps: float, spec: MPSpectrum) -> float:
    """Per-direction GE at the interior cutoff eps minus GE at rank zero.

    Strictly increasing in eps on (lam_minus, 1); its root is the collapse
    threshold.
    """
    r = tail_mass(spec, eps)
    interior = (1.0 - r) * (cost_f(eps) - 1.0) + (
        integral_inv(spec, eps) + integral_log(spec, eps) - r
    )
    return interior - (cost_f(eps) - 1.0)


def collapse_threshold(spec: MPSpectrum) -> float:
    """eps_star(alpha): noise floor above which the optimal model ignores the data."""
    lo = spec.lambda_minus + 1e-9
    hi = 1.0 - 1e-9
    f_lo = _interior_minus_collapse(lo, spec)
    f_hi = _interior_minus_collapse(hi, spec)
    if not (f_lo < 0.0 < f_hi):
        raise RuntimeError(
            f"collapse-threshold bracket failed at alpha={spec.alpha}: "
            f"f({lo})={f_lo}, f({hi})={f_hi}"
        )
    while hi - lo > ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if _interior_minus_collapse(mid, spec) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimal_rank(cfg: EPCAConfig) -> tuple[int, float, float]:
    """Globally optimal rank: (n_k_star, r_star, lambda_cut_star).

    Retain-all for eps <= lam_minus, collapse for eps >= eps_star, otherwise
    the interior optimum at cutoff eps. n_k_star uses round-half-to-even.
    """
    spec = cfg.spectrum()
    lo, hi = spec.lambda_minus, spec.lambda_plus
    if cfg.eps <= lo:
        return cfg.n_v, 1.0, lo
    if cfg.eps >= 1.0:
        # Outside the theorem hypothesis; fall back to direct minimization.
        regime, r = brute_force_regime(spec, cfg.eps)
        if regime is Regime.RETAIN_ALL:
            return cfg.n_v, 1.0, lo
        if regime is Regime.COLLAPSE:
            return 0, 0.0, hi
        return int(round(cfg.n_v * r)), r, quantile(spec, r)
    if cfg.eps < collapse_threshold(spec):
        r = tail_mass(spec, cfg.eps)
        return int(round(cfg.n_v * r)), r, cfg.eps
    return 0, 0.0, hi


def classify_phase(eps: float, spec: MPSpectrum) -> PhasePoint:
    """Regime of (alpha, eps): retain-all, interior, or collapse.

    For eps >= 1 (outside the theorem hypothesis) the point is classified by
    brute-force minimization and flagged.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if eps >= 1.0:
        regime, r_star = brute_force_regime(spec, eps)
        return PhasePoint(spec.alpha, eps, regime, r_star, outside_theory=True)
    if eps <= spec.lambda_minus:
        return PhasePoint(spec.alpha, eps, Regime.RETAIN_ALL, 1.0)
    if eps >= collapse_threshold(spec):
        return PhasePoint(spec.alpha, eps, Regime.COLLAPSE, 0.0)
    return PhasePoint(spec.alpha, eps, Regime.INTERIOR, tail_mass(spec, eps))


def _cut_grid_integrals(spec: MPSpectrum, n_grid: int):
    """Per-direction (r, I_inv + I_log) on an interior cutoff grid."""
    lo, hi = spec.lambda_minus, spec.lambda_plus
    cuts = np.linspace(lo, hi, n_grid + 2)[1:-1]
    r, i_inv, i_log = tail_integrals_on_grid(spec, cuts)
    return cuts, r, i_inv + i_log


def _brute_force_regime_from_grid(eps, r_grid, ii_grid, r_full, ii_full):
    """Classify by argmin of the per-direction GE over grid plus endpoints.

    Candidates ordered by increasing rank so that the smallest rank wins on
    exact ties.
    """
    fe = cost_f(eps) - 1.0
    ge0 = fe  # rank-zero boundary, closed form
    ge1 = ii_full - 1.0  # retain-all boundary (r = 1, ME = 0)
    ge_grid = (1.0 - r_grid) * fe + (ii_grid - r_grid)
    order = np.argsort(r_grid, kind="stable")
    candidates = [(0.0, ge0, Regime.COLLAPSE)]
    candidates += [(r_grid[i], ge_grid[i], Regime.INTERIOR) for i in order]
    candidates += [(1.0, ge1, Regime.RETAIN_ALL)]
    best = min(candidates, key=lambda c: c[1])
    return best[2], best[0]


def brute_force_regime(spec: MPSpectrum, eps: float, n_grid: int = 201):
    """Regime and rank ratio from direct minimization of the asymptotic GE."""
    _, r_grid, ii_grid = _cut_grid_integrals(spec, n_grid)
    r_full, i_inv_full, i_log_full = tail_integrals_on_grid(
        spec, np.array([spec.lambda_minus])
    )
    return _brute_force_regime_from_grid(
        eps, r_grid, ii_grid, r_full[0], i_inv_full[0] + i_log_full[0]
    )


@dataclass(frozen=True)
class PhaseGridPoint:
    """One phase-grid cell with both classifications and the boundary data."""

    point: PhasePoint
    brute_force_regime: Regime
    brute_force_r: float
    lambda_minus: float
    eps_star: float


def phase_grid(
    alpha_values, eps_values, n_grid: int = 201
) -> list[PhaseGridPoint]:
    """Classify every (alpha, eps) grid point analytically and by brute force.

    Output ordered by (alpha index, eps index). The cutoff-grid integrals are
    computed once per alpha and reused across the eps sweep.
    """
    out: list[PhaseGridPoint] = []
    for alpha in alpha_values:
        spec = MPSpectrum(alpha)
        eps_star = collapse_threshold(spec)
        _, r_grid, ii_grid = _cut_grid_integrals(spec, n_grid)
        ii_full = integral_inv(spec, spec.lambda_minus) + integral_log(
            spec, spec.lambda_minus
        )
        for eps in eps_values:
            if eps <= 0:
                raise ValueError("eps values must be positive")
            bf_regime, bf_r = _brute_force_regime_from_grid(
                eps, r_grid, ii_grid, 1.0, ii_full
            )
            if eps >= 1.0:
                point = PhasePoint(alpha, eps, bf_regime, bf_r, outside_theory=True)
            elif eps <= spec.lambda_minus:
                point = PhasePoint(alpha, eps, Regime.RETAIN_ALL, 1.0)
            elif eps >= eps_star:
                point = PhasePoint(alpha, eps, Regime.COLLAPSE, 0.0)
            else:
                point = PhasePoint(alpha, eps, Regime.INTERIOR, tail_mass(spec, eps))
            out.append(
                PhaseGridPoint(point, bf_regime, bf_r, spec.lambda_minus, eps_star)
            )
    return out


def ge_curve_asymptotic(cfg: EPCAConfig) -> list[tuple[int, float, float, float, float]]:
    """(n_k, lambda_cut, ge, me, bias) over the integer rank grid.

    Ranks map to cutoffs via the tail quantile; endpoints use the exact
    boundary forms.
    """
    spec = cfg.spectrum()
    rows = []
    for n_k in range(cfg.n_v + 1):
        r = n_k / cfg.n_v
        cut = quantile(spec, r)
        me = model_error(r, cfg.eps, cfg.n_v)
        bias = data_bias_asymptotic(cut, spec, cfg.n_v)
        rows.append((n_k, cut, me + bias, me, bias))
    return rows


def brute_force_argmin_rank(cfg: EPCAConfig) -> int:
    """Integer rank minimizing the asymptotic GE; smallest rank wins ties."""
    rows = ge_curve_asymptotic(cfg)
    best_nk, best_ge = rows[0][0], rows[0][2]
    for n_k, _, ge, _, _ in rows[1:]:
        if ge < best_ge:
            best_nk, best_ge = n_k, ge
    return best_nk
