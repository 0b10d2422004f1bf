"""Marchenko-Pastur spectral machinery.

Density, support edges, upper-tail masses, tail quantiles, and the two
spectral integrals over the kept tail:

    I_inv(cut) = int_cut^{lam_plus} p(lam)/lam dlam
    I_log(cut) = int_cut^{lam_plus} log(lam) p(lam) dlam

All tail integrals use the substitution lam = lam_minus + (lam_plus -
lam_minus) sin^2(theta), which removes the square-root edge singularity,
followed by Gauss-Legendre quadrature with adaptive order refinement.
Results are deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

QUAD_REL_TOL = 1e-12
QUAD_ORDERS = (16, 32, 64, 128, 256, 512, 1024)
BISECT_TOL = 1e-12  # absolute tolerance in lambda for quantile inversion


@lru_cache(maxsize=None)
def _leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@dataclass(frozen=True)
class MPSpectrum:
    """Marchenko-Pastur law for aspect ratio alpha = N_V / D in (0, 1)."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def lambda_minus(self) -> float:
        return (1.0 - math.sqrt(self.alpha)) ** 2

    @property
    def lambda_plus(self) -> float:
        return (1.0 + math.sqrt(self.alpha)) ** 2


def edges(spec: MPSpectrum) -> tuple[float, float]:
    """Support edges ((1 - sqrt(alpha))^2, (1 + sqrt(alpha))^2)."""
    return spec.lambda_minus, spec.lambda_plus


def density(spec: MPSpectrum, lam):
    """MP density p(lam) = sqrt((lam_plus - lam)(lam - lam_minus)) / (2 pi alpha lam).

    Zero outside the support. Accepts scalars or arrays.
    """
    lam = np.asarray(lam, dtype=float)
    lo, hi = edges(spec)
    inside = (lam >= lo) & (lam <= hi)
    out = np.zeros_like(lam)
    lam_in = np.where(inside, lam, 1.0)
    val = np.sqrt(np.clip((hi - lam_in) * (lam_in - lo), 0.0, None)) / (
        2.0 * math.pi * spec.alpha * lam_in
    )
    out = np.where(inside, val, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _tail_quad(spec: MPSpectrum, lambda_cut: float, g) -> float:
    """int_{cut}^{lam_plus} g(lam) p(lam) dlam by adaptive Gauss-Legendre.

    With lam(theta) = lo + (hi - lo) sin^2(theta) the measure becomes
    p dlam = (hi - lo)^2 sin^2(theta) cos^2(theta) / (pi alpha lam) dtheta,
    smooth on [theta_cut, pi/2].
    """
    lo, hi = edges(spec)
    if lambda_cut >= hi:
        return 0.0
    cut = max(lambda_cut, lo)
    theta_cut = math.asin(math.sqrt(min(max((cut - lo) / (hi - lo), 0.0), 1.0)))
    a, b = theta_cut, 0.5 * math.pi
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    scale = (hi - lo) ** 2 / (math.pi * spec.alpha)
    prev = None
    for order in QUAD_ORDERS:
        x, w = _leggauss(order)
        theta = mid + half * x
        s, c = np.sin(theta), np.cos(theta)
        lam = lo + (hi - lo) * s * s
        integrand = scale * s * s * c * c / lam
        if g is not None:
            integrand = integrand * g(lam)
        val = half * float(np.dot(w, integrand))
        if prev is not None and abs(val - prev) <= QUAD_REL_TOL * max(1.0, abs(val)):
            return val
        prev = val
    return prev


def tail_mass(spec: MPSpectrum, lambda_cut: float) -> float:
    """Upper-tail mass r = int_{cut}^{lam_plus} p(lam) dlam, clamped to [0, 1]."""
    lo, hi = edges(spec)
    if lambda_cut <= lo:
        return 1.0
    if lambda_cut >= hi:
        return 0.0
    r = _tail_quad(spec, lambda_cut, None)
    return min(max(r, 0.0), 1.0)


def quantile(spec: MPSpectrum, r: float) -> float:
    """Inverse of tail_mass: the cutoff with tail mass r.

    Bisection on [lam_minus, lam_plus]; the tail-mass derivative vanishes at
    the edges, so Newton steps are not used.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    lo, hi = edges(spec)
    if r == 0.0:
        return hi
    if r == 1.0:
        return lo
    a, b = lo, hi  # tail_mass(a) = 1 >= r >= 0 = tail_mass(b)
    while b - a > BISECT_TOL:
        m = 0.5 * (a + b)
        if tail_mass(spec, m) >= r:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def integral_inv(spec: MPSpectrum, lambda_cut: float) -> float:
    """I_inv(cut) = int_{cut}^{lam_plus} p(lam)/lam dlam (non-negative)."""
    val = _tail_quad(spec, lambda_cut, lambda lam: 1.0 / lam)
    return max(val, 0.0)


def integral_log(spec: MPSpectrum, lambda_cut: float) -> float:
    """I_log(cut) = int_{cut}^{lam_plus} log(lam) p(lam) dlam."""
    return _tail_quad(spec, lambda_cut, np.log)


def tail_integrals_on_grid(spec: MPSpectrum, cuts: np.ndarray):
    """(tail_mass, I_inv, I_log) evaluated at each cutoff of a grid.

    Convenience for sweeps; same quadrature as the scalar functions.
    """
    cuts = np.asarray(cuts, dtype=float)
    r = np.array([tail_mass(spec, c) for c in cuts])
    i_inv = np.array([integral_inv(spec, c) for c in cuts])
    i_log = np.array([integral_log(spec, c) for c in cuts])
    return r, i_inv, i_log


def full_integral_inv(spec: MPSpectrum) -> float:
    """Closed-form full-support inverse moment, 1/(1 - alpha). Oracle use only."""
    return 1.0 / (1.0 - spec.alpha)


def full_integral_log(spec: MPSpectrum) -> float:
    """Closed-form full-support log moment, (alpha-1)/alpha log(1-alpha) - 1.

    Oracle use only; the numerical contract goes through quadrature.
    """
    a = spec.alpha
    return (a - 1.0) / a * math.log1p(-a) - 1.0
