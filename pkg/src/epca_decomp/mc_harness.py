"""Wishart Monte-Carlo engine.

Samples empirical covariances of isotropic Gaussian data, builds the
eigen-eps-PCA and fixed-basis diagonal models, forms e-mixtures, and
computes the exact finite-sample three-component decomposition of the KL
generalization error. Every realization gets its own counter-based RNG
stream derived from (seed, realization_id), so runs are reproducible and
parallelizable; reductions over realizations use exact summation in fixed
realization order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .epca_theory import EPCAConfig, data_bias_asymptotic, model_error
from .kl_core import (
    DiagGaussian,
    EigenModel,
    cost_f,
    kl_diag,
    kl_isotropic_to_truncated,
)
from .mp_spectrum import quantile

EIG_FLOOR = 1e-300  # guards round-off only; Wishart with D > N_V is a.s. PD
GPT_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class WishartSample:
    """Eigendecomposition of one empirical covariance (1/D) X^T X."""

    realization_id: int
    eigenvalues: np.ndarray  # sorted descending
    frame: np.ndarray  # columns are the matching eigenvectors

    @property
    def dim(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class EMixture:
    """e-mixture of diagonal Gaussians: per-coordinate harmonic-mean variances.

    f_bar is the normalization deficit; it equals the variance component of
    the decomposition and is non-negative by Jensen.
    """

    variances: np.ndarray
    f_bar: float


def _stream(seed: int, realization_id: int) -> np.random.Generator:
    if seed < 0 or realization_id < 0:
        raise ValueError("seed and realization_id must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([seed, realization_id]))


def sample_wishart(
    n_v: int, d_samples: int, seed: int, realization_id: int
) -> WishartSample:
    """Draw one empirical covariance of D isotropic Gaussian samples and
    return its spectrum, deterministically in (seed, realization_id)."""
    if not d_samples > n_v >= 1:
        raise ValueError("need d_samples > n_v >= 1")
    rng = _stream(seed, realization_id)
    x = rng.standard_normal((d_samples, n_v))
    sigma = x.T @ x / d_samples
    eigvals, eigvecs = np.linalg.eigh(sigma)
    eigvals = np.maximum(eigvals[::-1], EIG_FLOOR)
    eigvecs = eigvecs[:, ::-1]
    return WishartSample(realization_id, np.ascontiguousarray(eigvals),
                         np.ascontiguousarray(eigvecs))


def build_eigen_model(sample: WishartSample, n_keep: int, eps: float) -> EigenModel:
    """Eigen-eps-PCA model: top n_keep empirical eigenpairs, rest pinned at eps.

    Eigenvalue/column pairs are re-sorted descending (the covariance is
    unchanged by the joint permutation) so the EigenModel invariant holds
    even when eps exceeds some kept eigenvalue.
    """
    n = sample.dim
    if not 0 <= n_keep <= n:
        raise ValueError(f"n_keep must be in [0, {n}], got {n_keep}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    lam = np.concatenate([sample.eigenvalues[:n_keep], np.full(n - n_keep, eps)])
    order = np.argsort(-lam, kind="stable")
    return EigenModel(frame=sample.frame[:, order], eigenvalues=lam[order])


def build_diamond_model(sample: WishartSample, n_keep: int, eps: float) -> DiagGaussian:
    """Fixed-basis diagonal model: same eigenvalues, standard basis."""
    n = sample.dim
    if not 0 <= n_keep <= n:
        raise ValueError(f"n_keep must be in [0, {n}], got {n_keep}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    variances = np.concatenate(
        [sample.eigenvalues[:n_keep], np.full(n - n_keep, eps)]
    )
    return DiagGaussian(variances)


def m_projection(n_v: int, n_keep: int, eps: float) -> DiagGaussian:
    """KL-closest point of the pinned diagonal family to N(0, I):
    unit variances on the free block, eps on the pinned block."""
    if not 0 <= n_keep <= n_v:
        raise ValueError(f"n_keep must be in [0, {n_v}], got {n_keep}")
    variances = np.concatenate([np.ones(n_keep), np.full(n_v - n_keep, eps)])
    return DiagGaussian(variances)


def e_mixture(models: list[DiagGaussian]) -> EMixture:
    """Per-coordinate harmonic mean of variances plus the deficit f_bar."""
    if not models:
        raise ValueError("e_mixture requires a non-empty model list")
    dims = {m.dim for m in models}
    if len(dims) != 1:
        raise ValueError("all models must have equal dimension")
    v = np.stack([m.variances for m in models])
    inv_mean = np.mean(1.0 / v, axis=0)
    log_mean = np.mean(np.log(v), axis=0)
    harmonic = 1.0 / inv_mean
    f_bar = 0.5 * math.fsum((log_mean + np.log(inv_mean)).tolist())
    return EMixture(variances=harmonic, f_bar=max(f_bar, 0.0))


def variance_term(mixture: EMixture, models: list[DiagGaussian]) -> float:
    """Average KL(mixture || model); equals mixture.f_bar identically."""
    vals = [kl_diag(mixture.variances, m.variances) for m in models]
    return math.fsum(vals) / len(vals)


def _sample_eigs(n_v, d_samples, n_realizations, seed):
    """(M, N_V) matrix of descending eigenvalue spectra, one row per stream."""
    return np.stack(
        [
            sample_wishart(n_v, d_samples, seed, m).eigenvalues
            for m in range(n_realizations)
        ]
    )


def _decompose_from_eigs(eigs: np.ndarray, eps: float, n_keep: int):
    """Exact finite-sample decomposition from pre-sampled spectra.

    Returns (DecompResult, f_bar). The residual is the floating-point defect
    of ge - me - bias - variance computed from the stored values.
    """
    from .epca_theory import DecompResult

    m_count, n_v = eigs.shape
    fe = cost_f(eps)
    kept = eigs[:, :n_keep]
    per_real = 0.5 * (
        np.sum(1.0 / kept + np.log(kept), axis=1) + (n_v - n_keep) * fe - n_v
    )
    ge = math.fsum(per_real.tolist()) / m_count

    me = 0.5 * (n_v - n_keep) * (fe - 1.0)

    inv_mean = np.mean(1.0 / kept, axis=0)
    log_mean = np.mean(np.log(kept), axis=0)
    f_bar = 0.5 * math.fsum((log_mean + np.log(inv_mean)).tolist())
    f_bar = max(f_bar, 0.0)

    # KL(P || e-mixture): harmonic-mean variances on the kept block.
    kl_bar = 0.5 * (
        math.fsum((inv_mean - 1.0 - np.log(inv_mean)).tolist())
        + (n_v - n_keep) * (fe - 1.0)
    )

    bias = kl_bar - me
    variance = ge - kl_bar
    residual = ge - me - bias - variance

    # The two data-bias forms coincide on this e-flat family.
    mixture_var = np.concatenate([1.0 / inv_mean, np.full(n_v - n_keep, eps)])
    q0_var = np.concatenate([np.ones(n_keep), np.full(n_v - n_keep, eps)])
    bias_gpt = kl_diag(q0_var, mixture_var)
    if abs(bias - bias_gpt) > GPT_CHECK_TOL:
        raise RuntimeError(
            f"data-bias forms disagree: alg={bias}, gpt={bias_gpt}"
        )

    return DecompResult(ge, me, bias, variance, residual), f_bar


def decompose(
    n_v: int,
    d_samples: int,
    eps: float,
    n_keep: int,
    n_realizations: int,
    seed: int,
):
    """Exact three-component decomposition at one rank.

    ge is the realization-averaged KL(P || diamond model); me, bias, and
    variance follow the m-projection / e-mixture construction, and the
    additive residual is zero up to floating point by construction.
    """
    if not 0 <= n_keep <= n_v:
        raise ValueError(f"n_keep must be in [0, {n_v}], got {n_keep}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    eigs = _sample_eigs(n_v, d_samples, n_realizations, seed)
    result, _ = _decompose_from_eigs(eigs, eps, n_keep)
    return result


@dataclass(frozen=True)
class GECurvePoint:
    """One rank of the empirical/asymptotic GE curve."""

    n_k: int
    ge_empirical_eigen: float
    ge_empirical_diamond: float
    me_exact: float
    bias_exact: float
    var_exact: float
    residual: float
    ge_asymptotic: float
    me_asymptotic: float
    bias_asymptotic: float
    rot_deviation: float  # max over realizations of |KL_full - KL_diag|


@dataclass(frozen=True)
class GECurveResult:
    points: list[GECurvePoint]
    max_rot_deviation: float
    max_residual: float

    def argmin_n_k(self, empirical: str = "eigen") -> int:
        key = {
            "eigen": lambda p: p.ge_empirical_eigen,
            "diamond": lambda p: p.ge_empirical_diamond,
        }[empirical]
        best = min(self.points, key=lambda p: (key(p), p.n_k))
        return best.n_k


def _full_matrix_kl_batch(sigmas: np.ndarray) -> np.ndarray:
    """KL(N(0,I) || N(0, sigma_m)) for a batch of covariances, via Cholesky."""
    m_count, n, _ = sigmas.shape
    chol = np.linalg.cholesky(sigmas)
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    inv_chol = np.linalg.solve(chol, np.broadcast_to(np.eye(n), (m_count, n, n)))
    trace_inv = np.sum(inv_chol * inv_chol, axis=(1, 2))
    return 0.5 * (trace_inv - n + logdet)


def empirical_ge_curve(
    n_v: int,
    d_samples: int,
    eps: float,
    n_realizations: int,
    seed: int,
) -> GECurveResult:
    """GE curve over all ranks, with the same realizations reused throughout.

    For every rank: empirical GE of the eigen model in full matrix form (the
    frame enters explicitly), empirical GE of the diamond model, the exact
    finite-sample decomposition, and the asymptotic closed forms.
    """
    cfg = EPCAConfig(n_v, d_samples, eps)
    spec = cfg.spectrum()
    samples = [
        sample_wishart(n_v, d_samples, seed, m) for m in range(n_realizations)
    ]
    eigs = np.stack([s.eigenvalues for s in samples])
    frames = np.stack([s.frame for s in samples])

    # Eigen-model covariances built by rank-1 updates from the eps floor:
    # sigma_k = sigma_{k-1} + (lam_k - eps) u_k u_k^T.
    sigmas = np.broadcast_to(
        eps * np.eye(n_v), (n_realizations, n_v, n_v)
    ).copy()

    diamond_kl = np.empty((n_realizations, n_v + 1))
    for m in range(n_realizations):
        costs = 1.0 / eigs[m] + np.log(eigs[m])
        cums = np.concatenate([[0.0], np.cumsum(costs)])
        ks = np.arange(n_v + 1)
        diamond_kl[m] = 0.5 * (cums + (n_v - ks) * cost_f(eps) - n_v)

    points: list[GECurvePoint] = []
    max_rot = 0.0
    max_res = 0.0
    for n_k in range(n_v + 1):
        if n_k > 0:
            u = frames[:, :, n_k - 1]
            coef = eigs[:, n_k - 1] - eps
            sigmas += coef[:, None, None] * np.einsum("mi,mj->mij", u, u)
        full_kl = _full_matrix_kl_batch(sigmas)
        ge_eigen = math.fsum(full_kl.tolist()) / n_realizations
        rot_dev = float(np.max(np.abs(full_kl - diamond_kl[:, n_k])))
        max_rot = max(max_rot, rot_dev)

        decomp, _ = _decompose_from_eigs(eigs, eps, n_k)
        max_res = max(max_res, abs(decomp.residual))

        r = n_k / n_v
        cut = quantile(spec, r)
        me_asym = model_error(r, eps, n_v)
        bias_asym = data_bias_asymptotic(cut, spec, n_v)
        points.append(
            GECurvePoint(
                n_k=n_k,
                ge_empirical_eigen=ge_eigen,
                ge_empirical_diamond=decomp.ge,
                me_exact=decomp.model_error,
                bias_exact=decomp.data_bias,
                var_exact=decomp.variance,
                residual=decomp.residual,
                ge_asymptotic=me_asym + bias_asym,
                me_asymptotic=me_asym,
                bias_asymptotic=bias_asym,
                rot_deviation=rot_dev,
            )
        )
    return GECurveResult(points, max_rot, max_res)
