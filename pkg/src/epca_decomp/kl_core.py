"""Exact zero-mean Gaussian KL divergences and the per-direction cost function.

All divergences are in nats (natural logarithms throughout). Everything in
this module is a pure function of immutable values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FRAME_TOL = 1e-10  # per-entry orthonormality tolerance, checked at construction


def cost_f(x: float) -> float:
    """Per-direction Gaussian KL cost f(x) = 1/x + log x.

    Strictly convex on (0, inf) with global minimum f(1) = 1.
    """
    if x <= 0:
        raise ValueError(f"cost_f requires x > 0, got {x}")
    return 1.0 / x + math.log(x)


@dataclass(frozen=True)
class DiagGaussian:
    """Zero-mean Gaussian with diagonal covariance."""

    variances: np.ndarray

    def __post_init__(self):
        v = np.array(self.variances, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("variances must be a non-empty 1-D array")
        if not np.all(v > 0):
            raise ValueError("all variances must be strictly positive")
        v.flags.writeable = False
        object.__setattr__(self, "variances", v)

    @property
    def dim(self) -> int:
        return self.variances.size


@dataclass(frozen=True)
class EigenModel:
    """Zero-mean Gaussian given by an orthonormal frame and its eigenvalues.

    Columns of `frame` are eigenvectors; eigenvalues are sorted
    non-increasing and paired with the corresponding columns.
    """

    frame: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        u = np.array(self.frame, dtype=float)
        lam = np.array(self.eigenvalues, dtype=float)
        n = lam.size
        if u.shape != (n, n):
            raise ValueError(f"frame must be {n}x{n}, got {u.shape}")
        if not np.all(lam > 0):
            raise ValueError("all eigenvalues must be strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        gram = u.T @ u
        if np.max(np.abs(gram - np.eye(n))) > FRAME_TOL:
            raise ValueError("frame is not orthonormal within tolerance")
        u.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "frame", u)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def covariance(self) -> np.ndarray:
        sigma = (self.frame * self.eigenvalues) @ self.frame.T
        return 0.5 * (sigma + sigma.T)


def kl_zero_mean(sigma0: np.ndarray, sigma1: np.ndarray) -> float:
    """KL(N(0, sigma0) || N(0, sigma1)) for symmetric positive-definite inputs.

    Computed through Cholesky factors; a failed factorization is the
    positive-definiteness check.
    """
    s0 = np.asarray(sigma0, dtype=float)
    s1 = np.asarray(sigma1, dtype=float)
    if s0.ndim != 2 or s0.shape[0] != s0.shape[1]:
        raise ValueError(f"sigma0 must be square, got shape {s0.shape}")
    if s0.shape != s1.shape:
        raise ValueError(f"shape mismatch: {s0.shape} vs {s1.shape}")
    n = s0.shape[0]
    l0 = np.linalg.cholesky(s0)  # raises LinAlgError if not PD
    l1 = np.linalg.cholesky(s1)
    # tr(S1^-1 S0) = || L1^-1 L0 ||_F^2
    a = np.linalg.solve(l1, l0)
    trace = float(np.sum(a * a))
    logdet0 = 2.0 * float(np.sum(np.log(np.diagonal(l0))))
    logdet1 = 2.0 * float(np.sum(np.log(np.diagonal(l1))))
    return 0.5 * (trace - n + logdet1 - logdet0)


def kl_diag(var0: np.ndarray, var1: np.ndarray) -> float:
    """kl_zero_mean specialized to diagonal covariances given as variance vectors."""
    v0 = np.asarray(var0, dtype=float)
    v1 = np.asarray(var1, dtype=float)
    if v0.shape != v1.shape or v0.ndim != 1:
        raise ValueError("variance vectors must be 1-D and of equal length")
    terms = v0 / v1 - 1.0 + np.log(v1) - np.log(v0)
    return 0.5 * math.fsum(terms.tolist())


def kl_isotropic_to_truncated(eigenvalues: np.ndarray, n_keep: int, eps: float) -> float:
    """KL(N(0, I) || N(0, diag(lam_1..lam_k, eps..eps))).

    Equals kl_zero_mean against the explicitly assembled diagonal but uses
    the separable form directly.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    if not 0 <= n_keep <= n:
        raise ValueError(f"n_keep must be in [0, {n}], got {n_keep}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not np.all(lam > 0):
        raise ValueError("all eigenvalues must be strictly positive")
    kept = lam[:n_keep]
    s = math.fsum((1.0 / kept + np.log(kept)).tolist())
    s += (n - n_keep) * cost_f(eps)
    return 0.5 * (s - n)


def eigen_to_full_kl(model: EigenModel) -> float:
    """KL(N(0, I) || model) evaluated in full matrix form.

    The frame is used explicitly (no diagonal shortcut); on isotropic data
    the result coincides with the diagonal form by rotational invariance.
    """
    return kl_zero_mean(np.eye(model.dim), model.covariance())


def kl_isotropic_to(q: DiagGaussian | EigenModel) -> float:
    """KL(N(0, I) || q) for either model representation."""
    if isinstance(q, DiagGaussian):
        return kl_diag(np.ones(q.dim), q.variances)
    return eigen_to_full_kl(q)


def isotropic_entropy(n_v: int) -> float:
    """Differential entropy of N(0, I_n) in nats."""
    return 0.5 * n_v * math.log(2.0 * math.pi * math.e)


def cross_entropy(p_dim: int, q: DiagGaussian | EigenModel) -> float:
    """Cross-entropy H(P; Q) = KL(P || Q) + H(P) with P = N(0, I_p_dim)."""
    if q.dim != p_dim:
        raise ValueError(f"dimension mismatch: P has {p_dim}, Q has {q.dim}")
    return kl_isotropic_to(q) + isotropic_entropy(p_dim)
