"""KL generalization-error decomposition for eps-PCA on isotropic Gaussian data."""

from .epca_theory import (
    DecompResult,
    EPCAConfig,
    PhasePoint,
    Regime,
    classify_phase,
    collapse_threshold,
    data_bias_asymptotic,
    dge_dr,
    ge_asymptotic,
    model_error,
    optimal_rank,
    phase_grid,
    second_root,
)
from .kl_core import (
    DiagGaussian,
    EigenModel,
    cost_f,
    cross_entropy,
    eigen_to_full_kl,
    kl_isotropic_to_truncated,
    kl_zero_mean,
)
from .mc_harness import (
    EMixture,
    WishartSample,
    build_diamond_model,
    build_eigen_model,
    decompose,
    e_mixture,
    empirical_ge_curve,
    m_projection,
    sample_wishart,
    variance_term,
)
from .mp_spectrum import (
    MPSpectrum,
    density,
    edges,
    integral_inv,
    integral_log,
    quantile,
    tail_mass,
)

__all__ = [
    "DecompResult",
    "DiagGaussian",
    "EMixture",
    "EPCAConfig",
    "EigenModel",
    "MPSpectrum",
    "PhasePoint",
    "Regime",
    "WishartSample",
    "build_diamond_model",
    "build_eigen_model",
    "classify_phase",
    "collapse_threshold",
    "cost_f",
    "cross_entropy",
    "data_bias_asymptotic",
    "decompose",
    "density",
    "dge_dr",
    "e_mixture",
    "edges",
    "eigen_to_full_kl",
    "empirical_ge_curve",
    "ge_asymptotic",
    "integral_inv",
    "integral_log",
    "kl_isotropic_to_truncated",
    "kl_zero_mean",
    "m_projection",
    "model_error",
    "optimal_rank",
    "phase_grid",
    "quantile",
    "sample_wishart",
    "second_root",
    "tail_mass",
    "variance_term",
]
