"""Kernel methods in reproducing kernel Hilbert C*-modules.

Algebra arithmetic (:mod:`rkhm.algebra`), Hilbert C*-module linear algebra
(:mod:`rkhm.module`), algebra-valued kernels (:mod:`rkhm.kernels`), PCA
(:mod:`rkhm.pca`), Perron-Frobenius estimation (:mod:`rkhm.koopman`) and
kernel mean embeddings (:mod:`rkhm.kme`).
"""

from .algebra import (AlgebraDescriptor, AlgebraElement, AlgebraError, AlgebraMismatch, NotPositive,
                      NotSelfAdjoint, SpectralData, adjoint, is_positive, multiply, norm, spectral_decompose,
                      sqrt_positive)
from .kernels import (DiagonalMatrix, FunctionalMoment, Gaussian, IntegralOperatorKernel, Laplacian,
                      PointwiseFunction, QuantumRankOne, ScalarTimesIdentity, eval_kernel, gram, rkhm_eval)
from .kme import (DiscreteMeasure, InteractionRegressor, embed_inner, functional_measure_gram, interaction_fit,
                  interaction_max, interaction_max_exact, mmd, quantum_inner)
from .koopman import PerronFrobeniusRKHM, estimate_pf, mode_decompose, pf_eig1, predict_similarity
from .module import (ModuleVector, OperatorMatrix, QrResult, absolute, gram_schmidt_qr, inner, normalize,
                     project)
from .pca import RKHMPCA, PcaConfig, PcaModel, fit_pca_gd, fit_pca_hs_gd, fit_pca_trace, pca_gradient, pca_objective

__version__ = "0.1.0"

__all__ = [
    "AlgebraDescriptor", "AlgebraElement", "AlgebraError", "AlgebraMismatch", "NotPositive", "NotSelfAdjoint",
    "SpectralData", "adjoint", "is_positive", "multiply", "norm", "spectral_decompose", "sqrt_positive",
    "DiagonalMatrix", "FunctionalMoment", "Gaussian", "IntegralOperatorKernel", "Laplacian", "PointwiseFunction",
    "QuantumRankOne", "ScalarTimesIdentity", "eval_kernel", "gram", "rkhm_eval",
    "DiscreteMeasure", "InteractionRegressor", "embed_inner", "functional_measure_gram", "interaction_fit",
    "interaction_max", "interaction_max_exact", "mmd", "quantum_inner",
    "PerronFrobeniusRKHM", "estimate_pf", "mode_decompose", "pf_eig1", "predict_similarity",
    "ModuleVector", "OperatorMatrix", "QrResult", "absolute", "gram_schmidt_qr", "inner", "normalize", "project",
    "RKHMPCA", "PcaConfig", "PcaModel", "fit_pca_gd", "fit_pca_hs_gd", "fit_pca_trace", "pca_gradient",
    "pca_objective",
]
