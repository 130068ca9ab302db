"""Perron-Frobenius operator estimation on an RKHM from a time series.

With ``W = [phi(x_0), ..., phi(x_{T-1})]`` and ``Q = W R_inv`` from module QR,
the operator is compressed to ``K_T = Q^* K Q = R_inv^* G' R_inv`` where
``G'[i, j] = k(x_i, x_{j+1})``.  All quantities are computed in the
algebra representation and only stored as payloads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algebra import AlgebraElement, AlgebraError, INTEGRAL, rep_norm
from .kernels import gram
from .module import (ModuleVector, OperatorMatrix, QrResult, check_gram, default_epsilon, qr_rep, r_eye,
                     r_inner, r_madj, r_matmul, r_matvec, r_opnorm)
from .pca import StepTooLarge


@dataclass(frozen=True, eq=False)
class PfModel:
    K_T: OperatorMatrix
    qr: QrResult
    gram_full: OperatorMatrix
    samples: object
    epsilon: float
    spec: object = field(default=None, repr=False)

    @property
    def T(self):
        return len(self.K_T)

    @property
    def descriptor(self):
        return self.K_T.descriptor

    def coordinates_of_start(self):
        """``q_0 = R_inv^* (k(x_i, x_0))_i``: coordinates of ``phi(x_0)`` in ``Q``."""
        t = self.T
        col = self.gram_full.rep[:t, 0]
        return r_matvec(r_madj(self.qr.R_inv.rep), col)

    def q_gram(self):
        """``Q^* Q = R_inv^* G R_inv`` (idempotent diagonal, zero off-diagonal)."""
        t = self.T
        ri = self.qr.R_inv.rep
        return r_matmul(r_madj(ri), r_matmul(self.gram_full.rep[:t, :t], ri))


@dataclass(frozen=True, eq=False)
class ModeDecomposition:
    eig1_coeffs: tuple
    invariant_term: AlgebraElement
    residual_fn: object = field(repr=False)
    v_coeffs: ModuleVector | None = None


def estimate_pf(spec, series, epsilon=None):
    """Estimate ``K_T`` from ``T + 1`` samples ``x_0..x_T``."""
    series = np.asarray(series)
    if len(series) < 2:
        raise ValueError("need at least two samples (T >= 1)")
    d = spec.descriptor
    if epsilon is None:
        epsilon = default_epsilon(d)
    gfull = gram(spec, series)
    t = len(series) - 1
    lead = gfull.block(range(t), range(t))
    check_gram(lead)
    grep = gfull.rep
    r, r_inv, kept = qr_rep(d, grep[:t, :t], epsilon)
    shifted = grep[:t, 1:t + 1]
    k = r_matmul(r_madj(r_inv), r_matmul(shifted, r_inv))
    qr = QrResult(OperatorMatrix.from_rep(d, r), OperatorMatrix.from_rep(d, r_inv), kept, float(epsilon))
    return PfModel(OperatorMatrix.from_rep(d, k), qr, gfull, series, float(epsilon), spec)


def _vnorm(v):
    return float(np.sqrt(rep_norm(r_inner(v, v))))


def eig_residual(model, v):
    """``||K_T v - v|| / ||v||``."""
    k = model.K_T.rep
    vr = v.rep if isinstance(v, ModuleVector) else v
    nv = _vnorm(vr)
    if nv == 0:
        return np.inf
    return _vnorm(r_matvec(k, vr) - vr) / nv


def pf_eig1(model, lam=0.01, eta=0.1, iters=1000, init=None, renorm_every=10, seed=0):
    """Vectors ``v`` with ``K_T v ~ v`` by descent on ``v^* ((K-I)^*(K-I) - lam I) v``.

    ``init`` is a list of starting ModuleVectors, an integer number of random
    starts, or ``None`` for the coordinates of ``phi(x_0)``.  Only vectors
    whose residual falls below ``10 sqrt(lam)`` are returned.  ``eta="auto"``
    uses ``1 / ||(K - I)^* (K - I)||``, inside the range where the iteration is
    a contraction on the top of the spectrum.
    """
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    d = model.descriptor
    t = model.T
    k = model.K_T.rep
    eye = r_eye(d, t)
    kmi = k - eye
    m = r_matmul(r_madj(kmi), kmi) - lam * eye
    if isinstance(eta, str):
        if eta != "auto":
            raise ValueError(f"unknown step size {eta!r}")
        eta = 1.0 / max(float(r_opnorm(m + lam * eye)), 1.0)
    if init is None:
        starts = [model.coordinates_of_start()]
    elif isinstance(init, int):
        rng = np.random.Generator(np.random.Philox(seed))
        starts = []
        for _ in range(init):
            p = rng.standard_normal((t,) + d.payload_shape)
            starts.append(d.to_rep(p))
    else:
        starts = [v.rep for v in init]
    found = []
    for v in starts:
        nv = _vnorm(v)
        if nv == 0:
            continue
        v = v / nv
        for it in range(1, iters + 1):
            v = v - eta * r_matvec(m, v)
            if it % renorm_every == 0 or it == iters:
                nv = _vnorm(v)
                if not np.isfinite(nv) or nv > 1e150:
                    raise StepTooLarge()
                if nv == 0:
                    break
                v = v / nv
        if _vnorm(v) > 0 and eig_residual(model, v) < 10 * np.sqrt(lam):
            found.append(ModuleVector.from_rep(d, v))
    return found


def mode_decompose(model, eig_vecs):
    """Split ``k(x_a, x_b)`` into the invariant part ``<v, v>`` and a residual."""
    d = model.descriptor
    gfull = model.gram_full
    if not eig_vecs:
        zero = AlgebraElement.zero(d)
        return ModeDecomposition((), zero, lambda a, b: gfull[a, b] - zero)
    vmat = np.stack([v.rep for v in eig_vecs], axis=1)          # (T, k, ...)
    qq = model.q_gram()
    inner = r_matmul(r_madj(vmat), r_matmul(qq, vmat))
    inner = 0.5 * (inner + r_madj(inner))
    _, r_inv, kept = qr_rep(d, inner, model.epsilon)
    if not any(kept):
        raise AlgebraError("all eigenvectors degenerate")
    u = r_matmul(vmat, r_inv)
    q0 = model.coordinates_of_start()
    z = r_matvec(u, r_matvec(r_madj(u), q0))
    invariant = AlgebraElement.from_rep(d, r_inner(z, r_matvec(qq, z)))
    v_w = ModuleVector.from_rep(d, r_matvec(model.qr.R_inv.rep, z))

    def residual(a, b):
        return gfull[a, b] - invariant

    return ModeDecomposition(tuple(eig_vecs), invariant, residual, v_w)


def predict_similarity(model, alpha, beta):
    """Projected estimate of ``k(x_alpha, x_beta) = <K^alpha phi(x_0), K^beta phi(x_0)>``."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    k = model.K_T.rep
    q0 = model.coordinates_of_start()
    va, vb = q0, q0
    for _ in range(alpha):
        va = r_matvec(k, va)
    for _ in range(beta):
        vb = r_matvec(k, vb)
    return AlgebraElement.from_rep(model.descriptor, r_inner(va, r_matvec(model.q_gram(), vb)))


def invariant_heatmap(decomposition, size=50):
    """Integral kernel of the invariant term on an ``size x size`` grid: rows ``(s, t, value)``."""
    a = decomposition.invariant_term
    if a.descriptor.kind != INTEGRAL:
        raise AlgebraError("heat map needs an integral operator algebra")
    g = np.linspace(0.0, 1.0, size)
    vals = a.kernel_values(g, g)
    s, t = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([s.ravel(), t.ravel(), vals.real.ravel()])


class PerronFrobeniusRKHM(BaseEstimator):
    """Estimator wrapper: ``fit`` on a series, then query similarities and modes."""

    def __init__(self, kernel=None, epsilon=None, lam=0.01, eta=0.1, iters=1000):
        self.kernel = kernel
        self.epsilon = epsilon
        self.lam = lam
        self.eta = eta
        self.iters = iters

    def fit(self, X, y=None):
        if self.kernel is None:
            raise ValueError("kernel must be set")
        self.model_ = estimate_pf(self.kernel, np.asarray(X), self.epsilon)
        self.eigvecs_ = pf_eig1(self.model_, self.lam, self.eta, self.iters)
        self.decomposition_ = mode_decompose(self.model_, self.eigvecs_)
        return self

    def predict_similarity(self, alpha, beta):
        check_is_fitted(self, "model_")
        return predict_similarity(self.model_, alpha, beta)
