"""Principal component analysis in an RKHM.

Three solvers share one model type:

* :func:`fit_pca_gd` - algebra-valued gradient descent (commutative algebras)
* :func:`fit_pca_trace` - flat eigendecomposition (matrix algebras)
* :func:`fit_pca_hs_gd` - Hilbert-Schmidt gradient descent (integral operators)

Principal axes are ``p_j = sum_i phi(x_i) c_{j,i}``; everything is computed
from the Gram matrix through the representer parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .algebra import INTEGRAL, MATRIX, AlgebraElement, AlgebraError
from .kernels import gram as kernel_gram
from .module import (ModuleVector, OperatorMatrix, default_epsilon, qr_rep, r_adj, r_inner, r_madj,
                     r_matmul, r_matvec, r_opnorm, rep_norm)


class SolverMismatch(AlgebraError):
    pass


class StepTooLarge(AlgebraError):
    def __init__(self, msg="step too large"):
        super().__init__(msg)


@dataclass(frozen=True)
class PcaConfig:
    """Solver settings.

    ``gram_scaling="operator_norm"`` runs the descent on ``G / ||G||`` and
    rescales the returned coefficients so they refer to ``G`` again.
    ``truncate_iterates`` projects each truncated-algebra iterate back onto the
    basis; by default iterates stay exact on the grid and only results are
    projected.
    """

    r: int = 1
    lam: float = 0.1
    eta: float = 0.01
    max_iters: int = 100
    epsilon: float | None = None
    init: object = "ones"
    grad_tol: float = 1e-8
    gram_scaling: str = "none"
    truncate_iterates: bool = False

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.gram_scaling not in ("none", "operator_norm"):
            raise ValueError(f"unknown gram_scaling {self.gram_scaling!r}")


@dataclass(frozen=True, eq=False)
class PcaModel:
    coeffs: tuple
    gram: OperatorMatrix
    objective_traces: tuple = ()
    objective_reps: tuple = field(default=(), repr=False)
    samples: object = None
    eigenvalues: np.ndarray | None = None
    scale: float = 1.0

    @property
    def objective_trace(self):
        """``f(c_t)`` per iteration for the first axis."""
        return self.objective_traces[0] if self.objective_traces else ()

    def objective_values(self, axis=0):
        """Exact objective values in the representation, ``(iterations, B, r, r)``.

        For functions this is ``f(c_t)`` at the grid nodes before any refit.
        """
        return self.objective_reps[axis]

    @property
    def r(self):
        return len(self.coeffs)

    def to_dict(self):
        return {
            "coeffs": [c.to_dict() for c in self.coeffs],
            "gram": self.gram.to_dict(),
            "objective_traces": [[_elem_payload(a) for a in tr] for tr in self.objective_traces],
            "scale": self.scale,
            "eigenvalues": None if self.eigenvalues is None else np.asarray(self.eigenvalues).tolist(),
        }


def _elem_payload(a):
    from .algebra import element_to_dict
    return element_to_dict(a)["payload"]


# objective and gradient
def _objective_rep(grep, crep, lam, one):
    gc = r_matvec(grep, crep)
    cgc = r_inner(crep, gc)
    quad = r_inner(crep, r_matvec(grep, gc))
    e = cgc - one
    return -quad + lam * (r_adj(e) @ e)


def _gradient_rep(grep, crep, lam):
    gc = r_matvec(grep, crep)
    cgc = r_inner(crep, gc)
    g2c = r_matvec(grep, gc)
    return -2 * g2c - 4 * lam * gc + 4 * lam * (gc @ cgc)


def _check(g, c):
    if g.descriptor != c.descriptor:
        raise AlgebraError("algebra mismatch")
    if len(g) != len(c):
        raise ValueError("shape mismatch")


def pca_objective(g, c, lam):
    """``f(c) = -c^* G^2 c + lam |c^* G c - 1|^2``."""
    _check(g, c)
    d = g.descriptor
    return AlgebraElement.from_rep(d, _objective_rep(g.rep, c.rep, lam, d.rep_identity()))


def pca_gradient(g, c, lam):
    """``d = -2 G^2 c - 4 lam G c + 4 lam G c (c^* G c)``.

    This is the algebra-valued gradient for self-adjoint (real-valued) data in
    a commutative algebra: ``D f_c(u) = <d, u>``.
    """
    _check(g, c)
    return ModuleVector.from_rep(g.descriptor, _gradient_rep(g.rep, c.rep, lam))


def directional_derivative(g, c, u, lam):
    """``<d, u>`` for the gradient ``d`` at ``c``."""
    _check(g, c)
    return AlgebraElement.from_rep(g.descriptor, r_inner(_gradient_rep(g.rep, c.rep, lam), u.rep))


# helpers shared by the descent solvers
def _scaled_gram(g, cfg):
    if cfg.gram_scaling == "none":
        return g.rep, 1.0
    s = r_opnorm(g.rep)
    if s <= 0:
        return g.rep, 1.0
    return g.rep / s, s


def _init_rep(g, cfg):
    d = g.descriptor
    n = len(g)
    if isinstance(cfg.init, ModuleVector):
        if cfg.init.descriptor != d or len(cfg.init) != n:
            raise ValueError("init vector does not match the Gram matrix")
        return cfg.init.rep
    if cfg.init != "ones":
        raise ValueError(f"unknown init {cfg.init!r}")
    return np.broadcast_to(d.rep_identity(), (n,) + d.rep_shape).copy()


def _orthonormal_axes(d, grep, axes, epsilon):
    """Earlier axes recombined so that ``c_i^* G c_j`` is an idempotent-diagonal matrix."""
    cmat = np.stack(axes, axis=1)                          # (n, j, B, r, r)
    inner = r_matmul(r_madj(cmat), r_matmul(grep, cmat))
    _, r_inv, _ = qr_rep(d, 0.5 * (inner + r_madj(inner)), epsilon)
    return r_matmul(cmat, r_inv)


def _deflate(grep, crep, basis):
    """Remove the G-orthogonal projection of ``c`` onto the columns of ``basis``."""
    if basis is None:
        return crep
    coords = r_matvec(r_madj(basis), r_matvec(grep, crep))
    return crep - r_matvec(basis, coords)


def _finite_or_raise(x):
    if not np.all(np.isfinite(x)):
        raise StepTooLarge()


def fit_pca_gd(g, config=None, samples=None):
    """Algebra-valued gradient descent with per-step deflation for later axes."""
    cfg = config or PcaConfig()
    d = g.descriptor
    if not d.commutative:
        raise SolverMismatch("use trace solver")
    grep, scale = _scaled_gram(g, cfg)
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(d)
    one = d.rep_identity()
    axes, traces, reps = [], [], []
    for _ in range(cfg.r):
        basis = _orthonormal_axes(d, grep, axes, eps) if axes else None
        c = _deflate(grep, _init_rep(g, cfg), basis)
        vals = []
        for _ in range(cfg.max_iters):
            vals.append(_objective_rep(grep, c, cfg.lam, one))
            grad = _gradient_rep(grep, c, cfg.lam)
            if np.sqrt(rep_norm(r_inner(grad, grad))) < cfg.grad_tol:
                break
            c = _deflate(grep, c - cfg.eta * grad, basis)
            _finite_or_raise(c)
            if cfg.truncate_iterates:
                c = d.to_rep(d.from_rep(c))
        else:
            vals.append(_objective_rep(grep, c, cfg.lam, one))
        axes.append(c)
        reps.append(np.stack(vals))
        traces.append(tuple(AlgebraElement.from_rep(d, v) for v in vals))
    coeffs = tuple(ModuleVector.from_rep(d, c / np.sqrt(scale)) for c in axes)
    return PcaModel(coeffs, g, tuple(traces), tuple(reps), samples, scale=scale)


def _phase_normalize(v):
    """Make the first max-magnitude entry of each column real positive."""
    idx = np.argmax(np.abs(v) >= np.abs(v).max(axis=0) * (1 - 1e-12), axis=0)
    ph = v[idx, np.arange(v.shape[1])]
    return v * (np.abs(ph) / ph)[None, :]


def flat_gram(g):
    """Matrix-algebra Gram as the ``(n m) x (n m)`` complex matrix."""
    if g.descriptor.kind != MATRIX:
        raise SolverMismatch("flat Gram needs a matrix algebra")
    n = len(g)
    m = g.descriptor.size
    return g.payload.transpose(0, 2, 1, 3).reshape(n * m, n * m)


def fit_pca_trace(g, r, samples=None):
    """Top-``r`` eigenvectors of the flattened Gram placed in the first column of each entry."""
    d = g.descriptor
    if d.kind != MATRIX:
        raise SolverMismatch("trace solver needs a matrix algebra")
    n, m = len(g), d.size
    if r < 1 or r > n * m:
        raise ValueError(f"r must lie in [1, {n * m}]")
    flat = flat_gram(g)
    w, v = np.linalg.eigh(0.5 * (flat + flat.conj().T))
    order = np.lexsort((np.arange(w.size), -w))
    w, v = w[order][:r], _phase_normalize(v[:, order][:, :r])
    cutoff = 1e-14 * max(abs(w[0]), 1.0)
    coeffs = []
    for j in range(r):
        p = np.zeros((n, m, m), dtype=complex)
        if w[j] > cutoff:
            p[:, :, 0] = v[:, j].reshape(n, m) / np.sqrt(w[j])
        coeffs.append(ModuleVector(d, p))
    model = PcaModel(tuple(coeffs), g, samples=samples, eigenvalues=w)
    obj = -_captured_rep(model)
    return replace(model, objective_traces=((AlgebraElement.from_rep(d, obj),),),
                   objective_reps=(obj[None],))


def _hs(a):
    """Real Hilbert-Schmidt inner products need only the polynomial block."""
    return a[..., :-1, :-1]


def fit_pca_hs_gd(g, r=None, config=None, samples=None):
    """Gradient descent over Hilbert-Schmidt coefficients for integral-operator Grams.

    Objective ``-sum_i ||(G c)_i||_HS^2 + lam (sum_i tr((c^* G c)) - 1)^2``;
    later axes are deflated against earlier ones in the module sense, and
    each finished axis is rescaled so that ``tr(c^* G c) = 1``.
    """
    cfg = config or PcaConfig()
    if r is not None:
        cfg = replace(cfg, r=r)
    d = g.descriptor
    if d.kind != INTEGRAL:
        raise SolverMismatch("Hilbert-Schmidt solver needs an integral operator algebra")
    grep, scale = _scaled_gram(g, cfg)
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(d)
    n = len(g)
    if isinstance(cfg.init, ModuleVector):
        if np.max(np.abs(cfg.init.payload[:, 0])) > 0:
            raise ValueError("initial coefficients must have a zero identity channel")
        init = cfg.init.rep
    elif cfg.init == "ones":
        # constant kernel 1 in every slot
        p = np.zeros((n,) + d.payload_shape, dtype=complex)
        p[:, 1] = 1.0
        init = d.to_rep(p)
    else:
        raise ValueError(f"unknown init {cfg.init!r}")

    def objective(c):
        gc = r_matvec(grep, c)
        tau = np.einsum("nbij,nbij->", np.conj(_hs(c)), _hs(gc)).real
        return -float(np.sum(np.abs(_hs(gc)) ** 2)) + cfg.lam * (tau - 1.0) ** 2

    axes, traces, reps = [], [], []
    for _ in range(cfg.r):
        basis = _orthonormal_axes(d, grep, axes, eps) if axes else None
        c = _deflate(grep, init, basis)
        vals = []
        for _ in range(cfg.max_iters):
            vals.append(objective(c))
            gc = r_matvec(grep, c)
            tau = np.einsum("nbij,nbij->", np.conj(_hs(c)), _hs(gc)).real
            grad = -2 * r_matvec(grep, gc) + 4 * cfg.lam * (tau - 1.0) * gc
            if np.sqrt(np.sum(np.abs(_hs(grad)) ** 2)) < cfg.grad_tol:
                break
            c = _deflate(grep, c - cfg.eta * grad, basis)
            _finite_or_raise(c)
        else:
            vals.append(objective(c))
        tau = np.einsum("nbij,nbij->", np.conj(_hs(c)), _hs(r_matvec(grep, c))).real
        if tau > 0:
            c = c / np.sqrt(tau)
        axes.append(c)
        reps.append(np.asarray(vals))
        traces.append(tuple(AlgebraElement.scalar_multiple(d, v) for v in vals))
    coeffs = tuple(ModuleVector.from_rep(d, c / np.sqrt(scale)) for c in axes)
    return PcaModel(coeffs, g, tuple(traces), tuple(reps), samples, scale=scale)


# evaluation
def _captured_rep(model):
    g = model.gram.rep
    total = np.zeros(model.gram.descriptor.rep_shape, dtype=complex)
    for c in model.coeffs:
        gc = r_matvec(g, c.rep)
        total = total + np.einsum("nbij,nbkj->bik", gc, np.conj(gc))
    return total


def reconstruction_error(g, model):
    """``sum_i [G_ii - sum_j (G c_j)_i (G c_j)_i^*]``."""
    if model.coeffs and model.coeffs[0].descriptor != g.descriptor:
        raise AlgebraError("algebra mismatch")
    if any(len(c) != len(g) for c in model.coeffs):
        raise ValueError("shape mismatch")
    rep = g.rep
    n = len(g)
    diag = rep[np.arange(n), np.arange(n)].sum(axis=0)
    captured = _captured_rep(replace(model, gram=g)) if model.coeffs else 0.0
    return AlgebraElement.from_rep(g.descriptor, diag - captured)


def training_weights(model):
    """``<p_j, phi(x_i)>`` for all training samples, shape ``(r, n)`` payloads."""
    g = model.gram.rep
    d = model.gram.descriptor
    out = []
    for c in model.coeffs:
        out.append(d.from_rep(r_adj(r_matvec(g, c.rep))))
    return np.stack(out)


def principal_weights(spec, model, x):
    """``<p_j, phi(x)> = sum_i c_{j,i}^* k(x_i, x)`` for ``j = 1..r``."""
    check_is_fitted_model(model)
    d = spec.descriptor
    col = spec.pairwise(spec.prepare(model.samples), spec.prepare(np.asarray(x)[None]))[:, 0]
    crep = d.to_rep(col)
    return [AlgebraElement.from_rep(d, r_inner(c.rep, crep)) for c in model.coeffs]


def check_is_fitted_model(model):
    if model.samples is None:
        raise ValueError("model has no training samples attached")


class RKHMPCA(TransformerMixin, BaseEstimator):
    """Estimator wrapper choosing the solver from the kernel's algebra.

    ``transform`` returns principal weights as payload arrays of shape
    ``(n_samples, n_components) + payload_shape``.
    """

    def __init__(self, kernel=None, n_components=1, lam=0.1, eta=0.01, max_iters=100,
                 solver="auto", gram_scaling="none", epsilon=None):
        self.kernel = kernel
        self.n_components = n_components
        self.lam = lam
        self.eta = eta
        self.max_iters = max_iters
        self.solver = solver
        self.gram_scaling = gram_scaling
        self.epsilon = epsilon

    def _config(self):
        return PcaConfig(r=self.n_components, lam=self.lam, eta=self.eta, max_iters=self.max_iters,
                         epsilon=self.epsilon, gram_scaling=self.gram_scaling)

    def fit(self, X, y=None):
        if self.kernel is None:
            raise ValueError("kernel must be set")
        X = np.asarray(X)
        g = kernel_gram(self.kernel, X)
        d = g.descriptor
        solver = self.solver
        if solver == "auto":
            solver = "gd" if d.commutative else ("trace" if d.kind == MATRIX else "hs")
        if solver == "gd":
            self.model_ = fit_pca_gd(g, self._config(), samples=X)
        elif solver == "trace":
            self.model_ = fit_pca_trace(g, self.n_components, samples=X)
        elif solver == "hs":
            self.model_ = fit_pca_hs_gd(g, config=self._config(), samples=X)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        self.reconstruction_error_ = reconstruction_error(g, self.model_)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = np.asarray(X)
        d = self.kernel.descriptor
        cols = self.kernel.pairwise(self.kernel.prepare(self.model_.samples), self.kernel.prepare(X))
        crep = d.to_rep(cols)                                  # (n_train, n_new, B, r, r)
        out = []
        for c in self.model_.coeffs:
            w = np.einsum("nbsa,nkbsc->kbac", np.conj(c.rep), crep)
            out.append(d.from_rep(w))
        return np.stack(out, axis=1)
