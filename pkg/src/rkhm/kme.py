"""Kernel mean embeddings of algebra-valued measures.

Supported measures are finite sums ``mu = sum_i delta_{x_i} c_i`` and the
pushforward measures of bivariate functions ``x`` on ``[0,1]^2`` (or of
``m x m`` matrices entrywise), for which ``mu_x(E)`` is the integral operator
(matrix) with kernel ``chi_E(x(s, t))``.  Pairing two pushforwards through
``k = k~ 1_A`` gives ``g_xy(s, t) = int k~(x(r, s), y(r, t)) dr``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algebra import (AlgebraDescriptor, AlgebraElement, AlgebraError, AlgebraMismatch, INTEGRAL,
                      MATRIX, sqrt_positive)
from .kernels import Gaussian, psd_diagnostic, scalar_kernel_from_dict, scalar_kernel_to_dict
from .module import ModuleVector, OperatorMatrix, _flat, gram_factor, r_adj, r_inner, r_matvec
from .pca import PcaConfig, fit_pca_hs_gd, fit_pca_trace


# discrete measures
@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """``sum_i delta_{points[i]} weights[i]``."""

    points: np.ndarray
    weights: ModuleVector

    def __post_init__(self):
        pts = np.asarray(self.points)
        if len(pts) != len(self.weights):
            raise ValueError("points and weights differ in length")
        object.__setattr__(self, "points", pts)

    @property
    def descriptor(self):
        return self.weights.descriptor

    def __len__(self):
        return len(self.points)

    @classmethod
    def dirac(cls, descriptor, x, weight=None):
        w = AlgebraElement.identity(descriptor) if weight is None else weight
        return cls(np.asarray(x)[None], ModuleVector.from_elements([w]))

    @classmethod
    def empirical(cls, descriptor, points):
        """``(1/n) sum_i delta_{x_i}``."""
        pts = np.asarray(points)
        one = AlgebraElement.identity(descriptor).payload
        return cls(pts, ModuleVector(descriptor, np.stack([one / len(pts)] * len(pts))))

    @classmethod
    def zero(cls, descriptor, point_shape=(1,)):
        """One atom at the origin with weight 0 (module vectors cannot be empty)."""
        return cls(np.zeros((1,) + tuple(point_shape)), ModuleVector.zeros(descriptor, 1))

    def scale(self, c):
        """``mu c``: every weight multiplied on the right by ``c``."""
        return DiscreteMeasure(self.points, self.weights * c)

    def __add__(self, other):
        if other.descriptor != self.descriptor:
            raise AlgebraMismatch()
        return DiscreteMeasure(np.concatenate([self.points, other.points]),
                               ModuleVector(self.descriptor,
                                            np.concatenate([self.weights.payload, other.weights.payload])))

    def __neg__(self):
        return DiscreteMeasure(self.points, -self.weights)

    def __sub__(self, other):
        return self + (-other)

    def to_dict(self):
        return {"points": np.asarray(self.points).real.tolist(), "weights": self.weights.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.asarray(obj["points"], dtype=float), ModuleVector.from_dict(obj["weights"]))


def _cross_rep(spec, mu, nu):
    return spec.descriptor.to_rep(spec.pairwise(spec.prepare(mu.points), spec.prepare(nu.points)))


def embed_inner(spec, mu, nu):
    """``<Phi(mu), Phi(nu)> = sum_ij c_i^* k(x_i, y_j) d_j``."""
    d = spec.descriptor
    if mu.descriptor != d or nu.descriptor != d:
        raise AlgebraMismatch()
    k = _cross_rep(spec, mu, nu)
    return AlgebraElement.from_rep(d, r_inner(mu.weights.rep, r_matvec(k, nu.weights.rep)))


def mmd(spec, mu, nu):
    """``|Phi(mu) - Phi(nu)|`` with the difference formed as a signed measure."""
    return sqrt_positive(embed_inner(spec, mu - nu, mu - nu))


def mmd_expanded(spec, mu, nu):
    """The same quantity through ``<mu,mu> - <mu,nu> - <nu,mu> + <nu,nu>``."""
    sq = embed_inner(spec, mu, mu) - embed_inner(spec, mu, nu) - embed_inner(spec, nu, mu) \
        + embed_inner(spec, nu, nu)
    return sqrt_positive(sq)


# pushforward measures of functional / matrix samples
@dataclass(frozen=True, eq=False)
class FunctionalMeasureSet:
    """Pushforward measures ``mu_{x_i}`` and their Gram matrix.

    For an integral-operator descriptor the samples are ``(n, K, K)`` monomial
    coefficients of bivariate functions; for a matrix descriptor they are
    ``(n, m, m)`` arrays and the ``(j, l)`` entry of ``mu_x`` is the Dirac
    measure at ``x[j, l]``.
    """

    samples: np.ndarray
    base_kernel: object
    descriptor: AlgebraDescriptor
    gram: OperatorMatrix = field(repr=False)

    def __len__(self):
        return len(self.samples)

    def cross(self, new_samples):
        """``[<Phi(mu_{x_i}), Phi(mu_{y_j})>]_{ij}`` payloads, shape ``(n, n_new, ...)``."""
        return _measure_pairs(self.samples, np.asarray(new_samples), self.base_kernel, self.descriptor)

    def to_dict(self):
        return {"samples": np.asarray(self.samples).real.tolist(),
                "base_kernel": scalar_kernel_to_dict(self.base_kernel),
                "descriptor": self.descriptor.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        d = AlgebraDescriptor.from_dict(obj["descriptor"])
        return measure_gram(np.asarray(obj["samples"], dtype=float),
                            scalar_kernel_from_dict(obj["base_kernel"]), d)


def bivariate_values(coeffs, s, t):
    """``x(s, t)`` for monomial coefficient arrays ``(..., K, K)``."""
    c = np.asarray(coeffs, dtype=float)
    k = c.shape[-1]
    vs = np.asarray(s, dtype=float)[:, None] ** np.arange(k)
    vt = np.asarray(t, dtype=float)[:, None] ** np.arange(k)
    return vs @ c @ vt.T


def _measure_pairs(xs, ys, base, d):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if d.kind == MATRIX:
        if xs.shape[1:] != (d.size, d.size) or ys.shape[1:] != (d.size, d.size):
            raise ValueError("matrix samples must be m x m")
        # sum_p k~(x[p, j], y[p, l])
        vals = base(xs[:, None, :, :, None, None], ys[None, :, :, None, :, None])
        return np.einsum("abpjl->abjl", vals).astype(complex)
    if d.kind != INTEGRAL:
        raise AlgebraError("functional measures need an integral operator or matrix algebra")
    nodes, weights = d.quadrature
    xv = bivariate_values(xs, nodes, nodes)                  # (n, r, s)
    yv = bivariate_values(ys, nodes, nodes)
    vals = np.empty((len(xs), len(ys), len(nodes), len(nodes)))
    for i in range(len(xs)):
        kv = base(xv[i][None, :, :, None, None], yv[:, :, None, :, None])   # (ny, r, s, t)
        vals[i] = np.einsum("r,yrst->yst", weights, kv)
    p = d.fitter
    h = p @ vals @ p.T
    n1 = d.order + 1
    out = np.zeros((len(xs), len(ys)) + d.payload_shape, dtype=complex)
    out[..., 1:] = h.reshape(len(xs), len(ys), n1 * n1)
    return out


def measure_gram(samples, base_kernel=None, descriptor=None, check=True):
    """Gram matrix of the pushforward measures of ``samples``."""
    base = base_kernel or Gaussian()
    d = descriptor or AlgebraDescriptor.integral_operator()
    x = np.asarray(samples, dtype=float)
    if len(x) < 1:
        raise ValueError("need at least one sample")
    g = OperatorMatrix(d, _measure_pairs(x, x, base, d), hermitian=True)
    if check:
        psd_diagnostic(g)
    return FunctionalMeasureSet(x, base, d, g)


def functional_measure_gram(samples, base_kernel=None, descriptor=None):
    """Integral-operator Gram of bivariate-function pushforward measures."""
    d = descriptor or AlgebraDescriptor.integral_operator()
    if d.kind != INTEGRAL:
        raise AlgebraError("functional measures need an integral operator algebra")
    return measure_gram(samples, base_kernel, d)


def monte_carlo_entry(fm, i, j, s, t, n_draws=20000, seed=0):
    """Monte-Carlo estimate of ``g_ij(s, t)`` with its standard error."""
    rng = np.random.Generator(np.random.Philox(seed))
    r = rng.uniform(0.0, 1.0, n_draws)
    xi = bivariate_values(fm.samples[i], r, [s])[:, 0]
    xj = bivariate_values(fm.samples[j], r, [t])[:, 0]
    vals = fm.base_kernel(xi[:, None], xj[:, None])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_draws))


# interaction effects
@dataclass(frozen=True, eq=False)
class InteractionEstimator:
    C: tuple                    # r principal-axis coefficient vectors of length n
    Y: ModuleVector
    fm: FunctionalMeasureSet = field(repr=False)
    u_coeffs: ModuleVector = None
    pca: object = field(default=None, repr=False)

    @property
    def gram(self):
        return self.fm.gram

    @property
    def descriptor(self):
        return self.fm.descriptor

    def _projector_rep(self):
        # C C^*, (n, n, ...)
        crep = np.stack([c.rep for c in self.C], axis=1)
        return np.einsum("ijbxy,kjbzy->ikbxz", crep, np.conj(crep))

    def estimate(self, new_samples):
        """``Y C C^* g_new`` for each new sample."""
        d = self.descriptor
        cross = d.to_rep(self.fm.cross(new_samples))            # (n, n_new, ...)
        pc = np.einsum("ikbxy,kjbyz->ijbxz", self._projector_rep(), cross)
        yrep = self.Y.rep
        out = np.einsum("ibxy,ijbyz->jbxz", yrep, pc)
        return [AlgebraElement.from_rep(d, o) for o in out]


def interaction_fit(fm, Y, r, pca_config=None):
    """Principal axes of the measure embeddings, then the projected estimator of ``P_f``."""
    d = fm.descriptor
    n = len(fm)
    if isinstance(Y, ModuleVector):
        yv = Y
    else:
        yarr = np.asarray(Y)
        if yarr.shape == (n,):
            yv = ModuleVector(d, np.stack([AlgebraElement.scalar_multiple(d, v).payload for v in yarr]))
        else:
            yv = ModuleVector(d, yarr)
    if len(yv) != n:
        raise ValueError("need one target per sample")
    if yv.descriptor != d:
        raise AlgebraMismatch()
    if d.kind == MATRIX:
        model = fit_pca_trace(fm.gram, r, fm.samples)
    elif d.kind == INTEGRAL:
        cfg = pca_config or PcaConfig(lam=0.5, eta=0.01, max_iters=200, gram_scaling="operator_norm")
        model = fit_pca_hs_gd(fm.gram, r, cfg, fm.samples)
    else:
        raise AlgebraError("interaction estimation needs a matrix or integral operator algebra")
    est = InteractionEstimator(model.coeffs, yv, fm, None, model)
    # u_coeffs = C C^* Y^*
    u = np.einsum("ikbxy,kbyz->ibxz", est._projector_rep(), r_adj(yv.rep))
    return InteractionEstimator(model.coeffs, yv, fm, ModuleVector.from_rep(d, u), model)


def estimation_error(est, samples, targets):
    """Relative Hilbert-Schmidt error of the estimates against ``y_i 1_A`` on the polynomial block.

    The estimates are Hilbert-Schmidt operators and carry no identity channel,
    so only the block on the degree-``N`` polynomials is compared.
    """
    d = est.descriptor
    if d.kind != INTEGRAL:
        raise AlgebraError("estimation error needs an integral operator algebra")
    y = np.asarray(targets, dtype=float)
    n1 = d.order + 1
    top = np.stack([e.rep[0, :n1, :n1] for e in est.estimate(samples)])
    diff = top - y[:, None, None] * np.eye(n1)
    return float(np.sqrt(np.sum(np.abs(diff) ** 2)) / (np.sqrt(n1) * np.linalg.norm(y)))


def _factored(est, vrep):
    # L flat(v): evaluating inner products as (L u)^H (L v) avoids forming
    # u^* G u, whose rounding noise is amplified by the inverse in b_eps
    return gram_factor(est.gram.rep) @ _flat(vrep[:, None])


def _abs_u_svd(est):
    _, s, vh = np.linalg.svd(_factored(est, est.u_coeffs.rep), full_matrices=False)
    return s, vh


def abs_u_squared(est):
    """``|u|^2 = u_c^* G u_c`` as a rep."""
    z = _factored(est, est.u_coeffs.rep)
    return r_adj(z) @ z


def abs_u(est):
    """``|u| = (|u|^2)^(1/2)`` from the singular values of the factored coefficients."""
    s, vh = _abs_u_svd(est)
    return AlgebraElement.from_rep(est.descriptor, (r_adj(vh) * s[..., None, :]) @ vh)


def _impact(est, s, vh, weights):
    """``v = u b`` with ``b = V diag(weights) V^*`` and the impact ``<u, v>``.

    The inner product is evaluated in the eigenbasis ``V`` of ``|u|``:
    ``<u, u b> = V <u V, u V diag(weights)> V^*`` by A-linearity.  Forming
    the dense ``b`` first would mix its large null-space weights into the
    directions where ``|u|^2`` is large.  Directions of ``|u|`` at the
    rounding floor are treated as exactly null.
    """
    d = est.descriptor
    u = est.u_coeffs.rep
    v_basis = r_adj(vh)
    zv = _factored(est, u) @ v_basis
    # columns of u V whose singular value is at the rounding floor are zero
    # vectors to working precision; weights up to 1/eps would amplify their noise
    floor = zv.shape[-2] * np.finfo(float).eps * max(float(np.max(s)), np.finfo(float).tiny)
    zv = zv * (s > floor)[..., None, :]
    inner = r_adj(zv) @ (zv * weights[..., None, :])
    impact = v_basis @ inner @ vh
    b = (v_basis * weights[..., None, :]) @ vh
    return ModuleVector.from_rep(d, u @ b), AlgebraElement.from_rep(d, impact)


def interaction_max(est, epsilon):
    """``v_eps = u (|u| + eps)^-1`` and the impact ``<u, v_eps>``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s, vh = _abs_u_svd(est)
    return _impact(est, s, vh, 1.0 / (s + epsilon))


def interaction_max_exact(est, rtol=1e-12):
    """Maximizer ``u b`` with ``b`` the pseudo-inverse square root of ``|u|^2``.

    Eigenvalues ``d`` of ``|u|^2`` with ``sqrt(d)`` at most ``rtol`` times the
    largest count as zero and map to zero.
    """
    s, vh = _abs_u_svd(est)
    cut = rtol * max(float(np.max(s)), np.finfo(float).tiny)
    inv = np.where(s > cut, 1.0 / np.where(s > cut, s, 1.0), 0.0)
    return _impact(est, s, vh, inv)


def nu_kernel(est, v_coeffs, lower=0.0, upper=0.1, size=50, r_nodes=200):
    """Symmetrized kernel of ``nu(E) = sum_i mu_{x_i}(E) d_i`` on a uniform ``size x size`` grid.

    ``E = [lower, upper]``.  Returns ``(grid, values)`` with
    ``values[a, b] = k_nu(s_a, s_b) + k_nu(s_b, s_a)``.
    """
    d = est.descriptor
    if d.kind != INTEGRAL:
        raise AlgebraError("nu kernel needs an integral operator algebra")
    grid = np.linspace(0.0, 1.0, size)
    rn, rw = np.polynomial.legendre.leggauss(r_nodes)
    rn, rw = 0.5 * (rn + 1.0), 0.5 * rw
    total = np.zeros((size, size), dtype=complex)
    for x, dp in zip(est.fm.samples, v_coeffs.payload):
        di = AlgebraElement(d, dp)
        chi_grid = _indicator(bivariate_values(x, grid, grid), lower, upper)
        chi_r = _indicator(bivariate_values(x, grid, rn), lower, upper)        # (s, r)
        dker = di.kernel_values(rn, grid)                                      # (r, t)
        total += di.alpha * chi_grid + chi_r @ (rw[:, None] * dker)
    return grid, total + total.T


def _indicator(vals, lower, upper):
    return ((vals >= lower) & (vals <= upper)).astype(float)


class InteractionRegressor(BaseEstimator):
    """Estimator of ``x -> int int f(s, t, x(s, t))`` through projected measure embeddings."""

    def __init__(self, base_kernel=None, descriptor=None, n_components=3, lam=0.5, eta=0.01,
                 max_iters=200):
        self.base_kernel = base_kernel
        self.descriptor = descriptor
        self.n_components = n_components
        self.lam = lam
        self.eta = eta
        self.max_iters = max_iters

    def fit(self, X, y):
        d = self.descriptor or AlgebraDescriptor.integral_operator()
        fm = measure_gram(X, self.base_kernel or Gaussian(), d)
        cfg = PcaConfig(lam=self.lam, eta=self.eta, max_iters=self.max_iters,
                        gram_scaling="operator_norm")
        self.estimator_ = interaction_fit(fm, y, self.n_components, cfg)
        return self

    def predict(self, X):
        """Algebra-valued estimates as payloads, shape ``(n_new, ...)``."""
        check_is_fitted(self, "estimator_")
        return np.stack([e.payload for e in self.estimator_.estimate(X)])


# quantum states
class InvalidState(AlgebraError):
    def __init__(self, msg="invalid density matrix or basis"):
        super().__init__(msg)


def _check_density(rho, tol=1e-10):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidState("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol or abs(np.trace(rho) - 1) > tol:
        raise InvalidState()
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise InvalidState()
    return rho


def state_measure(rho, onb):
    """``mu rho`` with ``mu = sum_i delta_{psi_i} |psi_i><psi_i|``."""
    onb = np.asarray(onb, dtype=complex)
    m = onb.shape[1]
    proj = np.einsum("ia,ib->iab", onb, np.conj(onb))
    return DiscreteMeasure(onb, ModuleVector(AlgebraDescriptor.matrix(m), proj @ rho))


def quantum_inner(rho1, rho2, onb):
    """``(tr <Phi(mu rho1), Phi(mu rho2)>, tr(rho2 rho1^*))`` for the rank-one kernel."""
    from .kernels import QuantumRankOne
    rho1, rho2 = _check_density(rho1), _check_density(rho2)
    onb = np.asarray(onb, dtype=complex)
    m = rho1.shape[0]
    if rho2.shape != rho1.shape or onb.shape != (m, m):
        raise InvalidState("shape mismatch")
    if np.max(np.abs(np.conj(onb) @ onb.T - np.eye(m))) > 1e-10:
        raise InvalidState("basis is not orthonormal")
    spec = QuantumRankOne(m)
    inner = embed_inner(spec, state_measure(rho1, onb), state_measure(rho2, onb))
    lhs = float(np.trace(inner.payload).real)
    rhs = float(np.trace(rho2 @ rho1.conj().T).real)
    return lhs, rhs
