"""Randomized property suites shared by ``rkhm selftest`` and the test-suite.

Every suite returns :class:`CheckResult` records with the worst observed
deviation next to the tolerance it was judged against.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .algebra import (INTEGRAL, MATRIX, SCALAR, AlgebraDescriptor, AlgebraElement, is_positive,
                      sqrt_positive)
from .kernels import Gaussian, IntegralOperatorKernel, ScalarTimesIdentity, gram
from .kme import (DiscreteMeasure, abs_u, embed_inner, interaction_fit, interaction_max, interaction_max_exact,
                  measure_gram, mmd, mmd_expanded, quantum_inner)
from .koopman import estimate_pf, mode_decompose, pf_eig1, predict_similarity
from .module import (ModuleVector, OperatorMatrix, gram_schmidt_qr, inner, module_norm,
                     qr_orthonormality_defect, qr_residual)
from .pca import directional_derivative, fit_pca_trace, flat_gram, pca_objective, reconstruction_error


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    trials: int
    seconds: float = 0.0

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} n={self.trials}"

    def to_dict(self):
        return asdict(self)


def make_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _cn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def suite_descriptors():
    """Scalar, Matrix m in {2, 3, 4}, Function N = 10, IntegralOperator N = 5."""
    return [AlgebraDescriptor.scalar(), AlgebraDescriptor.matrix(2), AlgebraDescriptor.matrix(3),
            AlgebraDescriptor.matrix(4), AlgebraDescriptor.function(10),
            AlgebraDescriptor.integral_operator(5)]


def random_element(d, rng, degree=None, real=False):
    """Random element; function elements use polynomials of at most ``degree``."""
    draw = (lambda s: rng.standard_normal(s)) if real else (lambda s: _cn(rng, s))
    if d.kind == SCALAR:
        return AlgebraElement(d, np.asarray(draw(())))
    if d.kind == MATRIX:
        return AlgebraElement(d, draw((d.size, d.size)))
    if d.kind == INTEGRAL:
        return AlgebraElement(d, draw(d.payload_shape))
    p = np.zeros(d.payload_shape, dtype=complex)
    k = d.order if degree is None else degree
    p[:k + 1] = draw((k + 1,))
    return AlgebraElement(d, p)


def random_vector(d, n, rng, degree=None, real=False):
    return ModuleVector.from_elements(random_element(d, rng, degree, real) for _ in range(n))


def _rel(err, scale):
    return float(err) / max(float(scale), 1e-300)


def _result(name, worsts, tol, t0):
    worst = max(worsts) if worsts else 0.0
    return CheckResult(name, bool(worst <= tol), float(worst), tol, len(worsts), time.perf_counter() - t0)


def _label(d):
    return str(d)


def algebra_suite(d, trials=100, seed=0):
    """C*-identity, submultiplicativity, involution, positivity closure, square roots."""
    rng = make_rng(seed)
    # function products stay exactly representable at these degrees
    deg = d.order // 2 if d.kind not in (SCALAR, MATRIX, INTEGRAL) else None
    deg4 = d.order // 4 if deg is not None else None
    cstar_tol = 1e-6 if d.exact else 1e-3
    out = []
    t0 = time.perf_counter()
    cstar, sub, inv_prod, inv_twice, pos, sq = [], [], [], [], [], []
    for _ in range(trials):
        a = random_element(d, rng, deg)
        b = random_element(d, rng, deg)
        na, nb = a.norm(), b.norm()
        cstar.append(_rel(abs((a.adjoint() * a).norm() - na ** 2), na ** 2))
        # the inequality is homogeneous; unit factors make the absolute slack
        # independent of the draw's scale
        sub.append(max(0.0, ((a / na) * (b / nb)).norm() - 1.0))
        lhs = (a * b).adjoint().rep
        rhs = (b.adjoint() * a.adjoint()).rep
        inv_prod.append(_rel(np.max(np.abs(lhs - rhs)), na * nb))
        inv_twice.append(float(np.max(np.abs(a.adjoint().adjoint().payload - a.payload))))
        c = random_element(d, rng, deg)
        pos.append(0.0 if is_positive(c.adjoint() * c, 1e-8) else 1.0)
        e = random_element(d, rng, deg4)
        p = e.adjoint() * e
        root = sqrt_positive(p * p)
        sq.append(_rel((root - p).norm(), p.norm()))
    out.append(_result(f"cstar_identity[{_label(d)}]", cstar, cstar_tol, t0))
    out.append(_result(f"submultiplicative[{_label(d)}]", sub, 1e-9, t0))
    # products are evaluated in the representation, so (ab)* and b*a* agree
    # to rounding rather than bit for bit
    out.append(_result(f"involution_product[{_label(d)}]", inv_prod, 1e-12, t0))
    out.append(_result(f"involution_twice[{_label(d)}]", inv_twice, 0.0, t0))
    out.append(_result(f"positivity_closure[{_label(d)}]", pos, 0.0, t0))
    out.append(_result(f"sqrt_square[{_label(d)}]", sq, 1e-6, t0))
    return out


def module_suite(d, trials=100, n=3, seed=1):
    """Inner-product axioms and Cauchy-Schwarz on ``A^n``."""
    rng = make_rng(seed)
    deg = d.order // 4 if d.kind not in (SCALAR, MATRIX, INTEGRAL) else None
    tol = 1e-9 if d.exact else 1e-6
    t0 = time.perf_counter()
    lin, herm, pos, definite, cs = [], [], [], [], []
    for _ in range(trials):
        u, v, p = (random_vector(d, n, rng, deg) for _ in range(3))
        c, e = random_element(d, rng, deg), random_element(d, rng, deg)
        lhs = inner(u, v * c + p * e)
        rhs = inner(u, v) * c + inner(u, p) * e
        scale = max(lhs.norm(), 1.0)
        lin.append(_rel((lhs - rhs).norm(), scale))
        uv = inner(u, v)
        herm.append(_rel((inner(v, u) - uv.adjoint()).norm(), max(uv.norm(), 1.0)))
        uu = inner(u, u)
        pos.append(0.0 if is_positive(uu, 1e-8 * max(uu.norm(), 1.0)) else 1.0)
        zero = ModuleVector.zeros(d, n)
        definite.append(inner(zero, zero).norm() + (0.0 if uu.norm() > 0 else 1.0))
        lhs_cs = module_norm(u) ** 2 * inner(v, v) - uv.adjoint() * uv
        cs.append(0.0 if is_positive(lhs_cs, 1e-8 * max(lhs_cs.norm(), 1.0)) else 1.0)
    return [_result(f"inner_linearity[{_label(d)}]", lin, tol, t0),
            _result(f"inner_hermitian[{_label(d)}]", herm, tol, t0),
            _result(f"inner_positive[{_label(d)}]", pos, 0.0, t0),
            _result(f"inner_definite[{_label(d)}]", definite, 0.0, t0),
            _result(f"cauchy_schwarz[{_label(d)}]", cs, 0.0, t0)]


def _random_real_gram(d, n, rng, degree=None):
    w = [[random_element(d, rng, degree, real=True) for _ in range(n)] for _ in range(n)]
    wm = OperatorMatrix.from_elements(w)
    return OperatorMatrix.from_rep(d, np.asarray((wm.adjoint() @ wm).rep), hermitian=True)


def gradient_suite(trials=50, n=4, seed=2, h=1e-2):
    """Directional derivative of the PCA objective against extrapolated central differences."""
    rng = make_rng(seed)
    descs = [AlgebraDescriptor.scalar(), AlgebraDescriptor.function(10)]
    t0 = time.perf_counter()
    errs = []
    for t in range(trials):
        d = descs[t % 2]
        deg = 1 if d.kind != SCALAR else None
        g = _random_real_gram(d, n, rng, deg)
        c = random_vector(d, n, rng, deg, real=True)
        u = random_vector(d, n, rng, deg, real=True)
        lam = float(rng.uniform(0.05, 1.0))
        dd = directional_derivative(g, c, u, lam).rep

        def central(step):
            return (pca_objective(g, c + u * step, lam).rep - pca_objective(g, c - u * step, lam).rep) / (2 * step)

        # f is quartic along the line, so the central-difference error is exactly
        # h^2 f'''(0) / 6 and one Richardson step removes it
        fd = (4 * central(h / 2) - central(h)) / 3
        errs.append(_rel(np.max(np.abs(fd - dd)), np.max(np.abs(dd))))
    return [_result("pca_gradient_fd", errs, 1e-5, t0)]


def random_psd_matrix_gram(m, n, rng):
    d = AlgebraDescriptor.matrix(m)
    x = _cn(rng, (n * m, n * m))
    flat = x @ x.conj().T
    p = flat.reshape(n, m, n, m).transpose(0, 2, 1, 3)
    return OperatorMatrix(d, p, hermitian=True)


def trace_oracle_suite(trials=20, m=2, n=5, seed=3):
    """Reconstruction trace of the trace solver against the flat eigendecomposition."""
    rng = make_rng(seed)
    t0 = time.perf_counter()
    errs = []
    for t in range(trials):
        g = random_psd_matrix_gram(m, n, rng)
        r = 1 + t % (m * n)
        model = fit_pca_trace(g, r)
        got = float(np.trace(reconstruction_error(g, model).payload).real)
        w = np.sort(np.linalg.eigvalsh(flat_gram(g)))[::-1]
        oracle = float(np.sum(w) - np.sum(w[:r]))
        errs.append(_rel(abs(got - oracle), max(abs(oracle), 1.0)))
    return [_result("trace_solver_oracle", errs, 1e-8, t0)]


def random_compact_gram(n, rng, rank=None, descriptor=None):
    """Gram of an integral-operator kernel on random univariate samples.

    With ``rank < n`` the trailing samples repeat earlier ones, so some
    columns are degenerate.
    """
    d = descriptor or AlgebraDescriptor.integral_operator(5)
    k = rank or n
    base = rng.uniform(0.0, 1.0, (k, 4))
    samples = np.concatenate([base, base[rng.integers(0, k, n - k)]]) if k < n else base
    spec = IntegralOperatorKernel(Gaussian(float(rng.uniform(0.5, 2.0))), d)
    return gram(spec, samples)


def qr_suite(trials=50, n=5, seed=4):
    """Orthonormality of ``R_inv^* G R_inv`` and the spectral residual ``||W - QR||``."""
    rng = make_rng(seed)
    t0 = time.perf_counter()
    ortho, resid = [], []
    eps_used = None
    for t in range(trials):
        g = random_compact_gram(n, rng, rank=n - t % 2)
        qr = gram_schmidt_qr(g)
        eps_used = qr.epsilon
        off, idem = qr_orthonormality_defect(qr, g)
        ortho.append(max(off, idem))
        whole, _ = qr_residual(qr, g)
        resid.append(whole / qr.epsilon)
    return [_result("qr_orthonormality", ortho, 1e-8, t0),
            _result(f"qr_residual_over_eps(eps={eps_used:g})", resid, 1.0, t0)]


def periodic_series(period, length, dim=1, seed=5):
    rng = make_rng(seed)
    base = rng.uniform(-1.0, 1.0, (period, dim))
    return np.stack([base[i % period] for i in range(length)])


def koopman_suite(periods=(2, 3), length=7, seed=5):
    """Prediction and mode-decomposition exactness on periodic scalar-kernel series."""
    t0 = time.perf_counter()
    pred, decomp = [], []
    spec = ScalarTimesIdentity(Gaussian(1.0))
    for p in periods:
        xs = periodic_series(p, length, seed=seed + p)
        model = estimate_pf(spec, xs)
        t = model.T
        g = model.gram_full
        for a in range(t + 1):
            for b in range(t + 1):
                pred.append((predict_similarity(model, a, b) - g[a, b]).norm())
        dec = mode_decompose(model, pf_eig1(model))
        for a in range(t + 1):
            for b in range(t + 1):
                decomp.append((dec.invariant_term + dec.residual_fn(a, b) - g[a, b]).norm())
    return [_result("koopman_predict_exact", pred, 1e-6, t0),
            _result("koopman_decomposition", decomp, 1e-8, t0)]


def _random_measure(d, rng, atoms, dim=2):
    pts = rng.standard_normal((atoms, dim))
    return DiscreteMeasure(pts, random_vector(d, atoms, rng))


def kme_suite(trials=50, seed=6):
    """Dirac consistency, A-linearity, mmd(mu, mu) = 0 and the two mmd routes."""
    rng = make_rng(seed)
    t0 = time.perf_counter()
    dirac, lin, self_mmd, routes = [], [], [], []
    for t in range(trials):
        d = [AlgebraDescriptor.scalar(), AlgebraDescriptor.matrix(2), AlgebraDescriptor.matrix(3)][t % 3]
        spec = ScalarTimesIdentity(Gaussian(float(rng.uniform(0.2, 2.0))), d)
        x = rng.standard_normal(2)
        delta = DiscreteMeasure.dirac(d, x)
        kxx = spec.pairwise(spec.prepare(x[None]), spec.prepare(x[None]))[0, 0]
        dirac.append(float(np.max(np.abs(embed_inner(spec, delta, delta).payload - kxx))))
        mu, nu, rho = (_random_measure(d, rng, int(rng.integers(1, 5))) for _ in range(3))
        c = random_element(d, rng)
        lhs = embed_inner(spec, mu.scale(c) + nu, rho)
        rhs = c.adjoint() * embed_inner(spec, mu, rho) + embed_inner(spec, nu, rho)
        lin.append(_rel((lhs - rhs).norm(), max(lhs.norm(), 1.0)))
        self_mmd.append(mmd(spec, mu, mu).norm())
        a, b = mmd(spec, mu, nu), mmd_expanded(spec, mu, nu)
        routes.append(_rel((a - b).norm(), max(a.norm(), 1.0)))
    return [_result("kme_dirac_consistency", dirac, 0.0, t0),
            _result("kme_a_linearity", lin, 1e-9, t0),
            _result("mmd_self_zero", self_mmd, 1e-9, t0),
            _result("mmd_two_routes", routes, 1e-9, t0)]


def impact_suite(trials=20, n=6, m=2, r=3, seed=8, epsilons=(1e-1, 1e-2, 1e-3)):
    """``|| |u| - impact ||`` for the regularized and exact maximizers on matrix measures."""
    rng = make_rng(seed)
    d = AlgebraDescriptor.matrix(m)
    t0 = time.perf_counter()
    bound, exact = [], []
    for _ in range(trials):
        fm = measure_gram(rng.uniform(0.0, 1.0, (n, m, m)), Gaussian(float(rng.uniform(0.5, 2.0))), d)
        est = interaction_fit(fm, random_vector(d, n, rng), r)
        au = abs_u(est)
        for eps in epsilons:
            bound.append((au - interaction_max(est, eps)[1]).norm() / eps)
        exact.append(_rel((au - interaction_max_exact(est)[1]).norm(), max(au.norm(), 1.0)))
    return [_result("impact_bound_over_eps", bound, 1.0, t0),
            _result("impact_exact_branch", exact, 1e-10, t0)]


def random_density(m, rng):
    z = _cn(rng, (m, m))
    r = z @ z.conj().T
    return r / np.trace(r).real


def random_onb(m, rng):
    q, _ = np.linalg.qr(_cn(rng, (m, m)))
    return q.T


def quantum_suite(trials=100, ms=(2, 3, 4), seed=7):
    """``tr <Phi(mu rho1), Phi(mu rho2)> = tr(rho2 rho1^*)``."""
    rng = make_rng(seed)
    t0 = time.perf_counter()
    errs = []
    for m in ms:
        for _ in range(trials):
            lhs, rhs = quantum_inner(random_density(m, rng), random_density(m, rng), random_onb(m, rng))
            errs.append(abs(lhs - rhs))
    return [_result("quantum_trace_identity", errs, 1e-10, t0)]


def selftest(seed=0, trials=100):
    """All property suites; seeds are offset from ``seed`` per suite."""
    results = []
    for i, d in enumerate(suite_descriptors()):
        results += algebra_suite(d, trials, seed + 10 * i)
        results += module_suite(d, trials, seed=seed + 10 * i + 1)
    results += gradient_suite(seed=seed + 100)
    results += trace_oracle_suite(seed=seed + 101)
    results += qr_suite(seed=seed + 102)
    results += koopman_suite(seed=seed + 103)
    results += kme_suite(seed=seed + 104)
    results += impact_suite(seed=seed + 106)
    results += quantum_suite(seed=seed + 105)
    return results
