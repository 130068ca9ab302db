import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhm.algebra import AlgebraDescriptor, AlgebraElement
from rkhm.checks import random_vector
from rkhm.kernels import (DiagonalMatrix, FunctionalMoment, Gaussian, IncompatibleSample, IntegralOperatorKernel,
                          KernelNotPSD, Laplacian, PointwiseFunction, QuantumRankOne, ScalarTimesIdentity,
                          eval_kernel, gram, kernel_from_dict, kernel_to_dict, psd_diagnostic, rkhm_eval)
from rkhm.module import ModuleVector, OperatorMatrix, matvec

FN = AlgebraDescriptor.function(6)
IO = AlgebraDescriptor.integral_operator(3)


def specs_and_samples(rng):
    """One kernel per variant with a matching random sample generator."""
    return [
        (ScalarTimesIdentity(Gaussian(0.7)), lambda n: rng.standard_normal((n, 2))),
        (ScalarTimesIdentity(Laplacian(0.5), AlgebraDescriptor.matrix(2)), lambda n: rng.standard_normal((n, 3))),
        (DiagonalMatrix((Gaussian(1.0), Laplacian(2.0))), lambda n: rng.standard_normal((n, 2))),
        (FunctionalMoment.on_uniform_grid((5, 5), FN), lambda n: rng.standard_normal((n, 25))),
        (PointwiseFunction(Gaussian(1.0), FN), lambda n: np.pad(rng.uniform(-1, 1, (n, 3)), ((0, 0), (0, 4)))),
        (IntegralOperatorKernel(Gaussian(1.0), IO), lambda n: rng.uniform(0, 1, (n, 3))),
        (QuantumRankOne(2), lambda n: rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))),
    ]


def test_scalar_gaussian_on_diagonal_is_identity():
    for d in (AlgebraDescriptor.scalar(), AlgebraDescriptor.matrix(3), IO):
        k = eval_kernel(ScalarTimesIdentity(Gaussian(1.0), d), [0.3, 0.1], [0.3, 0.1])
        assert np.max(np.abs(k.rep - AlgebraElement.identity(d).rep)) < 1e-12


def test_functional_moment_zero_function_is_t_squared():
    spec = FunctionalMoment.on_uniform_grid((11,), AlgebraDescriptor.function(4))
    k = eval_kernel(spec, np.zeros(11), np.zeros(11))
    assert np.allclose(k.payload, [0, 0, 1, 0, 0], atol=1e-15)


def test_functional_moment_constant_functions():
    # x = a, y = b on [0, 1]: int (t - a)(t - b) ds = t^2 - (a + b) t + a b
    spec = FunctionalMoment.on_uniform_grid((4, 4), FN)
    k = eval_kernel(spec, np.full(16, 2.0), np.full(16, -1.0))
    assert np.allclose(k.payload[:3], [-2, -1, 1], atol=1e-14)
    assert np.all(k.payload[3:] == 0)


def test_functional_moment_needs_degree_two():
    with pytest.raises(IncompatibleSample):
        FunctionalMoment(np.ones(3), AlgebraDescriptor.function(1))
    with pytest.raises(IncompatibleSample):
        FunctionalMoment.on_uniform_grid((3,), FN).prepare(np.zeros((1, 4)))


def test_pointwise_function_constant_samples():
    spec = PointwiseFunction(Gaussian(1.0), FN)
    # constant functions 0 and 1 give the constant e^{-1}
    x = np.zeros(7)
    y = np.zeros(7)
    y[0] = 1.0
    k = eval_kernel(spec, x, y)
    assert np.allclose(k.values(), np.exp(-1.0), atol=1e-12)


def test_integral_operator_kernel_constant_samples():
    spec = IntegralOperatorKernel(Gaussian(1.0), IO)
    k = eval_kernel(spec, [0.0, 0.0], [1.0, 0.0])
    assert k.alpha == 0
    grid = np.linspace(0, 1, 5)
    assert np.allclose(k.kernel_values(grid, grid), np.exp(-1.0), atol=1e-12)


def test_integral_operator_kernel_requires_operator_algebra():
    with pytest.raises(IncompatibleSample):
        IntegralOperatorKernel(Gaussian(), FN)
    with pytest.raises(IncompatibleSample):
        PointwiseFunction(Gaussian(), IO)


def test_diagonal_matrix_kernel():
    k = eval_kernel(DiagonalMatrix((Gaussian(1.0), Laplacian(1.0))), [0.0], [2.0])
    assert np.allclose(k.payload, np.diag([np.exp(-4), np.exp(-2)]))


def test_quantum_rank_one_kernel():
    a = np.array([1, 0], dtype=complex)
    b = np.array([1, 1], dtype=complex) / np.sqrt(2)
    k = eval_kernel(QuantumRankOne(2), a, b)
    assert np.allclose(k.payload, np.outer(a, a.conj()) @ np.outer(b, b.conj()))


def test_hermitian_symmetry_all_variants(rng):
    for spec, draw in specs_and_samples(rng):
        x, y = draw(2)
        kxy = eval_kernel(spec, x, y)
        kyx = eval_kernel(spec, y, x)
        assert np.array_equal(kxy.payload, kyx.adjoint().payload)


def test_gram_examples():
    spec = ScalarTimesIdentity(Gaussian(1.0))
    g1 = gram(spec, np.array([[0.5]]))
    assert g1.shape == (1, 1) and g1[0, 0].payload == 1
    g = gram(spec, np.array([[0.0], [1.0]]))
    assert np.allclose(g.payload, [[1, np.exp(-1)], [np.exp(-1), 1]], atol=1e-15)
    same = gram(spec, np.array([[0.2], [0.2]]))
    assert np.all(same.payload == same.payload[0, 0])


def test_gram_psd_all_variants(rng):
    for spec, draw in specs_and_samples(rng):
        g = gram(spec, draw(5))
        assert g.hermitian and psd_diagnostic(g) <= 1e-6


def test_gram_psd_diagnostic_rejects_indefinite():
    d = AlgebraDescriptor.scalar()
    bad = OperatorMatrix(d, np.array([[1, 2], [2, 1]], dtype=complex), hermitian=True)
    with pytest.raises(KernelNotPSD, match="kernel not PSD at given truncation"):
        psd_diagnostic(bad)


def test_rkhm_eval_examples(rng):
    for spec, draw in specs_and_samples(rng):
        d = spec.descriptor
        basis = draw(4)
        e1 = ModuleVector.basis_vector(d, 4, 0)
        k11 = eval_kernel(spec, basis[0], basis[0])
        assert np.max(np.abs(rkhm_eval(spec, basis, e1, basis[0]).rep - k11.rep)) < 1e-10
        zero = rkhm_eval(spec, basis, ModuleVector.zeros(d, 4), basis[1])
        assert np.max(np.abs(zero.rep)) == 0
        c = random_vector(d, 4, rng, degree=0 if d.kind == "function" else None)
        gc = matvec(gram(spec, basis), c)
        tol = 1e-10 if d.exact else 1e-6
        for j in range(4):
            got = rkhm_eval(spec, basis, c, basis[j])
            assert np.max(np.abs(got.rep - gc[j].rep)) <= tol * max(1.0, gc[j].norm())


def test_rkhm_eval_length_mismatch(rng):
    spec = ScalarTimesIdentity(Gaussian())
    with pytest.raises(ValueError, match="length mismatch"):
        rkhm_eval(spec, rng.standard_normal((3, 1)), ModuleVector.zeros(spec.descriptor, 2), [0.0])


def test_kernel_dict_round_trip(rng):
    for spec, _ in specs_and_samples(rng):
        back = kernel_from_dict(kernel_to_dict(spec))
        assert type(back) is type(spec) and back.descriptor == spec.descriptor


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 5.0), st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4))
def test_scalar_gaussian_gram_psd(gamma, xs):
    g = gram(ScalarTimesIdentity(Gaussian(gamma)), np.asarray(xs)[:, None])
    w = np.linalg.eigvalsh(g.payload)
    assert w.min() >= -1e-12
