import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhm.algebra import (AlgebraDescriptor, AlgebraElement, AlgebraMismatch, NotPositive, NotSelfAdjoint,
                          adjoint, element_from_dict, element_to_dict, is_positive, multiply, norm,
                          shifted_inverse, spectral_decompose, sqrt_positive)
from rkhm.checks import algebra_suite, random_element, suite_descriptors

S = AlgebraDescriptor.scalar()
M2 = AlgebraDescriptor.matrix(2)


def el(d, p):
    return AlgebraElement(d, np.asarray(p, dtype=complex))


# descriptors
def test_descriptor_defaults_and_validation():
    f = AlgebraDescriptor.function(10)
    assert f.nodes == 44 and f.payload_shape == (11,)
    io = AlgebraDescriptor.integral_operator(5)
    assert io.payload_shape == (37,) and io.rep_shape == (1, 7, 7)
    with pytest.raises(ValueError):
        AlgebraDescriptor.function(3, nodes=7)
    with pytest.raises(ValueError):
        AlgebraDescriptor.matrix(0)
    with pytest.raises(ValueError):
        AlgebraDescriptor("banana")


def test_quadrature_integrates_polynomials():
    for grid in ("gauss-legendre", "uniform"):
        d = AlgebraDescriptor.function(4, grid=grid, nodes=200 if grid == "uniform" else 0)
        t, w = d.quadrature
        assert np.all(np.diff(t) > 0) and t[0] >= 0 and t[-1] <= 1
        assert abs(np.sum(w * t ** 2) - 1 / 3) < (1e-14 if grid == "gauss-legendre" else 1e-4)


def test_descriptor_dict_round_trip():
    for d in suite_descriptors():
        assert AlgebraDescriptor.from_dict(d.to_dict()) == d


# multiply
def test_multiply_scalar():
    assert multiply(el(S, 2), el(S, 3j)).payload == 6j


def test_multiply_function_t_squared():
    d = AlgebraDescriptor.function(2)
    prod = multiply(el(d, [0, 1, 0]), el(d, [0, 1, 0]))
    assert np.allclose(prod.payload, [0, 0, 1], atol=1e-12)


def test_multiply_integral_constant_kernel():
    d = AlgebraDescriptor.integral_operator(0)
    a = AlgebraElement.integral(d, 0, [[1]])
    sq = a * a
    assert abs(sq.alpha) < 1e-12
    assert np.allclose(sq.kernel, [[1]], atol=1e-12)


def test_multiply_integral_identity_channel():
    d = AlgebraDescriptor.integral_operator(1)
    a = AlgebraElement.integral(d, 2.0, [[1, 0], [0, 0]])
    b = AlgebraElement.integral(d, 3.0, [[0, 1], [0, 0]])
    ab = a * b
    # 6 I + 2 t + 3 * 1 + (1 * t composed over r) = 6 I + (3 + 3 t)
    assert abs(ab.alpha - 6) < 1e-12
    assert np.allclose(ab.kernel, [[3, 3], [0, 0]], atol=1e-10)


def test_multiply_mismatch():
    with pytest.raises(AlgebraMismatch, match="algebra mismatch"):
        multiply(el(S, 1), AlgebraElement.identity(M2))


# adjoint
def test_adjoint_examples():
    assert np.array_equal(adjoint(el(M2, [[0, 1], [0, 0]])).payload, [[0, 0], [1, 0]])
    d = AlgebraDescriptor.function(1)
    assert np.array_equal(adjoint(el(d, [1, 2])).payload, [1, 2])
    io = AlgebraDescriptor.integral_operator(1)
    a = AlgebraElement.integral(io, 1j, [[0, 1j], [2, 0]])
    assert a.adjoint().alpha == -1j
    assert np.array_equal(a.adjoint().kernel, [[0, 2], [-1j, 0]])


@pytest.mark.parametrize("d", suite_descriptors(), ids=str)
def test_adjoint_involution_exact(d, rng):
    for _ in range(10):
        a = random_element(d, rng)
        assert np.array_equal(a.adjoint().adjoint().payload, a.payload)


# norm
def test_norm_examples():
    assert norm(el(S, -3)) == 3
    assert norm(el(M2, np.diag([2, -1]))) == pytest.approx(2, abs=1e-14)
    d = AlgebraDescriptor.function(1, grid="uniform", nodes=11)
    assert norm(el(d, [0, 1])) == pytest.approx(1, abs=1e-14)


def test_norm_integral_rank_one():
    # kernel s t on [0, 1]: operator norm int r^2 dr = 1/3
    d = AlgebraDescriptor.integral_operator(1)
    a = AlgebraElement.integral(d, 0, [[0, 0], [0, 1]])
    assert a.norm() == pytest.approx(1 / 3, abs=1e-12)
    assert AlgebraElement.identity(d).norm() == pytest.approx(1, abs=1e-12)


# positivity
def test_is_positive_examples(rng):
    assert is_positive(el(M2, np.diag([1, 0])), 1e-12)
    d = AlgebraDescriptor.function(1)
    assert not is_positive(el(d, [-0.5, 1]), 1e-12)
    for dd in suite_descriptors():
        b = random_element(dd, rng)
        assert is_positive(b.adjoint() * b, 1e-8)


def test_is_positive_rejects_non_self_adjoint():
    with pytest.raises(NotSelfAdjoint, match="not self-adjoint"):
        is_positive(el(M2, [[0, 1], [0, 0]]), 1e-8)


# spectral decomposition
def test_spectral_matrix_examples():
    sd = spectral_decompose(el(M2, np.diag([3, 1])), 2)
    assert np.allclose(sd.eigenvalues, [3, 1]) and sd.retained_count == 1
    assert spectral_decompose(AlgebraElement.zero(M2), 0.5).retained_count == 0


def test_spectral_integral_rank_one():
    d = AlgebraDescriptor.integral_operator(1)
    sd = spectral_decompose(AlgebraElement.integral(d, 0, [[0, 0], [0, 1]]), 1e-12)
    assert sd.retained_count == 1
    assert sd.eigenvalues[0] == pytest.approx(1 / 3, abs=1e-12)
    # the eigenfunction r is the degree-1 orthonormal-polynomial direction plus a constant;
    # its coordinates must reproduce r / ||r|| = sqrt(3) r under the basis map
    coords = sd.eigenvectors[:, 0]
    mono = d.orthonormal_to_monomial(coords[:-1])
    mono = mono / mono[np.argmax(np.abs(mono))]
    assert np.allclose(mono, [0, 1], atol=1e-10)


def test_spectral_rejects_negative():
    with pytest.raises(NotPositive, match="not positive"):
        spectral_decompose(el(M2, np.diag([1, -1])))


def test_spectral_eigenvectors_orthonormal(rng):
    for d in suite_descriptors():
        b = random_element(d, rng)
        sd = spectral_decompose(b.adjoint() * b)
        v = sd.eigenvectors
        assert np.all(np.diff(sd.eigenvalues) <= 1e-12)
        assert np.allclose(v.conj().T @ v, np.eye(v.shape[1]), atol=1e-10)


# square roots
def test_sqrt_examples(rng):
    assert sqrt_positive(el(S, 4)).payload == pytest.approx(2)
    assert np.allclose(sqrt_positive(el(M2, np.diag([9, 1]))).payload, np.diag([3, 1]))
    z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    p = el(AlgebraDescriptor.matrix(3), z @ z.conj().T)
    root = sqrt_positive(p)
    assert np.max(np.abs((root * root).payload - p.payload)) < 1e-8 * p.norm()
    assert is_positive(root, 1e-10)


def test_sqrt_function_pointwise():
    d = AlgebraDescriptor.function(4)
    a = el(d, [0, 0, 1, 0, 0])            # t^2
    assert np.allclose(sqrt_positive(a).payload, [0, 1, 0, 0, 0], atol=1e-10)


def test_sqrt_integral_identity_plus_kernel():
    d = AlgebraDescriptor.integral_operator(2)
    a = AlgebraElement.integral(d, 4.0, np.zeros((3, 3)))
    r = sqrt_positive(a)
    assert abs(r.alpha - 2) < 1e-12 and np.max(np.abs(r.kernel)) < 1e-12


def test_shifted_inverse_scalar():
    inv = shifted_inverse(el(S, 3), 1.0)
    assert inv.payload == pytest.approx(0.25)
    with pytest.raises(ValueError):
        shifted_inverse(el(S, 3), 0.0)


def test_element_dict_round_trip(rng):
    for d in suite_descriptors():
        a = random_element(d, rng)
        b = element_from_dict(element_to_dict(a))
        assert b.descriptor == d and np.array_equal(b.payload, a.payload)


def test_identity_is_multiplicative_unit(rng):
    for d in suite_descriptors():
        a = random_element(d, rng, degree=d.order // 2 if d.kind == "function" else None)
        one = AlgebraElement.identity(d)
        assert np.max(np.abs((one * a).rep - a.rep)) < 1e-10 * max(a.norm(), 1)


# property suites
@pytest.mark.parametrize("d", suite_descriptors(), ids=str)
def test_algebra_property_suite(d):
    for res in algebra_suite(d, trials=30, seed=11):
        assert res.passed, res.line()


real = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(real, min_size=8, max_size=8), st.lists(real, min_size=8, max_size=8))
def test_matrix_cstar_laws(xs, ys):
    a = el(M2, np.array(xs[:4]).reshape(2, 2) + 1j * np.array(xs[4:]).reshape(2, 2))
    b = el(M2, np.array(ys[:4]).reshape(2, 2) + 1j * np.array(ys[4:]).reshape(2, 2))
    na, nb = a.norm(), b.norm()
    assert abs((a.adjoint() * a).norm() - na ** 2) <= 1e-9 * max(na ** 2, 1)
    assert (a * b).norm() <= na * nb * (1 + 1e-12) + 1e-12
    assert np.array_equal((a * b).adjoint().payload, (b.adjoint() * a.adjoint()).payload) or \
        np.allclose((a * b).adjoint().payload, (b.adjoint() * a.adjoint()).payload, atol=1e-12 * (1 + na * nb))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3))
def test_function_cstar_identity_low_degree(coeffs):
    d = AlgebraDescriptor.function(10)
    p = np.zeros(11)
    p[:3] = coeffs
    a = el(d, p)
    na = a.norm()
    assert abs((a.adjoint() * a).norm() - na ** 2) <= 1e-9 * max(na ** 2, 1)
