import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhm.algebra import AlgebraDescriptor, AlgebraMismatch, is_positive
from rkhm.checks import module_suite, qr_suite, random_compact_gram, random_vector, suite_descriptors
from rkhm.module import (DegenerateVector, InvalidGram, ModuleVector, OperatorMatrix, QrResult, absolute,
                         gram_schmidt_qr, inner, module_norm, normalize, orthonormal_columns, project,
                         qr_orthonormality_defect, qr_residual)

S = AlgebraDescriptor.scalar()
M2 = AlgebraDescriptor.matrix(2)


def svec(values, d=S):
    return ModuleVector(d, np.asarray(values, dtype=complex))


def sgram(rows, d=S):
    return OperatorMatrix(d, np.asarray(rows, dtype=complex), hermitian=True)


# inner products
def test_inner_examples():
    assert inner(svec([1, 0]), svec([0, 1])).payload == 0
    one = ModuleVector.constant(M2, 1)
    assert np.array_equal(inner(one, one).payload, np.eye(2))
    u = ModuleVector(M2, np.array([[[1, 0], [0, 0]]], dtype=complex))
    v = ModuleVector(M2, np.array([[[0, 1], [0, 0]]], dtype=complex))
    assert np.array_equal(inner(u, v).payload, [[0, 1], [0, 0]])


def test_inner_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        inner(svec([1, 2]), svec([1]))
    with pytest.raises(AlgebraMismatch):
        inner(svec([1]), ModuleVector.constant(M2, 1))


def test_vector_requires_entries():
    with pytest.raises(ValueError):
        ModuleVector(S, np.zeros(0, dtype=complex))


# absolute value
def test_absolute_examples(rng):
    assert absolute(svec([3, 4])).payload == pytest.approx(5)
    assert absolute(svec([0, 0])).payload == 0
    for _ in range(10):
        u = random_vector(M2, 3, rng)
        assert abs(absolute(u).norm() ** 2 - inner(u, u).norm()) <= 1e-8 * inner(u, u).norm()


# normalize
def test_normalize_scalar():
    q, bhat, b = normalize(svec([2]), 0.0)
    assert q.payload[0] == pytest.approx(1)
    assert bhat.payload == pytest.approx(0.5) and b.payload == pytest.approx(2)


def test_normalize_matrix_projection():
    qh = ModuleVector(M2, np.diag([1.0, 0.0])[None].astype(complex))
    q, _, b = normalize(qh, 0.1)
    p = inner(q, q).payload
    assert np.allclose(p, np.diag([1, 0]), atol=1e-14)
    assert ((qh - q * b)[0]).norm() <= 0.1


def test_normalize_idempotent_on_normalized(rng):
    u = random_vector(M2, 2, rng)
    q, _, _ = normalize(u, 0.0)
    q2, _, _ = normalize(q, 0.0)
    assert np.allclose(q2.payload, q.payload, atol=1e-12)
    p = inner(q, q).payload
    assert np.allclose(p @ p, p, atol=1e-12)


def test_normalize_degenerate():
    with pytest.raises(DegenerateVector, match="degenerate vector"):
        normalize(svec([1e-3]), 0.01)


# QR
def test_qr_scalar_one():
    qr = gram_schmidt_qr(sgram([[1]]), 0.0)
    assert qr.R.payload[0, 0] == pytest.approx(1) and qr.R_inv.payload[0, 0] == pytest.approx(1)
    assert qr.kept == (True,)


def test_qr_scalar_two_against_classical_gram_schmidt():
    qr = gram_schmidt_qr(sgram([[1, 0.5], [0.5, 1]]), 0.0)
    expected = np.array([-0.5, 1]) / np.sqrt(0.75)
    assert np.allclose(qr.R_inv.payload[:, 1], expected, atol=1e-14)
    # textbook Gram-Schmidt on w1 = e1 and w2 at 60 degrees
    w = np.array([[1, 0.5], [0, np.sqrt(0.75)]])
    q, r = np.linalg.qr(w)
    sign = np.sign(np.diag(r))
    assert np.allclose(qr.R.payload.real, sign[:, None] * r, atol=1e-14)
    assert np.allclose(w @ qr.R_inv.payload.real, q * sign, atol=1e-14)


def test_qr_rank_deficient_masks_column():
    qr = gram_schmidt_qr(sgram([[1, 1], [1, 1]]), 0.01)
    assert qr.kept == (True, False)
    assert np.all(qr.R_inv.payload[:, 1] == 0)
    whole, _ = qr_residual(qr, sgram([[1, 1], [1, 1]]))
    assert whole <= 0.01


def test_qr_invalid_gram():
    with pytest.raises(InvalidGram, match="invalid Gram matrix"):
        gram_schmidt_qr(sgram([[1, 2], [2, 1]]), 0.0)
    with pytest.raises(InvalidGram):
        gram_schmidt_qr(OperatorMatrix(S, np.array([[1, 1], [0, 1]], dtype=complex)), 0.0)


def test_qr_r_upper_triangular(rng):
    g = random_compact_gram(4, rng)
    qr = gram_schmidt_qr(g)
    rep = qr.R.rep
    for i in range(4):
        for j in range(i):
            assert np.max(np.abs(rep[i, j])) == 0
    off, idem = qr_orthonormality_defect(qr, g)
    assert off < 1e-8 and idem < 1e-8


def test_qr_matrix_algebra(rng):
    z = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    flat = z @ z.conj().T
    g = OperatorMatrix(M2, flat.reshape(3, 2, 3, 2).transpose(0, 2, 1, 3), hermitian=True)
    qr = gram_schmidt_qr(g, 1e-6)
    off, idem = qr_orthonormality_defect(qr, g)
    assert off < 1e-10 and idem < 1e-10
    assert qr_residual(qr, g)[0] <= 1e-6


def test_qr_suite_small():
    for res in qr_suite(trials=6, seed=21):
        assert res.passed, res.line()


def test_qr_dict_round_trip():
    g = sgram([[1, 0.5], [0.5, 1]])
    qr = gram_schmidt_qr(g, 0.0)
    back = QrResult.from_dict(qr.to_dict())
    assert back.kept == qr.kept and back.epsilon == qr.epsilon
    assert np.array_equal(back.R_inv.payload, qr.R_inv.payload)


# projection
def test_project_in_span_is_identity(rng):
    g = sgram([[1, 0.2], [0.2, 1]])
    qr = gram_schmidt_qr(g, 0.0)
    u = svec(rng.standard_normal(2))
    assert np.allclose(project(u, qr, g).payload, u.payload, atol=1e-10)


def test_project_orthogonal_is_zero():
    # w1 = e1, w2 = e2 with the second column masked: the span is e1 only
    g = sgram([[1, 0], [0, 1e-8]])
    qr = gram_schmidt_qr(g, 1e-3)
    assert qr.kept == (True, False)
    u = svec([0, 1])
    assert np.max(np.abs(project(u, qr, g).payload)) < 1e-12


def test_project_minimises_distance(rng):
    d = M2
    z = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
    # three feature columns in C^{8 x 2}; W has rank 4 < 6
    w = z @ (rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6)))
    flat = w.conj().T @ w
    g = OperatorMatrix(d, flat.reshape(3, 2, 3, 2).transpose(0, 2, 1, 3), hermitian=True)
    # span of the first two features only
    sub = g.block(range(2), range(2))
    qr = gram_schmidt_qr(sub, 1e-9)
    for _ in range(5):
        u = random_vector(d, 2, rng)
        pu = project(u, qr, sub)
        v = random_vector(d, 2, rng)
        du = u - v
        dp = u - pu
        gap = inner(du, sub @ du) - inner(dp, sub @ dp)
        assert is_positive(gap, 1e-8 * max(gap.norm(), 1))


@pytest.mark.parametrize("d", suite_descriptors(), ids=str)
def test_module_property_suite(d):
    for res in module_suite(d, trials=30, seed=5):
        assert res.passed, res.line()


def test_orthonormal_columns_are_projections(rng):
    g = random_compact_gram(4, rng, rank=3)
    qr = gram_schmidt_qr(g)
    qq = orthonormal_columns(qr, g)
    for j in range(4):
        p = qq[j, j].rep
        assert np.max(np.abs(p @ p - p)) < 1e-8


def test_operator_matrix_hermitian_is_exact(rng):
    p = rng.standard_normal((3, 3, 2, 2)) + 1j * rng.standard_normal((3, 3, 2, 2))
    g = OperatorMatrix(M2, p, hermitian=True)
    for i in range(3):
        for j in range(3):
            assert np.array_equal(g[j, i].payload, g[i, j].adjoint().payload)


def test_operator_matrix_dict_round_trip(rng):
    p = rng.standard_normal((2, 2, 2, 2)) + 0j
    g = OperatorMatrix(M2, p)
    back = OperatorMatrix.from_dict(g.to_dict())
    assert np.array_equal(back.payload, g.payload) and back.hermitian is False
    v = random_vector(M2, 3, rng)
    assert np.array_equal(ModuleVector.from_dict(v.to_dict()).payload, v.payload)


pair = st.tuples(st.floats(-5, 5, allow_nan=False), st.floats(-5, 5, allow_nan=False))


@settings(max_examples=80, deadline=None)
@given(st.lists(pair, min_size=3, max_size=3), st.lists(pair, min_size=3, max_size=3))
def test_scalar_cauchy_schwarz(us, vs):
    u = svec([a + 1j * b for a, b in us])
    v = svec([a + 1j * b for a, b in vs])
    uv = inner(u, v)
    lhs = module_norm(u) ** 2 * inner(v, v).payload.real - abs(uv.payload) ** 2
    assert lhs >= -1e-9 * max(1.0, module_norm(u) ** 2 * module_norm(v) ** 2)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 0.5))
def test_scalar_qr_two_columns(cos_angle, eps):
    g = sgram([[1, cos_angle], [cos_angle, 1]])
    qr = gram_schmidt_qr(g, eps)
    whole, _ = qr_residual(qr, g)
    assert whole <= eps + 1e-12
    off, idem = qr_orthonormality_defect(qr, g)
    assert off < 1e-12 and idem < 1e-12
