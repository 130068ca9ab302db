"""Concrete C*-algebras and their elements.

Four algebras are supported: complex scalars, ``m x m`` matrices, a truncated
function algebra on ``[0, 1]`` and a truncated algebra of operators
``alpha * I + (integral operator with polynomial kernel)`` on ``L2([0, 1])``.

Every algebra has a *payload* (the stored coefficients) and a *representation*
(``rep``): a stack of ``B`` square blocks of size ``r`` in which the product is
plain matrix multiplication, the involution is the conjugate transpose and the
norm is the largest singular value over blocks.

* scalar: payload ``()``, rep ``(1, 1, 1)``
* matrix: payload ``(m, m)``, rep ``(1, m, m)``
* function: payload ``(N+1,)`` basis coefficients, rep ``(Q, 1, 1)`` grid values
* integral operator: payload ``(1 + (N+1)**2,)`` packing ``alpha`` and the
  monomial kernel coefficients ``H``, rep ``(1, N+2, N+2)``.  The leading
  ``(N+1)`` block is ``alpha*I + L.T @ H @ L`` in an orthonormal polynomial
  basis (``M = L @ L.T`` is the monomial Gram matrix ``1/(a+b+1)``); the last
  diagonal entry is ``alpha`` acting on the orthogonal complement of the
  polynomials.  Kernel composition is exact in this form.

Only the function algebra loses information when leaving the representation
(least-squares refit onto the basis); the other three are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SCALAR = "scalar"
MATRIX = "matrix"
FUNCTION = "function"
INTEGRAL = "integral_operator"

_KIND_NAMES = {
    SCALAR: "Scalar",
    MATRIX: "Matrix",
    FUNCTION: "Function",
    INTEGRAL: "IntegralOperator",
}


class AlgebraError(ValueError):
    """Base class for algebra-level failures."""


class AlgebraMismatch(AlgebraError):
    def __init__(self, msg="algebra mismatch"):
        super().__init__(msg)


class NotSelfAdjoint(AlgebraError):
    def __init__(self, msg="not self-adjoint"):
        super().__init__(msg)


class NotPositive(AlgebraError):
    def __init__(self, msg="not positive"):
        super().__init__(msg)


def _parse_kind(kind):
    key = str(kind).strip().lower().replace("-", "").replace("_", "")
    for k in _KIND_NAMES:
        if key == k.replace("_", "") or key == _KIND_NAMES[k].lower():
            return k
    raise ValueError(f"unknown algebra kind {kind!r}")


@dataclass(frozen=True)
class AlgebraDescriptor:
    """Which C*-algebra a value lives in, plus its truncation parameters.

    Use the constructors :meth:`scalar`, :meth:`matrix`, :meth:`function` and
    :meth:`integral_operator` rather than the raw fields.
    """

    kind: str
    size: int = 1
    order: int = 0
    basis: str = "polynomial"
    grid: str = "gauss-legendre"
    nodes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", _parse_kind(self.kind))
        if self.size < 1:
            raise ValueError("matrix size must be >= 1")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.kind in (FUNCTION, INTEGRAL):
            if self.nodes == 0:
                object.__setattr__(self, "nodes", 4 * (self.order + 1))
            if self.nodes < 2 * (self.order + 1):
                raise ValueError("need at least 2(N+1) grid nodes")
            if self.grid not in ("gauss-legendre", "uniform"):
                raise ValueError(f"unknown grid {self.grid!r}")
        if self.kind == FUNCTION and self.basis not in ("polynomial", "fourier"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.kind == INTEGRAL and self.basis != "polynomial":
            raise ValueError("integral operator kernels use the polynomial basis")
        if self.kind != MATRIX and self.size != 1:
            raise ValueError("size only applies to matrix algebras")

    # constructors
    @classmethod
    def scalar(cls):
        return cls(SCALAR)

    @classmethod
    def matrix(cls, m):
        return cls(MATRIX, size=int(m))

    @classmethod
    def function(cls, order=10, basis="polynomial", grid="gauss-legendre", nodes=0):
        return cls(FUNCTION, order=int(order), basis=basis, grid=grid, nodes=int(nodes or 0))

    @classmethod
    def integral_operator(cls, order=5, grid="gauss-legendre", nodes=0):
        return cls(INTEGRAL, order=int(order), grid=grid, nodes=int(nodes or 0))

    # structural facts
    @property
    def commutative(self):
        return self.kind in (SCALAR, FUNCTION) or (self.kind == MATRIX and self.size == 1)

    @property
    def exact(self):
        """False when leaving the representation loses information."""
        return self.kind != FUNCTION

    @property
    def payload_shape(self):
        if self.kind == SCALAR:
            return ()
        if self.kind == MATRIX:
            return (self.size, self.size)
        if self.kind == FUNCTION:
            return (self.order + 1,)
        return (1 + (self.order + 1) ** 2,)

    @property
    def rep_shape(self):
        if self.kind == SCALAR:
            return (1, 1, 1)
        if self.kind == MATRIX:
            return (1, self.size, self.size)
        if self.kind == FUNCTION:
            return (self.nodes, 1, 1)
        return (1, self.order + 2, self.order + 2)

    def __str__(self):
        name = _KIND_NAMES[self.kind]
        if self.kind == MATRIX:
            return f"Matrix({self.size})"
        if self.kind == FUNCTION:
            return f"Function({self.basis}, N={self.order}, Q={self.nodes})"
        if self.kind == INTEGRAL:
            return f"IntegralOperator(N={self.order}, Q={self.nodes})"
        return name

    # quadrature and bases
    @cached_property
    def quadrature(self):
        """Grid nodes on [0, 1] and matching quadrature weights."""
        q = self.nodes
        if self.grid == "uniform":
            t = np.linspace(0.0, 1.0, q)
            w = np.full(q, 1.0 / (q - 1))
            w[[0, -1]] *= 0.5
        else:
            x, w = np.polynomial.legendre.leggauss(q)
            t, w = (x + 1) / 2, w / 2
        t.setflags(write=False)
        w.setflags(write=False)
        return t, w

    def evaluate_basis(self, t):
        """Basis functions at points ``t``; shape ``t.shape + (N+1,)``."""
        t = np.asarray(t, dtype=float)
        n1 = self.order + 1
        if self.basis == "polynomial":
            return t[..., None] ** np.arange(n1)
        out = np.empty(t.shape + (n1,))
        out[..., 0] = 1.0
        for j in range(1, n1):
            k = (j + 1) // 2
            out[..., j] = np.cos(2 * np.pi * k * t) if j % 2 else np.sin(2 * np.pi * k * t)
        return out

    @cached_property
    def vandermonde(self):
        v = self.evaluate_basis(self.quadrature[0])
        v.setflags(write=False)
        return v

    @cached_property
    def fitter(self):
        """Weighted least-squares map from grid values to coefficients."""
        sw = np.sqrt(self.quadrature[1])
        p = np.linalg.pinv(sw[:, None] * self.vandermonde) * sw[None, :]
        p.setflags(write=False)
        return p

    @cached_property
    def _cholesky(self):
        a = np.arange(self.order + 1)
        gram = 1.0 / (a[:, None] + a[None, :] + 1.0)
        low = np.linalg.cholesky(gram)
        inv = np.linalg.inv(low)
        low.setflags(write=False)
        inv.setflags(write=False)
        return low, inv

    # payload <-> representation
    def to_rep(self, payload):
        p = np.asarray(payload, dtype=complex)
        lead = p.shape[: p.ndim - len(self.payload_shape)]
        if self.kind == SCALAR:
            return p[..., None, None, None]
        if self.kind == MATRIX:
            return p[..., None, :, :]
        if self.kind == FUNCTION:
            return (p @ self.vandermonde.T)[..., None, None]
        n1 = self.order + 1
        low, _ = self._cholesky
        alpha = p[..., 0]
        h = p[..., 1:].reshape(lead + (n1, n1))
        rep = np.zeros(lead + (1, n1 + 1, n1 + 1), dtype=complex)
        rep[..., 0, :n1, :n1] = low.T @ h @ low + alpha[..., None, None] * np.eye(n1)
        rep[..., 0, n1, n1] = alpha
        return rep

    def from_rep(self, rep):
        rep = np.asarray(rep, dtype=complex)
        if self.kind == SCALAR:
            return rep[..., 0, 0, 0].copy()
        if self.kind == MATRIX:
            return rep[..., 0, :, :].copy()
        if self.kind == FUNCTION:
            return rep[..., 0, 0] @ self.fitter.T
        n1 = self.order + 1
        _, inv = self._cholesky
        alpha = rep[..., 0, n1, n1]
        a = rep[..., 0, :n1, :n1] - alpha[..., None, None] * np.eye(n1)
        h = inv.T @ a @ inv
        lead = rep.shape[:-3]
        return np.concatenate([alpha[..., None], h.reshape(lead + (n1 * n1,))], axis=-1)

    def clean_rep(self, rep):
        """Copy of ``rep`` with the (structurally zero) cross terms between the
        integral-operator block and the complement channel cleared."""
        out = np.array(rep, dtype=complex)
        if self.kind == INTEGRAL:
            n1 = self.order + 1
            out[..., :n1, n1] = 0
            out[..., n1, :n1] = 0
        return out

    def rep_identity(self):
        b, r, _ = self.rep_shape
        return np.broadcast_to(np.eye(r, dtype=complex), (b, r, r)).copy()

    def rep_eigh(self, rep):
        """Eigen-decomposition of a Hermitian rep, blockwise.

        Returns eigenvalues ``(..., B, r)`` and eigenvectors ``(..., B, r, r)``.
        The integral-operator rep is split into its polynomial block and the
        complement channel so degenerate eigenvalues never mix the two.
        """
        h = 0.5 * (rep + np.conj(np.swapaxes(rep, -1, -2)))
        if self.kind != INTEGRAL:
            return np.linalg.eigh(h)
        n1 = self.order + 1
        w_top, v_top = np.linalg.eigh(h[..., :n1, :n1])
        w = np.concatenate([w_top, h[..., n1, n1, None].real], axis=-1)
        v = np.zeros(h.shape, dtype=complex)
        v[..., :n1, :n1] = v_top
        v[..., n1, n1] = 1.0
        return w, v

    def rep_apply(self, rep, fn):
        """Spectral calculus ``fn(rep)`` for a Hermitian rep; ``fn`` acts on real arrays."""
        w, v = self.rep_eigh(rep)
        fw = np.asarray(fn(w), dtype=complex)
        return (v * fw[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))

    # integral-operator helpers
    def orthonormal_to_monomial(self, coords):
        """Monomial coefficients of the polynomial with orthonormal-basis coordinates ``coords``."""
        if self.kind != INTEGRAL:
            raise AlgebraError("only defined for integral operator algebras")
        _, inv = self._cholesky
        return np.asarray(coords)[..., : self.order + 1] @ inv

    def to_dict(self):
        d = {"kind": _KIND_NAMES[self.kind]}
        if self.kind == MATRIX:
            d["m"] = self.size
        if self.kind in (FUNCTION, INTEGRAL):
            d.update(order=self.order, grid=self.grid, nodes=self.nodes)
        if self.kind == FUNCTION:
            d["basis"] = self.basis
        return d

    @classmethod
    def from_dict(cls, d):
        kind = _parse_kind(d["kind"])
        if kind == SCALAR:
            return cls.scalar()
        if kind == MATRIX:
            return cls.matrix(int(d["m"]))
        kw = dict(order=int(d.get("order", 10 if kind == FUNCTION else 5)),
                  grid=str(d.get("grid", "gauss-legendre")).lower(),
                  nodes=int(d.get("nodes", 0)))
        if kind == FUNCTION:
            return cls.function(basis=str(d.get("basis", "polynomial")).lower(), **kw)
        return cls.integral_operator(**kw)


def _frozen(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Immutable value of a C*-algebra.  Arithmetic operators are overloaded."""

    descriptor: AlgebraDescriptor
    payload: np.ndarray = field(repr=False)
    # exact representation kept alongside the payload for integral operators,
    # whose payload round trip goes through the ill-conditioned monomial basis
    _rep: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        p = _frozen(self.payload)
        if p.shape != self.descriptor.payload_shape:
            raise ValueError(
                f"payload shape {p.shape} does not match {self.descriptor} "
                f"(expected {self.descriptor.payload_shape})")
        object.__setattr__(self, "payload", p)

    @classmethod
    def from_rep(cls, descriptor, rep):
        rep = np.asarray(rep, dtype=complex)
        if descriptor.kind != INTEGRAL:
            return cls(descriptor, descriptor.from_rep(rep))
        clean = descriptor.clean_rep(rep)
        return cls(descriptor, descriptor.from_rep(clean), _frozen(clean))

    @classmethod
    def identity(cls, descriptor):
        if descriptor.kind == FUNCTION:
            # both bases start with the constant function, so skip the lossy refit
            p = np.zeros(descriptor.payload_shape, dtype=complex)
            p[0] = 1.0
            return cls(descriptor, p)
        return cls.from_rep(descriptor, descriptor.rep_identity())

    @classmethod
    def zero(cls, descriptor):
        return cls(descriptor, np.zeros(descriptor.payload_shape, dtype=complex))

    @classmethod
    def scalar_multiple(cls, descriptor, value):
        return cls.identity(descriptor) * complex(value)

    @classmethod
    def integral(cls, descriptor, alpha, kernel):
        """Integral-operator element ``alpha * I + (kernel sum H[j, l] s**j t**l)``."""
        if descriptor.kind != INTEGRAL:
            raise AlgebraMismatch()
        h = np.asarray(kernel, dtype=complex).reshape(-1)
        return cls(descriptor, np.concatenate([[complex(alpha)], h]))

    @property
    def rep(self):
        if self._rep is not None:
            return np.array(self._rep)
        return self.descriptor.to_rep(self.payload)

    @property
    def alpha(self):
        if self.descriptor.kind != INTEGRAL:
            raise AlgebraError("identity channel only exists for integral operators")
        return self.payload[0]

    @property
    def kernel(self):
        if self.descriptor.kind != INTEGRAL:
            raise AlgebraError("kernel only exists for integral operators")
        n1 = self.descriptor.order + 1
        return self.payload[1:].reshape(n1, n1)

    def values(self, t=None):
        """Function values on the grid (or at ``t``)."""
        if self.descriptor.kind != FUNCTION:
            raise AlgebraError("values only exist for function algebras")
        if t is None:
            return self.payload @ self.descriptor.vandermonde.T
        return self.descriptor.evaluate_basis(t) @ self.payload

    def kernel_values(self, s, t):
        """Integral kernel evaluated on the tensor grid ``s x t`` (identity channel excluded)."""
        d = self.descriptor
        return d.evaluate_basis(s) @ self.kernel @ d.evaluate_basis(t).T

    def adjoint(self):
        return adjoint(self)

    def norm(self):
        return norm(self)

    def _coerce(self, other):
        if isinstance(other, AlgebraElement):
            if other.descriptor != self.descriptor:
                raise AlgebraMismatch()
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            o = AlgebraElement.scalar_multiple(self.descriptor, other)
        if self._rep is not None or o._rep is not None:
            return AlgebraElement.from_rep(self.descriptor, self.rep + o.rep)
        return AlgebraElement(self.descriptor, self.payload + o.payload)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self._scaled(-1.0)

    def _scaled(self, c):
        rep = None if self._rep is None else _frozen(self._rep * c)
        return AlgebraElement(self.descriptor, self.payload * c, rep)

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return multiply(self, other)
        return self._scaled(complex(other))

    def __rmul__(self, other):
        return self._scaled(complex(other))

    def __truediv__(self, other):
        return self._scaled(1.0 / complex(other))

    def allclose(self, other, atol=1e-10):
        return self.descriptor == other.descriptor and bool(
            np.max(np.abs(self.payload - other.payload), initial=0.0) <= atol)

    def __repr__(self):
        return f"AlgebraElement({self.descriptor}, {np.array2string(self.payload, precision=4)})"


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues (descending), orthonormal eigenvector columns, retained count.

    Eigenvectors live in the discretization space: ``C^m`` for matrices, grid
    indicator directions for functions, orthonormal-polynomial coordinates plus
    one complement coordinate for integral operators.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    retained_count: int


def _check_same(a, b):
    if a.descriptor != b.descriptor:
        raise AlgebraMismatch()


def multiply(a, b):
    _check_same(a, b)
    d = a.descriptor
    if d.kind == SCALAR:
        return AlgebraElement(d, a.payload * b.payload)
    if d.kind == MATRIX:
        return AlgebraElement(d, a.payload @ b.payload)
    return AlgebraElement.from_rep(d, a.rep @ b.rep)


def adjoint(a):
    d = a.descriptor
    p = a.payload
    if d.kind == MATRIX:
        return AlgebraElement(d, np.conj(p.T))
    if d.kind == INTEGRAL:
        if a._rep is not None:
            return AlgebraElement.from_rep(d, np.conj(np.swapaxes(a._rep, -1, -2)))
        n1 = d.order + 1
        h = np.conj(p[1:].reshape(n1, n1).T)
        return AlgebraElement(d, np.concatenate([[np.conj(p[0])], h.reshape(-1)]))
    # scalar, and function with a real basis (Fourier sines/cosines are real too)
    return AlgebraElement(d, np.conj(p))


def rep_norm(rep):
    """Largest singular value over blocks, batched over leading axes."""
    if rep.shape[-1] == 1:
        return np.max(np.abs(rep[..., 0, 0]), axis=-1)
    return np.max(np.linalg.norm(rep, ord=2, axis=(-2, -1)), axis=-1)


def norm(a):
    return float(rep_norm(a.rep))


def _hermitian_defect(rep):
    return float(np.max(np.abs(rep - np.conj(np.swapaxes(rep, -1, -2)))))


def is_positive(a, tol=1e-8):
    """Whether ``a`` is positive, judged on its (discretized) spectrum."""
    rep = a.rep
    if _hermitian_defect(rep) > max(tol, 0.0) * max(1.0, float(rep_norm(rep))):
        raise NotSelfAdjoint()
    w, _ = a.descriptor.rep_eigh(rep)
    return bool(w.min() >= -tol)


def spectral_decompose(a, threshold=0.0):
    d = a.descriptor
    rep = a.rep
    scale = max(1.0, float(rep_norm(rep)))
    if _hermitian_defect(rep) > 1e-8 * scale:
        raise NotSelfAdjoint()
    w, v = d.rep_eigh(rep)
    if w.min() < -1e-8 * scale:
        raise NotPositive()
    nb, r, _ = d.rep_shape
    vals = w.reshape(-1)
    vecs = np.zeros((nb * r, nb * r), dtype=complex)
    for b in range(nb):
        vecs[b * r:(b + 1) * r, b * r:(b + 1) * r] = v[b]
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    return SpectralData(vals, vecs[:, order], int(np.sum(vals > threshold)))


def apply_spectral(a, fn):
    """``fn(a)`` for self-adjoint ``a`` via its spectral decomposition."""
    rep = a.rep
    if _hermitian_defect(rep) > 1e-8 * max(1.0, float(rep_norm(rep))):
        raise NotSelfAdjoint()
    return AlgebraElement.from_rep(a.descriptor, a.descriptor.rep_apply(rep, fn))


def _check_positive_rep(descriptor, rep):
    w, _ = descriptor.rep_eigh(rep)
    if w.min() < -1e-8 * max(1.0, float(np.max(np.abs(w)))):
        raise NotPositive()


def rep_sqrt(descriptor, rep):
    return descriptor.rep_apply(rep, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def sqrt_positive(a):
    d = a.descriptor
    rep = a.rep
    if _hermitian_defect(rep) > 1e-8 * max(1.0, float(rep_norm(rep))):
        raise NotSelfAdjoint()
    _check_positive_rep(d, rep)
    return AlgebraElement.from_rep(d, rep_sqrt(d, rep))


def shifted_inverse(a, epsilon):
    """``(a + epsilon * 1)^-1`` for positive ``a`` and ``epsilon > 0``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d = a.descriptor
    _check_positive_rep(d, a.rep)
    return apply_spectral(a, lambda w: 1.0 / (np.clip(w, 0.0, None) + epsilon))


# JSON
def _pairs(arr):
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _unpairs(obj):
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ValueError("complex numbers must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def element_to_dict(a):
    d = a.descriptor
    if d.kind == INTEGRAL:
        payload = {"alpha": _pairs(a.alpha), "kernel": _pairs(a.kernel)}
    else:
        payload = _pairs(a.payload)
    return {"descriptor": d.to_dict(), "payload": payload}


def element_from_dict(obj, descriptor=None):
    d = descriptor or AlgebraDescriptor.from_dict(obj["descriptor"])
    p = obj["payload"]
    if d.kind == INTEGRAL:
        return AlgebraElement.integral(d, _unpairs(p["alpha"]), _unpairs(p["kernel"]))
    return AlgebraElement(d, _unpairs(p))
