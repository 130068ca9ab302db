"""Algebra-valued positive definite kernels, Gram matrices and representer evaluation.

Samples are numpy arrays with the sample index first:

* points: ``(n, d)`` (a 1-d array is read as ``d = 1``)
* univariate functions: ``(n, K)`` or ``(n, channels, K)`` basis coefficients
* functions sampled on an input grid: ``(n, P)`` values (``P`` grid points)
* bivariate functions: ``(n, K, K)`` monomial coefficients ``x(s, t) = sum eta[j, l] s**j t**l``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraDescriptor, AlgebraElement, AlgebraError, FUNCTION, INTEGRAL
from .module import OperatorMatrix, r_inner, r_matvec, r_opnorm


class KernelNotPSD(AlgebraError):
    def __init__(self, msg="kernel not PSD at given truncation"):
        super().__init__(msg)


class IncompatibleSample(AlgebraError):
    pass


@dataclass(frozen=True)
class Gaussian:
    gamma: float = 1.0

    def __call__(self, x, y):
        diff = np.asarray(x) - np.asarray(y)
        return np.exp(-self.gamma * np.sum(np.abs(diff) ** 2, axis=-1))


@dataclass(frozen=True)
class Laplacian:
    """``exp(-gamma * ||x - y||_1)``."""

    gamma: float = 1.0

    def __call__(self, x, y):
        diff = np.asarray(x) - np.asarray(y)
        return np.exp(-self.gamma * np.sum(np.abs(diff), axis=-1))


def scalar_kernel_from_dict(d):
    name = str(d.get("name", d.get("type", "gaussian"))).lower()
    gamma = float(d.get("gamma", 1.0))
    if name == "gaussian":
        return Gaussian(gamma)
    if name == "laplacian":
        return Laplacian(gamma)
    raise ValueError(f"unknown scalar kernel {name!r}")


def scalar_kernel_to_dict(k):
    return {"name": type(k).__name__.lower(), "gamma": k.gamma}


def _points(x):
    x = np.asarray(x)
    return x[:, None] if x.ndim == 1 else x


def _pair_grid(kernel, x, y):
    """``kernel(x_i, y_j)`` for points with the feature axis last."""
    return kernel(x[:, None], y[None, :])


def _broadcast_identity(descriptor, values):
    one = AlgebraElement.identity(descriptor).payload
    v = np.asarray(values, dtype=complex)
    return v.reshape(v.shape + (1,) * one.ndim) * one


def _function_values(coeffs, basis_at_grid):
    """Univariate samples evaluated on a grid: ``(n, Q, channels)``."""
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim == 2:
        c = c[:, None, :]
    if c.shape[-1] != basis_at_grid.shape[1]:
        raise IncompatibleSample(
            f"sample has {c.shape[-1]} coefficients, basis has {basis_at_grid.shape[1]}")
    return np.einsum("qk,nck->nqc", basis_at_grid, c)


@dataclass(frozen=True)
class ScalarTimesIdentity:
    """``k(x, y) = base(x, y) * 1_A`` on points."""

    base: object = field(default_factory=Gaussian)
    descriptor: AlgebraDescriptor = field(default_factory=AlgebraDescriptor.scalar)

    def prepare(self, samples):
        return _points(samples)

    def pairwise(self, x, y):
        return _broadcast_identity(self.descriptor, _pair_grid(self.base, x, y))


@dataclass(frozen=True)
class DiagonalMatrix:
    """``k(x, y) = diag(k_1(x, y), ..., k_m(x, y))`` on points."""

    kernels: tuple = (Gaussian(),)

    @property
    def descriptor(self):
        return AlgebraDescriptor.matrix(len(self.kernels))

    def prepare(self, samples):
        return _points(samples)

    def pairwise(self, x, y):
        m = len(self.kernels)
        out = np.zeros((len(x), len(y), m, m), dtype=complex)
        for a, k in enumerate(self.kernels):
            out[:, :, a, a] = _pair_grid(k, x, y)
        return out


@dataclass(frozen=True)
class FunctionalMoment:
    """``k(x, y)(t) = int conj(t - x(s)) (t - y(s)) ds`` for functions sampled on an input grid.

    ``weights`` are the quadrature weights of the input grid; the value is the
    quadratic ``vol * t**2 - (int conj(x) + y) t + int conj(x) y`` in the
    target polynomial function algebra.
    """

    weights: np.ndarray
    descriptor: AlgebraDescriptor = field(default_factory=AlgebraDescriptor.function)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "weights", w)
        d = self.descriptor
        if d.kind != FUNCTION or d.basis != "polynomial" or d.order < 2:
            raise IncompatibleSample("functional moment kernel needs a polynomial function algebra with N >= 2")

    @classmethod
    def on_uniform_grid(cls, shape, descriptor=None):
        """Trapezoid weights on an equispaced tensor grid over ``[0, 1]^m``."""
        w = np.ones(())
        for p in shape:
            wp = np.full(p, 1.0 / (p - 1))
            wp[[0, -1]] *= 0.5
            w = np.multiply.outer(w, wp)
        return cls(w.reshape(-1), descriptor or AlgebraDescriptor.function())

    def prepare(self, samples):
        x = np.asarray(samples)
        x = x.reshape(len(x), -1)
        if x.shape[1] != self.weights.size:
            raise IncompatibleSample(f"samples have {x.shape[1]} grid values, weights {self.weights.size}")
        return x

    def pairwise(self, x, y):
        sw = np.sqrt(self.weights)
        xs = np.conj(x) * sw
        ys = y * sw
        out = np.zeros((len(x), len(y)) + self.descriptor.payload_shape, dtype=complex)
        out[..., 0] = xs @ ys.T
        out[..., 1] = -((np.conj(x) @ self.weights)[:, None] + (y @ self.weights)[None, :])
        out[..., 2] = self.weights.sum()
        return out


@dataclass(frozen=True)
class PointwiseFunction:
    """``k(x, y)(t) = base(x(t), y(t))`` on the grid, refit onto the function basis."""

    base: object = field(default_factory=Gaussian)
    descriptor: AlgebraDescriptor = field(default_factory=AlgebraDescriptor.function)

    def __post_init__(self):
        if self.descriptor.kind != FUNCTION:
            raise IncompatibleSample("pointwise kernel needs a function algebra")

    def prepare(self, samples):
        return _function_values(samples, self.descriptor.vandermonde)

    def pairwise(self, x, y):
        vals = self.base(x[:, None], y[None, :])          # (nx, ny, Q)
        return vals @ self.descriptor.fitter.T


@dataclass(frozen=True)
class IntegralOperatorKernel:
    """``k(x, y)`` is the integral operator with kernel ``base(x(s), y(t))``.

    Samples are monomial coefficient arrays; the kernel is fitted by weighted
    least squares onto bivariate polynomials of the target order, ``alpha = 0``.
    """

    base: object = field(default_factory=Gaussian)
    descriptor: AlgebraDescriptor = field(default_factory=AlgebraDescriptor.integral_operator)

    def __post_init__(self):
        if self.descriptor.kind != INTEGRAL:
            raise IncompatibleSample("integral operator kernel needs an integral operator algebra")

    def prepare(self, samples):
        c = np.asarray(samples, dtype=complex)
        k = c.shape[-1]
        t = self.descriptor.quadrature[0]
        return _function_values(c, t[:, None] ** np.arange(k))

    def pairwise(self, x, y):
        vals = self.base(x[:, None, :, None, :], y[None, :, None, :, :])   # (nx, ny, Q, Q)
        p = self.descriptor.fitter
        # averaging with the fit of the transposed values makes k(y, x) = k(x, y)^*
        # hold bit for bit instead of up to summation order
        h = 0.5 * (p @ vals @ p.T + np.swapaxes(p @ np.swapaxes(vals, -1, -2) @ p.T, -1, -2))
        n1 = self.descriptor.order + 1
        out = np.zeros((len(x), len(y)) + self.descriptor.payload_shape, dtype=complex)
        out[..., 1:] = h.reshape(len(x), len(y), n1 * n1)
        return out


@dataclass(frozen=True)
class QuantumRankOne:
    """``k(a, b) = |a><a|b><b|`` on vectors of ``C^m``."""

    m: int = 2

    @property
    def descriptor(self):
        return AlgebraDescriptor.matrix(self.m)

    def prepare(self, samples):
        x = np.asarray(samples, dtype=complex)
        x = x.reshape(len(x), -1)
        if x.shape[1] != self.m:
            raise IncompatibleSample(f"states must have {self.m} components")
        return x

    def pairwise(self, x, y):
        # complex products spelled out in real arithmetic, so that swapping the
        # arguments yields the exact conjugate (the builtin product may fuse)
        xr, xi, yr, yi = x.real, x.imag, y.real, y.imag
        ore = np.sum(xr[:, None, :] * yr[None] + xi[:, None, :] * yi[None], axis=-1)     # <a|b>
        oim = np.sum(xr[:, None, :] * yi[None] - xi[:, None, :] * yr[None], axis=-1)
        pre = xr[:, None, :, None] * yr[None, :, None, :] + xi[:, None, :, None] * yi[None, :, None, :]
        pim = xi[:, None, :, None] * yr[None, :, None, :] - xr[:, None, :, None] * yi[None, :, None, :]
        ore, oim = ore[..., None, None], oim[..., None, None]
        return (ore * pre - oim * pim) + 1j * (ore * pim + oim * pre)


def eval_kernel(spec, x, y):
    """Kernel value ``k(x, y)`` for single samples."""
    xs = spec.prepare(np.asarray(x)[None])
    ys = spec.prepare(np.asarray(y)[None])
    return AlgebraElement(spec.descriptor, spec.pairwise(xs, ys)[0, 0])


def cross_gram(spec, xs, ys):
    """Rectangular matrix ``[k(x_i, y_j)]`` (prepared automatically)."""
    return OperatorMatrix(spec.descriptor, spec.pairwise(spec.prepare(xs), spec.prepare(ys)))


def psd_diagnostic(g, trials=20, tol=1e-6, seed=0):
    """Largest relative negative part of ``c^* G c`` over random ``c``."""
    d = g.descriptor
    rep = g.rep
    n = len(g)
    rng = np.random.Generator(np.random.Philox(seed))
    scale = max(r_opnorm(rep), np.finfo(float).tiny)
    worst = 0.0
    for _ in range(trials):
        shape = (n,) + d.rep_shape
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if d.kind == INTEGRAL:
            c[..., -1, :-1] = 0
            c[..., :-1, -1] = 0
        if d.kind == FUNCTION:
            # random coefficient vectors rather than raw grid values
            c = d.to_rep(rng.standard_normal((n,) + d.payload_shape))
        val = r_inner(c, r_matvec(rep, c))
        w, _ = d.rep_eigh(val)
        rel = -float(w.min()) / (scale * float(np.sum(np.abs(c) ** 2)))
        worst = max(worst, rel)
    if worst > tol:
        raise KernelNotPSD()
    return worst


def gram(spec, samples, check=True):
    """Hermitian Gram matrix ``G[i, j] = k(x_i, x_j)`` with a PSD diagnostic."""
    x = spec.prepare(samples)
    if len(x) < 1:
        raise ValueError("need at least one sample")
    g = OperatorMatrix(spec.descriptor, spec.pairwise(x, x), hermitian=True)
    if check:
        psd_diagnostic(g)
    return g


def rkhm_eval(spec, basis, coeffs, x):
    """``v(x) = sum_i k(x, x_i) c_i`` for ``v = sum_i phi(x_i) c_i``."""
    b = spec.prepare(basis)
    if len(b) != len(coeffs):
        raise ValueError("length mismatch")
    if coeffs.descriptor != spec.descriptor:
        raise AlgebraError("algebra mismatch")
    row = spec.pairwise(spec.prepare(np.asarray(x)[None]), b)
    d = spec.descriptor
    val = np.einsum("nbrs,nbst->brt", d.to_rep(row[0]), coeffs.rep)
    return AlgebraElement.from_rep(d, val)


def kernel_to_dict(spec):
    if isinstance(spec, ScalarTimesIdentity):
        return {"variant": "ScalarTimesIdentity", "base": scalar_kernel_to_dict(spec.base),
                "algebra": spec.descriptor.to_dict()}
    if isinstance(spec, DiagonalMatrix):
        return {"variant": "DiagonalMatrix", "kernels": [scalar_kernel_to_dict(k) for k in spec.kernels]}
    if isinstance(spec, FunctionalMoment):
        return {"variant": "FunctionalMoment", "weights": spec.weights.tolist(),
                "algebra": spec.descriptor.to_dict()}
    if isinstance(spec, PointwiseFunction):
        return {"variant": "PointwiseFunction", "base": scalar_kernel_to_dict(spec.base),
                "algebra": spec.descriptor.to_dict()}
    if isinstance(spec, IntegralOperatorKernel):
        return {"variant": "IntegralOperatorKernel", "base": scalar_kernel_to_dict(spec.base),
                "algebra": spec.descriptor.to_dict()}
    if isinstance(spec, QuantumRankOne):
        return {"variant": "QuantumRankOne", "m": spec.m}
    raise TypeError(f"unknown kernel {spec!r}")


def kernel_from_dict(d):
    variant = d["variant"]
    algebra = AlgebraDescriptor.from_dict(d["algebra"]) if "algebra" in d else None
    base = scalar_kernel_from_dict(d.get("base", {}))
    if variant == "ScalarTimesIdentity":
        return ScalarTimesIdentity(base, algebra or AlgebraDescriptor.scalar())
    if variant == "DiagonalMatrix":
        return DiagonalMatrix(tuple(scalar_kernel_from_dict(k) for k in d["kernels"]))
    if variant == "FunctionalMoment":
        algebra = algebra or AlgebraDescriptor.function()
        if "grid_shape" in d:
            return FunctionalMoment.on_uniform_grid(tuple(d["grid_shape"]), algebra)
        return FunctionalMoment(np.asarray(d["weights"], dtype=float), algebra)
    if variant == "PointwiseFunction":
        return PointwiseFunction(base, algebra or AlgebraDescriptor.function())
    if variant == "IntegralOperatorKernel":
        return IntegralOperatorKernel(base, algebra or AlgebraDescriptor.integral_operator())
    if variant == "QuantumRankOne":
        return QuantumRankOne(int(d["m"]))
    raise ValueError(f"unknown kernel variant {variant!r}")


__all__ = [
    "Gaussian", "Laplacian", "ScalarTimesIdentity", "DiagonalMatrix", "FunctionalMoment",
    "PointwiseFunction", "IntegralOperatorKernel", "QuantumRankOne", "KernelNotPSD",
    "IncompatibleSample", "eval_kernel", "gram", "cross_gram", "rkhm_eval",
    "psd_diagnostic", "kernel_to_dict", "kernel_from_dict",
]
