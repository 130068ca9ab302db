"""Linear algebra over the Hilbert C*-module ``A^n``.

Vectors and matrices store algebra payloads in stacked arrays.  Composite
expressions (matrix products, quadratic forms) are evaluated in the algebra
representation and converted back to payloads once, so truncated algebras are
projected once per result rather than once per elementary product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import (AlgebraElement, AlgebraError, AlgebraMismatch, INTEGRAL, MATRIX, SCALAR, _frozen,
                      rep_norm)
from .algebra import element_from_dict, element_to_dict, AlgebraDescriptor


class DegenerateVector(AlgebraError):
    def __init__(self, msg="degenerate vector"):
        super().__init__(msg)


class InvalidGram(AlgebraError):
    def __init__(self, msg="invalid Gram matrix"):
        super().__init__(msg)


def _payload_ndim(descriptor):
    return len(descriptor.payload_shape)


@dataclass(frozen=True, eq=False)
class ModuleVector:
    """Length-``n`` vector of algebra elements sharing one descriptor."""

    descriptor: AlgebraDescriptor
    payload: np.ndarray = field(repr=False)
    _rep: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        p = _frozen(self.payload)
        if p.ndim != 1 + _payload_ndim(self.descriptor) or p.shape[1:] != self.descriptor.payload_shape:
            raise ValueError(f"vector payload shape {p.shape} does not fit {self.descriptor}")
        if p.shape[0] < 1:
            raise ValueError("module vectors need at least one entry")
        object.__setattr__(self, "payload", p)

    @classmethod
    def from_elements(cls, elements):
        elements = list(elements)
        d = elements[0].descriptor
        if any(e.descriptor != d for e in elements):
            raise AlgebraMismatch()
        return cls(d, np.stack([e.payload for e in elements]))

    @classmethod
    def from_rep(cls, descriptor, rep):
        rep, cached = _exact_rep(descriptor, rep)
        return cls(descriptor, descriptor.from_rep(rep), cached)

    @classmethod
    def constant(cls, descriptor, n, value=1.0):
        one = AlgebraElement.identity(descriptor).payload * value
        return cls(descriptor, np.broadcast_to(one, (n,) + one.shape))

    @classmethod
    def zeros(cls, descriptor, n):
        return cls(descriptor, np.zeros((n,) + descriptor.payload_shape, dtype=complex))

    @classmethod
    def basis_vector(cls, descriptor, n, i):
        p = np.zeros((n,) + descriptor.payload_shape, dtype=complex)
        p[i] = AlgebraElement.identity(descriptor).payload
        return cls(descriptor, p)

    @property
    def rep(self):
        if self._rep is not None:
            return np.array(self._rep)
        return self.descriptor.to_rep(self.payload)

    def __len__(self):
        return self.payload.shape[0]

    def __getitem__(self, i):
        if self._rep is not None:
            return AlgebraElement.from_rep(self.descriptor, self._rep[i])
        return AlgebraElement(self.descriptor, self.payload[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def _other(self, other):
        if not isinstance(other, ModuleVector) or other.descriptor != self.descriptor:
            raise AlgebraMismatch()
        if len(other) != len(self):
            raise ValueError("shape mismatch")
        return other

    def __add__(self, other):
        other = self._other(other)
        if self._rep is not None or other._rep is not None:
            return ModuleVector.from_rep(self.descriptor, self.rep + other.rep)
        return ModuleVector(self.descriptor, self.payload + other.payload)

    def __sub__(self, other):
        return self + (-self._other(other))

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        """Right action by an algebra element, or scaling by a number."""
        if isinstance(other, AlgebraElement):
            if other.descriptor != self.descriptor:
                raise AlgebraMismatch()
            return ModuleVector.from_rep(self.descriptor, self.rep @ other.rep)
        c = complex(other)
        return ModuleVector(self.descriptor, self.payload * c,
                            None if self._rep is None else _frozen(self._rep * c))

    def __rmul__(self, other):
        return self * other

    def to_dict(self):
        return {"descriptor": self.descriptor.to_dict(),
                "entries": [element_to_dict(e)["payload"] for e in self]}

    @classmethod
    def from_dict(cls, obj):
        d = AlgebraDescriptor.from_dict(obj["descriptor"])
        return cls.from_elements(
            element_from_dict({"payload": p}, d) for p in obj["entries"])


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """``n x n`` matrix of algebra elements.

    With ``hermitian=True`` the lower triangle is rebuilt from the upper one so
    that ``entry(j, i) == adjoint(entry(i, j))`` holds exactly.
    """

    descriptor: AlgebraDescriptor
    payload: np.ndarray = field(repr=False)
    hermitian: bool = False
    _rep: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        p = np.array(self.payload, dtype=complex)
        nd = _payload_ndim(self.descriptor)
        if p.ndim != 2 + nd or p.shape[2:] != self.descriptor.payload_shape:
            raise ValueError(f"matrix payload shape {p.shape} does not fit {self.descriptor}")
        if self.hermitian:
            if p.shape[0] != p.shape[1]:
                raise ValueError("hermitian matrices must be square")
            adj = _adjoint_payloads(self.descriptor, np.swapaxes(p, 0, 1))
            il = np.tril_indices(p.shape[0], -1)
            p[il] = adj[il]
            iu = np.diag_indices(p.shape[0])
            p[iu] = 0.5 * (p[iu] + adj[iu])
            if self._rep is None and self.descriptor.kind == INTEGRAL:
                # the monomial-basis payload maps to a rep that is Hermitian only
                # up to cancellation noise; QR amplifies any asymmetry
                object.__setattr__(self, "_rep", self.descriptor.clean_rep(self.descriptor.to_rep(p)))
            if self._rep is not None:
                rep = np.array(self._rep)
                radj = r_madj(rep)
                rep[il] = radj[il]
                rep[iu] = 0.5 * (rep[iu] + radj[iu])
                object.__setattr__(self, "_rep", _frozen(rep))
        object.__setattr__(self, "payload", _frozen(p))

    @classmethod
    def from_rep(cls, descriptor, rep, hermitian=False):
        rep, cached = _exact_rep(descriptor, rep)
        return cls(descriptor, descriptor.from_rep(rep), hermitian, cached)

    @classmethod
    def from_elements(cls, rows, hermitian=False):
        rows = [list(r) for r in rows]
        d = rows[0][0].descriptor
        if any(e.descriptor != d for r in rows for e in r):
            raise AlgebraMismatch()
        return cls(d, np.array([[e.payload for e in r] for r in rows]), hermitian)

    @classmethod
    def identity(cls, descriptor, n):
        one = AlgebraElement.identity(descriptor).payload
        p = np.zeros((n, n) + one.shape, dtype=complex)
        p[np.arange(n), np.arange(n)] = one
        return cls(descriptor, p, hermitian=True)

    @property
    def rep(self):
        if self._rep is not None:
            return np.array(self._rep)
        return self.descriptor.to_rep(self.payload)

    @property
    def shape(self):
        return self.payload.shape[:2]

    def __len__(self):
        return self.payload.shape[0]

    def __getitem__(self, ij):
        i, j = ij
        if self._rep is not None:
            return AlgebraElement.from_rep(self.descriptor, self._rep[i, j])
        return AlgebraElement(self.descriptor, self.payload[i, j])

    def column(self, j):
        if self._rep is not None:
            return ModuleVector.from_rep(self.descriptor, self._rep[:, j])
        return ModuleVector(self.descriptor, self.payload[:, j])

    def adjoint(self):
        if self._rep is not None:
            return OperatorMatrix.from_rep(self.descriptor, r_madj(self._rep), self.hermitian)
        p = _adjoint_payloads(self.descriptor, np.swapaxes(self.payload, 0, 1))
        return OperatorMatrix(self.descriptor, p, self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, ModuleVector):
            return matvec(self, other)
        return matmul(self, other)

    def block(self, rows, cols):
        idx = np.ix_(list(rows), list(cols))
        if self._rep is not None:
            return OperatorMatrix.from_rep(self.descriptor, self._rep[idx])
        return OperatorMatrix(self.descriptor, self.payload[idx])

    def to_dict(self):
        return {"descriptor": self.descriptor.to_dict(), "hermitian": self.hermitian,
                "entries": [[element_to_dict(self[i, j])["payload"] for j in range(self.shape[1])]
                            for i in range(self.shape[0])]}

    @classmethod
    def from_dict(cls, obj):
        d = AlgebraDescriptor.from_dict(obj["descriptor"])
        rows = [[element_from_dict({"payload": p}, d) for p in row] for row in obj["entries"]]
        return cls.from_elements(rows, bool(obj.get("hermitian", False)))


def _exact_rep(descriptor, rep):
    """``(rep, cached)``: integral-operator reps are kept next to the payload
    because the payload round trip loses digits in the monomial basis."""
    if descriptor.kind != INTEGRAL:
        return rep, None
    clean = descriptor.clean_rep(rep)
    return clean, _frozen(clean)


def _adjoint_payloads(descriptor, p):
    """Entrywise adjoint of a stack of payloads (exact, payload space)."""
    if descriptor.kind == "matrix":
        return np.conj(np.swapaxes(p, -1, -2))
    if descriptor.kind == "integral_operator":
        n1 = descriptor.order + 1
        lead = p.shape[:-1]
        h = np.conj(np.swapaxes(p[..., 1:].reshape(lead + (n1, n1)), -1, -2))
        return np.concatenate([np.conj(p[..., :1]), h.reshape(lead + (n1 * n1,))], axis=-1)
    return np.conj(p)


# Rep-level kernels.  Vector reps are (n, B, r, r); matrix reps (n, k, B, r, r).
def r_adj(x):
    return np.conj(np.swapaxes(x, -1, -2))


def r_madj(x):
    """Adjoint of a matrix rep: transpose indices and adjoint entries."""
    return r_adj(np.swapaxes(x, 0, 1))


def _flat(x):
    n, k, b, r, s = x.shape
    return x.transpose(2, 0, 3, 1, 4).reshape(b, n * r, k * s)


def _unflat(f, n, k):
    b, nr, ks = f.shape
    r, s = nr // n, ks // k
    return f.reshape(b, n, r, k, s).transpose(1, 3, 0, 2, 4)


def r_matmul(x, y):
    return _unflat(_flat(x) @ _flat(y), x.shape[0], y.shape[1])


def r_matvec(x, v):
    return r_matmul(x, v[:, None])[:, 0]


def r_inner(u, v):
    """Sum_i u_i^* v_i for vector reps (leading axis = module index)."""
    return np.einsum("nbsa,nbsc->bac", np.conj(u), v)


def r_inner_many(u, v):
    """Matrix of inner products between columns: (U^* V)_{ij} for matrix reps."""
    return r_matmul(r_madj(u), v)


def r_eye(descriptor, n):
    out = np.zeros((n, n) + descriptor.rep_shape, dtype=complex)
    out[np.arange(n), np.arange(n)] = descriptor.rep_identity()
    return out


def r_opnorm(x):
    """Operator norm on A^n of a square matrix rep (max over blocks of flat norm)."""
    f = _flat(x)
    return float(np.max(np.linalg.norm(f, ord=2, axis=(-2, -1))))


def _check_vectors(u, v):
    if u.descriptor != v.descriptor:
        raise AlgebraMismatch()
    if len(u) != len(v):
        raise ValueError("shape mismatch")


# Public operations
def inner(u, v):
    _check_vectors(u, v)
    return AlgebraElement.from_rep(u.descriptor, r_inner(u.rep, v.rep))


def absolute(u):
    d = u.descriptor
    from .algebra import rep_sqrt, _check_positive_rep
    sq = r_inner(u.rep, u.rep)
    _check_positive_rep(d, sq)
    return AlgebraElement.from_rep(d, rep_sqrt(d, sq))


def module_norm(u):
    """Real norm ``||u|| = || <u, u> ||^(1/2)``."""
    return float(np.sqrt(rep_norm(r_inner(u.rep, u.rep))))


def matvec(g, c):
    if g.descriptor != c.descriptor:
        raise AlgebraMismatch()
    if g.shape[1] != len(c):
        raise ValueError("shape mismatch")
    return ModuleVector.from_rep(g.descriptor, r_matvec(g.rep, c.rep))


def matmul(a, b):
    if a.descriptor != b.descriptor:
        raise AlgebraMismatch()
    if a.shape[1] != b.shape[0]:
        raise ValueError("shape mismatch")
    return OperatorMatrix.from_rep(a.descriptor, r_matmul(a.rep, b.rep))


def quadratic_form(c, g, d):
    """``c^* G d`` as an algebra element."""
    if not (c.descriptor == g.descriptor == d.descriptor):
        raise AlgebraMismatch()
    return AlgebraElement.from_rep(g.descriptor, r_inner(c.rep, r_matvec(g.rep, d.rep)))


def _norm_factors(descriptor, sq, epsilon):
    """``b_hat``, ``b`` and the kept flag for a Gram value ``sq = <q, q>``."""
    w, v = descriptor.rep_eigh(sq)
    thr = epsilon * epsilon
    if np.sqrt(max(w.max(), 0.0)) <= epsilon:
        return None
    keep = w > thr
    safe = np.where(keep, w, 1.0)
    vh = r_adj(v)
    bhat = (v * np.where(keep, safe ** -0.5, 0.0)[..., None, :]) @ vh
    b = (v * np.where(keep, np.sqrt(safe), 0.0)[..., None, :]) @ vh
    return bhat, b


def normalize(q_hat, epsilon=0.0):
    """Rescale ``q_hat`` into a normalized vector.

    Returns ``(q, b_hat, b)`` with ``q = q_hat * b_hat``, ``<q, q>`` a nonzero
    projection and ``||q_hat - q * b|| <= epsilon``.
    """
    d = q_hat.descriptor
    rep = q_hat.rep
    sq = r_inner(rep, rep)
    factors = _norm_factors(d, sq, epsilon)
    if factors is None:
        raise DegenerateVector()
    bhat, b = factors
    q = ModuleVector.from_rep(d, rep @ bhat)
    return q, AlgebraElement.from_rep(d, bhat), AlgebraElement.from_rep(d, b)


@dataclass(frozen=True)
class QrResult:
    """QR factors of the feature matrix ``W`` behind a Gram matrix ``G = W^* W``.

    ``Q = W R_inv`` is orthonormal (up to masked columns) and ``W ~ Q R``.
    """

    R: OperatorMatrix
    R_inv: OperatorMatrix
    kept: tuple
    epsilon: float

    def to_dict(self):
        return {"R": self.R.to_dict(), "R_inv": self.R_inv.to_dict(),
                "kept": list(self.kept), "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, obj):
        return cls(OperatorMatrix.from_dict(obj["R"]), OperatorMatrix.from_dict(obj["R_inv"]),
                   tuple(bool(k) for k in obj["kept"]), float(obj["epsilon"]))


def check_gram(g, tol=1e-8, trials=5):
    """Raise InvalidGram unless ``g`` is Hermitian and passes a random PSD probe."""
    d = g.descriptor
    rep = g.rep
    n = len(g)
    if g.shape[0] != g.shape[1]:
        raise InvalidGram()
    scale = max(1.0, r_opnorm(rep))
    if np.max(np.abs(rep - r_madj(rep)), initial=0.0) > tol * scale:
        raise InvalidGram()
    rng = np.random.Generator(np.random.Philox(0))
    for _ in range(trials):
        c = rng.standard_normal((n,) + d.rep_shape) + 1j * rng.standard_normal((n,) + d.rep_shape)
        if d.kind == "integral_operator":
            c[..., -1, :-1] = 0
            c[..., :-1, -1] = 0
        val = r_inner(c, r_matvec(rep, c))
        w, _ = d.rep_eigh(val)
        if w.min() < -tol * scale * float(np.sum(np.abs(c) ** 2)):
            raise InvalidGram()


def default_epsilon(descriptor):
    """1e-6 for finite-dimensional algebras, 1e-3 for truncated function and operator algebras."""
    return 1e-6 if descriptor.kind in (SCALAR, MATRIX) else 1e-3


def gram_schmidt_qr(g, epsilon=None, check=True):
    """Module Gram-Schmidt run entirely through the Gram matrix ``g``.

    Columns whose residual norm is at most ``epsilon / sqrt(n)`` are zeroed in ``R_inv``
    and flagged in ``kept``; their ``R`` columns still carry the projections
    onto earlier vectors.
    """
    d = g.descriptor
    if epsilon is None:
        epsilon = default_epsilon(d)
    if check:
        check_gram(g)
    r, r_inv, kept = qr_rep(d, g.rep, epsilon)
    return QrResult(OperatorMatrix.from_rep(d, r), OperatorMatrix.from_rep(d, r_inv),
                    tuple(kept), float(epsilon))


def gram_factor(grep):
    """``L`` with ``flat(G) = L^H L`` per block (negative rounding eigenvalues clipped)."""
    f = _flat(grep)
    w, v = np.linalg.eigh(0.5 * (f + r_adj(f)))
    return np.sqrt(np.clip(w, 0.0, None))[..., :, None] * r_adj(v)


def qr_rep(d, grep, epsilon):
    """Gram-Schmidt on a Gram rep; returns ``(R, R_inv, kept)`` reps.

    Each column is orthogonalized twice against the earlier ones, and columns
    are truncated at ``epsilon / sqrt(n)`` so that the whole-operator residual
    ``||W - Q R||`` (not only every column) stays below ``epsilon``.  Inner
    products ``a^* G a`` cancel to ``||a||^2 ||G||`` rounding, which the
    normalization amplifies by up to ``1 / tau^2``, so the recursion runs in
    extended precision.
    """
    n = grep.shape[0]
    tau = epsilon / np.sqrt(n)
    g = grep.astype(np.clongdouble)
    one = d.rep_identity()
    coef = np.zeros_like(g)             # column j holds the w-coefficients of q_j
    r = np.zeros_like(grep)
    bhat = np.zeros((n,) + d.rep_shape, dtype=complex)
    kept = []
    for j in range(n):
        a = np.zeros((n,) + d.rep_shape, dtype=np.clongdouble)
        a[j] = one
        if j:
            prev = coef[:, :j]
            for _ in range(2):
                rij = np.einsum("libsa,lbsc->ibac", np.conj(prev), r_matvec(g, a))
                r[:j, j] += rij
                a -= np.einsum("libac,ibcd->lbad", prev, rij)
        sq = r_inner(a, r_matvec(g, a)).astype(complex)
        factors = _norm_factors(d, 0.5 * (sq + r_adj(sq)), tau)
        if factors is None:
            kept.append(False)
            continue
        bh, b = factors
        kept.append(True)
        coef[:, j] = a @ bh
        r[j, j] = b
        bhat[j] = bh
    return r, _r_inverse(d, r, bhat), tuple(kept)


def _r_inverse(descriptor, r, bhat):
    """``B_hat (I + (R - B) B_hat)^-1`` by the finite Neumann series.

    X = (R - B) B_hat is strictly upper triangular, so sum_{k<n} (-X)^k is the
    exact inverse; the sum is evaluated as prod_i (I + (-X)^(2^i)).
    """
    n = r.shape[0]
    strict = r.copy()
    strict[np.arange(n), np.arange(n)] = 0
    bdiag = np.zeros_like(r)
    bdiag[np.arange(n), np.arange(n)] = bhat
    y = -r_matmul(strict, bdiag)
    eye = r_eye(descriptor, n)
    total = eye + y
    power = y
    span = 2
    while span < n:
        power = r_matmul(power, power)
        total = r_matmul(total, eye + power)
        span *= 2
    return r_matmul(bdiag, total)


def qr_orthonormality_defect(qr, g):
    """(max off-diagonal norm, max idempotent defect) of ``R_inv^* G R_inv``."""
    d = g.descriptor
    ri = qr.R_inv.rep
    m = r_matmul(r_madj(ri), r_matmul(g.rep, ri))
    n = len(g)
    off = 0.0
    idem = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                off = max(off, float(rep_norm(m[i, j])))
        p = m[i, i]
        idem = max(idem, float(rep_norm(p @ p - p)))
    del d
    return off, idem


def qr_residual(qr, g):
    """Spectral value of ``||W - Q R||`` computed through ``G``.

    Returns the whole-matrix operator norm and the largest column norm.
    """
    d = g.descriptor
    n = len(g)
    e = r_eye(d, n) - r_matmul(qr.R_inv.rep, qr.R.rep)
    res = r_matmul(r_madj(e), r_matmul(g.rep, e))
    whole = np.sqrt(max(r_opnorm(res), 0.0))
    cols = max(float(np.sqrt(rep_norm(res[j, j]))) for j in range(n))
    return float(whole), cols


def orthonormal_columns(qr, g):
    """Gram matrix ``Q^* Q = R_inv^* G R_inv`` of the orthonormal vectors."""
    ri = qr.R_inv.rep
    return OperatorMatrix.from_rep(g.descriptor, r_matmul(r_madj(ri), r_matmul(g.rep, ri)),
                                   hermitian=True)


def project(u_coeffs, qr, g):
    """w-coefficients of the orthogonal projection of ``W u_coeffs`` onto span(Q)."""
    d = g.descriptor
    if u_coeffs.descriptor != d:
        raise AlgebraMismatch()
    if len(u_coeffs) != len(g) or qr.R_inv.shape[0] != len(g):
        raise ValueError("shape mismatch")
    ri = qr.R_inv.rep
    coords = r_matvec(r_madj(ri), r_matvec(g.rep, u_coeffs.rep))
    return ModuleVector.from_rep(d, r_matvec(ri, coords))


def coeff_gram_value(g, x, y):
    """``<W x, W y>`` for w-coefficient vectors ``x`` and ``y``."""
    return quadratic_form(x, g, y)
