"""Clifford algebras Cl(p, q), Vahlen matrices and the light-cone model.

Generators satisfy ``v w + w v = -2 (v, w)``, so the first ``p`` basis
vectors square to ``-1`` and the remaining ``q`` square to ``+1``.
Multivectors are dense arrays indexed by blade bitmask: bit ``i`` set
means ``e_{i+1}`` is a factor.

Two layers live here. :class:`Algebra` holds the multiplication tables and
works on raw arrays of shape ``(..., 2**(p+q))`` so that whole grids can be
processed at once. :class:`Multivector` and :class:`VahlenMatrix` are small
immutable wrappers for single elements.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    CoincidentPoints,
    InvalidVahlen,
    NonScalarNorm,
    PointAtInfinity,
    SignatureMismatch,
    SingularElement,
)

SCALAR_TOL = 1e-9
MAX_DIM = 12


@dataclass(frozen=True)
class Signature:
    p: int
    q: int = 0

    def __post_init__(self) -> None:
        if self.p < 0 or self.q < 0:
            raise ValueError(f"signature entries must be non-negative, got {self.p, self.q}")
        if self.p + self.q > MAX_DIM:
            raise ValueError(f"p + q must be <= {MAX_DIM}, got {self.p + self.q}")

    @property
    def dim(self) -> int:
        return self.p + self.q

    @property
    def size(self) -> int:
        return 1 << (self.p + self.q)


def _reorder_sign(a: int, b: int) -> int:
    a >>= 1
    swaps = 0
    while a:
        swaps += bin(a & b).count("1")
        a >>= 1
    return -1 if swaps & 1 else 1


class Algebra:
    """Multiplication tables and batched kernels for one signature."""

    def __init__(self, sig: Signature):
        self.sig = sig
        n, size = sig.dim, sig.size
        self.n = n
        self.size = size
        metric = [-1] * sig.p + [1] * sig.q
        idx = np.arange(size)
        self.grades = np.array([bin(i).count("1") for i in range(size)])
        k = self.grades
        self.grade_sign = np.where(k % 2 == 0, 1.0, -1.0)
        self.rev_sign = np.where((k * (k - 1) // 2) % 2 == 0, 1.0, -1.0)
        self.conj_sign = self.grade_sign * self.rev_sign
        # out[k] = sum_i a[i] * sgn[i, k] * b[perm[i, k]], perm[i, k] = i ^ k
        self.perm = idx[:, None] ^ idx[None, :]
        sgn = np.empty((size, size))
        for i in range(size):
            for kk in range(size):
                j = i ^ kk
                s = _reorder_sign(i, j)
                common = i & j
                for bit in range(n):
                    if common >> bit & 1:
                        s *= metric[bit]
                sgn[i, kk] = s
        self.sgn = sgn
        self.vector_index = np.array([1 << i for i in range(n)], dtype=int)

    # -- products ---------------------------------------------------------
    def mul(self, a, b) -> np.ndarray:
        """Geometric product with broadcasting over leading axes."""
        a = np.asarray(a)
        b = np.asarray(b)
        size = self.size
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        dtype = np.result_type(a.dtype, b.dtype, np.float64)
        A = np.broadcast_to(a, shape + (size,)).reshape(-1, size)
        B = np.broadcast_to(b, shape + (size,)).reshape(-1, size)
        m = A.shape[0]
        if size <= 32:
            out = np.empty((m, size), dtype=dtype)
            chunk = max(1, (1 << 21) // (size * size))
            for s in range(0, m, chunk):
                bb = B[s : s + chunk][:, self.perm] * self.sgn
                out[s : s + chunk] = np.einsum("mi,mik->mk", A[s : s + chunk], bb)
        else:
            out = np.zeros((m, size), dtype=dtype)
            for i in range(size):
                col = A[:, i]
                if not col.any():
                    continue
                out += col[:, None] * (B[:, self.perm[i]] * self.sgn[i])
        return out.reshape(shape + (size,))

    def mul_chain(self, *factors) -> np.ndarray:
        out = factors[0]
        for f in factors[1:]:
            out = self.mul(out, f)
        return out

    # -- involutions ------------------------------------------------------
    def grade_involution(self, a) -> np.ndarray:
        return np.asarray(a) * self.grade_sign

    def transpose(self, a) -> np.ndarray:
        return np.asarray(a) * self.rev_sign

    def conjugate(self, a) -> np.ndarray:
        return np.asarray(a) * self.conj_sign

    # -- vectors and scalars ---------------------------------------------
    def from_vectors(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected vectors of length {self.n}, got {x.shape[-1]}")
        out = np.zeros(x.shape[:-1] + (self.size,), dtype=np.result_type(x.dtype, np.float64))
        out[..., self.vector_index] = x
        return out

    def from_scalars(self, s) -> np.ndarray:
        s = np.asarray(s)
        out = np.zeros(s.shape + (self.size,), dtype=np.result_type(s.dtype, np.float64))
        out[..., 0] = s
        return out

    def vector_part(self, a) -> np.ndarray:
        return np.asarray(a)[..., self.vector_index]

    def grade_part(self, a, k: int) -> np.ndarray:
        return np.where(self.grades == k, np.asarray(a), 0)

    def non_scalar_defect(self, a) -> np.ndarray:
        """Relative size of the non-scalar part, per element."""
        a = np.asarray(a)
        total = np.abs(a).max(axis=-1)
        rest = np.abs(a[..., 1:]).max(axis=-1) if self.size > 1 else np.zeros(a.shape[:-1])
        return rest / (1.0 + total)

    def non_vector_defect(self, a) -> np.ndarray:
        a = np.asarray(a)
        total = np.abs(a).max(axis=-1)
        rest = np.abs(np.where(self.grades == 1, 0, a)).max(axis=-1)
        return rest / (1.0 + total)

    def norm(self, a) -> np.ndarray:
        """Clifford norm ``a conj(a)`` as a scalar array (non-scalar part dropped)."""
        return self.mul(a, self.conjugate(a))[..., 0]

    def inverse(self, a) -> np.ndarray:
        """Inverse ``conj(a) / N(a)``; valid for Clifford-group elements."""
        a = np.asarray(a)
        bar = self.conjugate(a)
        nrm = self.mul(a, bar)[..., 0]
        return bar / nrm[..., None]

    # vector helpers working on plain coordinate arrays (..., n)
    def vec_inverse(self, x) -> np.ndarray:
        x = np.asarray(x)
        return -x / bilinear(x, x)[..., None] if self.sig.q == 0 else self.vector_part(
            self.inverse(self.from_vectors(x))
        )


@lru_cache(maxsize=None)
def algebra(p: int, q: int = 0) -> Algebra:
    return Algebra(Signature(p, q))


def bilinear(x, y) -> np.ndarray:
    """Complex-bilinear Euclidean pairing of coordinate arrays."""
    return np.sum(np.asarray(x) * np.asarray(y), axis=-1)


# ---------------------------------------------------------------------------
# single elements
# ---------------------------------------------------------------------------


class Multivector:
    """An element of Cl(p, q) with real or complex coefficients."""

    __slots__ = ("sig", "coeffs")

    def __init__(self, sig: Signature, coeffs):
        coeffs = np.array(coeffs, dtype=np.result_type(np.asarray(coeffs).dtype, np.float64))
        if coeffs.shape != (sig.size,):
            raise ValueError(f"expected {sig.size} coefficients, got shape {coeffs.shape}")
        coeffs.setflags(write=False)
        self.sig = sig
        self.coeffs = coeffs

    # constructors
    @classmethod
    def zero(cls, sig: Signature) -> "Multivector":
        return cls(sig, np.zeros(sig.size))

    @classmethod
    def scalar(cls, sig: Signature, s) -> "Multivector":
        c = np.zeros(sig.size, dtype=np.result_type(np.asarray(s).dtype, np.float64))
        c[0] = s
        return cls(sig, c)

    @classmethod
    def vector(cls, sig: Signature, coords) -> "Multivector":
        return cls(sig, algebra(sig.p, sig.q).from_vectors(np.asarray(coords)))

    @classmethod
    def blade(cls, sig: Signature, *indices: int) -> "Multivector":
        """Product ``e_{i1} e_{i2} ...`` of basis vectors (1-based indices)."""
        out = cls.scalar(sig, 1.0)
        for i in indices:
            if not 1 <= i <= sig.dim:
                raise ValueError(f"basis index {i} out of range")
            c = np.zeros(sig.size)
            c[1 << (i - 1)] = 1.0
            out = out * cls(sig, c)
        return out

    @property
    def alg(self) -> Algebra:
        return algebra(self.sig.p, self.sig.q)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.coeffs)

    # arithmetic
    def _coerce(self, other) -> "Multivector":
        if isinstance(other, Multivector):
            if other.sig != self.sig:
                raise SignatureMismatch(f"{self.sig} vs {other.sig}")
            return other
        if np.isscalar(other):
            return Multivector.scalar(self.sig, other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Multivector(self.sig, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Multivector(self.sig, self.coeffs - o.coeffs)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Multivector(self.sig, o.coeffs - self.coeffs)

    def __neg__(self):
        return Multivector(self.sig, -self.coeffs)

    def __mul__(self, other):
        if np.isscalar(other):
            return Multivector(self.sig, self.coeffs * other)
        return geometric_product(self, other)

    def __rmul__(self, other):
        if np.isscalar(other):
            return Multivector(self.sig, self.coeffs * other)
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return Multivector(self.sig, self.coeffs / other)
        return self * invert(other)

    # parts
    def grade(self, k: int) -> "Multivector":
        return Multivector(self.sig, self.alg.grade_part(self.coeffs, k))

    @property
    def scalar_part(self):
        return self.coeffs[0]

    def vector_coords(self) -> np.ndarray:
        return self.alg.vector_part(self.coeffs)

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max())

    def is_zero(self, tol: float = SCALAR_TOL) -> bool:
        return self.max_abs() <= tol

    def is_scalar(self, tol: float = SCALAR_TOL) -> bool:
        return float(self.alg.non_scalar_defect(self.coeffs)) <= tol

    def is_vector(self, tol: float = SCALAR_TOL) -> bool:
        return float(self.alg.non_vector_defect(self.coeffs)) <= tol

    # involutions
    def grade_involution(self) -> "Multivector":
        return Multivector(self.sig, self.alg.grade_involution(self.coeffs))

    def transpose(self) -> "Multivector":
        return Multivector(self.sig, self.alg.transpose(self.coeffs))

    def conjugate(self) -> "Multivector":
        return Multivector(self.sig, self.alg.conjugate(self.coeffs))

    def complex_conjugate(self) -> "Multivector":
        return Multivector(self.sig, np.conj(self.coeffs))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        o = self._coerce(other)
        return bool(np.abs(self.coeffs - o.coeffs).max() <= atol)

    def to_json(self) -> dict:
        cplx = self.is_complex
        coeffs = [[float(c.real), float(c.imag)] for c in self.coeffs] if cplx else [float(c) for c in self.coeffs]
        return {"signature": [self.sig.p, self.sig.q], "complex": cplx, "coeffs": coeffs}

    @classmethod
    def from_json(cls, data: dict) -> "Multivector":
        sig = Signature(*data["signature"])
        if data.get("complex", False):
            coeffs = np.array([complex(re, im) for re, im in data["coeffs"]])
        else:
            coeffs = np.array(data["coeffs"], dtype=float)
        return cls(sig, coeffs)

    def __repr__(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            if c != 0:
                name = "".join(f"e{b + 1}" for b in range(self.sig.dim) if i >> b & 1) or "1"
                terms.append(f"{c}*{name}")
        return f"Multivector[{self.sig.p},{self.sig.q}](" + (" + ".join(terms) or "0") + ")"


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    if a.sig != b.sig:
        raise SignatureMismatch(f"{a.sig} vs {b.sig}")
    return Multivector(a.sig, a.alg.mul(a.coeffs, b.coeffs))


def involution(a: Multivector, kind: str) -> Multivector:
    if kind == "grade":
        return a.grade_involution()
    if kind == "transpose":
        return a.transpose()
    if kind == "conjugate":
        return a.conjugate()
    raise ValueError(f"unknown involution {kind!r}")


def clifford_norm(g: Multivector, tol: float = SCALAR_TOL):
    prod = g * g.conjugate()
    if not prod.is_scalar(tol):
        raise NonScalarNorm(f"g conj(g) has a non-scalar part of size {prod.alg.non_scalar_defect(prod.coeffs):.3g}")
    s = prod.scalar_part
    if np.iscomplexobj(s):
        return complex(s) if s.imag != 0 else float(s.real)
    return float(s)


def invert(g: Multivector, tol: float = SCALAR_TOL) -> Multivector:
    """Inverse of ``g``; uses ``conj(g)/N(g)`` and falls back to a linear solve."""
    prod = g * g.conjugate()
    scale = max(g.max_abs(), 1e-300)
    if prod.is_scalar(tol):
        nrm = prod.scalar_part
        if abs(nrm) <= tol * scale * scale:
            raise SingularElement("element has vanishing Clifford norm")
        return g.conjugate() / nrm
    alg = g.alg
    # left multiplication matrix: (g x)_k = sum_j L[k, j] x_j
    size = alg.size
    L = np.zeros((size, size), dtype=g.coeffs.dtype)
    for j in range(size):
        e = np.zeros(size)
        e[j] = 1.0
        L[:, j] = alg.mul(g.coeffs, e)
    one = np.zeros(size)
    one[0] = 1.0
    try:
        x = np.linalg.solve(L, one)
    except np.linalg.LinAlgError as exc:
        raise SingularElement("element is not invertible") from exc
    if np.linalg.cond(L) > 1e12:
        raise SingularElement("element is numerically singular")
    return Multivector(g.sig, x)


def twisted_adjoint(g: Multivector, v: Multivector) -> Multivector:
    """``g v g~^{-1}``; a reflection when ``g`` is a vector."""
    return g * v * invert(g.grade_involution())


def in_clifford_group(x: Multivector, tol: float = SCALAR_TOL) -> bool:
    """Membership in the Clifford group or zero."""
    if x.max_abs() <= tol:
        return True
    prod = x * x.conjugate()
    if not prod.is_scalar(tol) or abs(prod.scalar_part) <= tol * x.max_abs() ** 2:
        return False
    xinv = invert(x.grade_involution())
    for i in range(1, x.sig.dim + 1):
        if not (x * Multivector.blade(x.sig, i) * xinv).is_vector(tol):
            return False
    return True


# ---------------------------------------------------------------------------
# points of the conformal compactification
# ---------------------------------------------------------------------------


class _Infinity(enum.Enum):
    INFINITY = "inf"

    def __repr__(self) -> str:
        return "INFINITY"


INFINITY = _Infinity.INFINITY


def as_vector(x, n: int | None = None) -> Multivector:
    if isinstance(x, Multivector):
        return x
    x = np.asarray(x)
    return Multivector.vector(Signature(x.shape[-1] if n is None else n, 0), x)


# ---------------------------------------------------------------------------
# 2x2 Clifford matrices
# ---------------------------------------------------------------------------


def mat_mul(alg: Algebra, A, B) -> np.ndarray:
    """Product of (..., 2, 2, size) Clifford matrices."""
    A = np.asarray(A)
    B = np.asarray(B)
    prod = alg.mul(A[..., :, :, None, :], B[..., None, :, :, :])
    return prod.sum(axis=-3)


def mat_bar(alg: Algebra, M) -> np.ndarray:
    """``(a b; c d) -> (d^t, -b^t; -c^t, a^t)``."""
    M = np.asarray(M)
    t = alg.rev_sign
    out = np.empty_like(M)
    out[..., 0, 0, :] = M[..., 1, 1, :] * t
    out[..., 0, 1, :] = -M[..., 0, 1, :] * t
    out[..., 1, 0, :] = -M[..., 1, 0, :] * t
    out[..., 1, 1, :] = M[..., 0, 0, :] * t
    return out


def mat_transpose(alg: Algebra, M) -> np.ndarray:
    """``(a b; c d) -> (conj d, conj b; conj c, conj a)`` (Clifford conjugate)."""
    M = np.asarray(M)
    s = alg.conj_sign
    out = np.empty_like(M)
    out[..., 0, 0, :] = M[..., 1, 1, :] * s
    out[..., 0, 1, :] = M[..., 0, 1, :] * s
    out[..., 1, 0, :] = M[..., 1, 0, :] * s
    out[..., 1, 1, :] = M[..., 0, 0, :] * s
    return out


def mat_tilde(alg: Algebra, M) -> np.ndarray:
    """``(a b; c d) -> (a~, -b~; -c~, d~)``."""
    M = np.asarray(M)
    s = alg.grade_sign
    out = M * s
    out[..., 0, 1, :] *= -1
    out[..., 1, 0, :] *= -1
    return out


def mat_pseudo_det(alg: Algebra, M) -> np.ndarray:
    """``a d^t - b c^t`` as a multivector array."""
    M = np.asarray(M)
    t = alg.rev_sign
    return alg.mul(M[..., 0, 0, :], M[..., 1, 1, :] * t) - alg.mul(M[..., 0, 1, :], M[..., 1, 0, :] * t)


def mat_inverse(alg: Algebra, M) -> np.ndarray:
    """Inverse of group elements via ``bar(M) / (a d^t - b c^t)``."""
    pd = mat_pseudo_det(alg, M)[..., 0]
    return mat_bar(alg, M) / pd[..., None, None, None]


def mat_identity(alg: Algebra, shape=(), dtype=float) -> np.ndarray:
    out = np.zeros(tuple(shape) + (2, 2, alg.size), dtype=dtype)
    out[..., 0, 0, 0] = 1.0
    out[..., 1, 1, 0] = 1.0
    return out


def mat_exp(alg: Algebra, X) -> np.ndarray:
    """Exponential of (..., 2, 2, size) Clifford matrices by scaled Taylor series.

    The l1 norm of the coefficients is submultiplicative, which gives a
    rigorous bound for the truncation error.
    """
    X = np.asarray(X)
    nrm = float(np.abs(X).sum(axis=(-3, -2, -1)).max()) if X.size else 0.0
    squarings = 0
    while nrm > 0.5:
        nrm /= 2.0
        squarings += 1
    Y = X / (2.0**squarings)
    terms = 1
    bound = nrm
    while bound > 1e-18 and terms < 40:
        terms += 1
        bound *= nrm / terms
    out = mat_identity(alg, X.shape[:-3], dtype=np.result_type(X.dtype, np.float64))
    term = out
    for k in range(1, terms + 1):
        term = mat_mul(alg, term, Y) / k
        out = out + term
    for _ in range(squarings):
        out = mat_mul(alg, out, out)
    return out


class VahlenMatrix:
    """A 2x2 matrix over Cl(n, 0); the matrix model of Cl(n+1, 1).

    Group elements satisfy the Vahlen conditions (see :func:`is_vahlen`), but
    the class also holds general Clifford matrices such as light-cone vectors.
    """

    __slots__ = ("sig", "m")

    def __init__(self, a, b, c, d, n: int | None = None):
        entries = [a, b, c, d]
        sig = None
        for e in entries:
            if isinstance(e, Multivector):
                sig = e.sig
                break
        if sig is None:
            if n is None:
                raise ValueError("ambient dimension required when no entry is a Multivector")
            sig = Signature(n, 0)
        if sig.q != 0:
            raise SignatureMismatch("Vahlen entries live in Cl(n, 0)")
        arr = []
        for e in entries:
            if isinstance(e, Multivector):
                if e.sig != sig:
                    raise SignatureMismatch(f"{e.sig} vs {sig}")
                arr.append(e.coeffs)
            else:
                arr.append(Multivector.scalar(sig, e).coeffs)
        dtype = np.result_type(*[x.dtype for x in arr])
        m = np.array(arr, dtype=dtype).reshape(2, 2, sig.size)
        m.setflags(write=False)
        self.sig = sig
        self.m = m

    @classmethod
    def from_array(cls, m, n: int) -> "VahlenMatrix":
        sig = Signature(n, 0)
        m = np.asarray(m)
        return cls(*(Multivector(sig, m[i, j]) for i in range(2) for j in range(2)))

    @classmethod
    def identity(cls, n: int) -> "VahlenMatrix":
        return cls(1.0, 0.0, 0.0, 1.0, n=n)

    @property
    def n(self) -> int:
        return self.sig.dim

    @property
    def alg(self) -> Algebra:
        return algebra(self.sig.p, 0)

    def entry(self, i: int, j: int) -> Multivector:
        return Multivector(self.sig, self.m[i, j])

    a = property(lambda self: self.entry(0, 0))
    b = property(lambda self: self.entry(0, 1))
    c = property(lambda self: self.entry(1, 0))
    d = property(lambda self: self.entry(1, 1))

    def __matmul__(self, other: "VahlenMatrix") -> "VahlenMatrix":
        if other.sig != self.sig:
            raise SignatureMismatch(f"{self.sig} vs {other.sig}")
        return VahlenMatrix.from_array(mat_mul(self.alg, self.m, other.m), self.n)

    __mul__ = __matmul__

    def __add__(self, other: "VahlenMatrix") -> "VahlenMatrix":
        return VahlenMatrix.from_array(self.m + other.m, self.n)

    def __sub__(self, other: "VahlenMatrix") -> "VahlenMatrix":
        return VahlenMatrix.from_array(self.m - other.m, self.n)

    def scale(self, s) -> "VahlenMatrix":
        return VahlenMatrix.from_array(self.m * s, self.n)

    def bar(self) -> "VahlenMatrix":
        return VahlenMatrix.from_array(mat_bar(self.alg, self.m), self.n)

    def transpose(self) -> "VahlenMatrix":
        return VahlenMatrix.from_array(mat_transpose(self.alg, self.m), self.n)

    def tilde(self) -> "VahlenMatrix":
        return VahlenMatrix.from_array(mat_tilde(self.alg, self.m), self.n)

    def pseudo_det(self) -> Multivector:
        return Multivector(self.sig, mat_pseudo_det(self.alg, self.m))

    def inverse(self) -> "VahlenMatrix":
        pd = self.pseudo_det()
        if not pd.is_scalar() or abs(pd.scalar_part) < SCALAR_TOL * (1 + self.max_abs()) ** 2:
            raise SingularElement("pseudo-determinant is not a nonzero scalar")
        return self.bar().scale(1.0 / pd.scalar_part)

    def max_abs(self) -> float:
        return float(np.abs(self.m).max())

    def allclose(self, other: "VahlenMatrix", atol: float = 1e-12) -> bool:
        return bool(np.abs(self.m - other.m).max() <= atol)

    def __repr__(self) -> str:
        return f"VahlenMatrix(a={self.a!r}, b={self.b!r}, c={self.c!r}, d={self.d!r})"


def is_vahlen(M: VahlenMatrix, tol: float = SCALAR_TOL) -> tuple[bool, dict]:
    """Check the Vahlen conditions; returns the verdict and per-condition diagnostics."""
    diag: dict[str, bool | float] = {}
    for name in "abcd":
        diag[f"{name}_in_group"] = in_clifford_group(getattr(M, name), tol)
    pd = M.pseudo_det()
    scale = (1.0 + M.max_abs()) ** 2
    diag["pseudo_det_scalar"] = pd.is_scalar(tol)
    diag["pseudo_det"] = complex(pd.scalar_part) if pd.is_complex else float(pd.scalar_part)
    diag["pseudo_det_nonzero"] = abs(pd.scalar_part) > tol * scale
    a, b, c, d = M.a, M.b, M.c, M.d
    checks = {
        "ac_t_vector": a * c.transpose(),
        "bd_t_vector": b * d.transpose(),
        "a_t_b_vector": a.transpose() * b,
        "c_t_d_vector": c.transpose() * d,
    }
    for key, val in checks.items():
        diag[key] = val.is_vector(tol)
    ok = all(v for k, v in diag.items() if k != "pseudo_det")
    return ok, diag


def mobius_apply(M: VahlenMatrix, x, check: bool = True):
    """Linear fractional action ``(a x + b)(c x + d)^{-1}``."""
    if check:
        ok, diag = is_vahlen(M)
        if not ok:
            failed = [k for k, v in diag.items() if v is False]
            raise InvalidVahlen(f"not a Vahlen matrix: {failed}")
    scale = 1.0 + M.max_abs()
    if x is INFINITY:
        if M.c.is_zero(SCALAR_TOL * scale):
            return INFINITY
        return M.a * invert(M.c)
    x = as_vector(x, M.n)
    den = M.c * x + M.d
    if den.is_zero(SCALAR_TOL * scale * (1 + x.max_abs())):
        return INFINITY
    try:
        out = (M.a * x + M.b) * invert(den)
    except SingularElement:
        return INFINITY
    return out.grade(1)


# ---------------------------------------------------------------------------
# light-cone model
# ---------------------------------------------------------------------------


def lightcone_embed(x) -> VahlenMatrix:
    """The null vector ``(x, -x^2; 1, -x)`` of R^{n+1,1} representing ``x``."""
    x = as_vector(x)
    return VahlenMatrix(x, -(x * x), 1.0, -x)


def lightcone_coords(M: VahlenMatrix) -> np.ndarray:
    """Coordinates ``(x, lam, mu)`` of ``M = x + lam v_inf + mu v_0``."""
    return np.concatenate([M.a.vector_coords(), [M.m[0, 1, 0], M.m[1, 0, 0]]])


def from_lightcone_coords(w, n: int | None = None) -> VahlenMatrix:
    w = np.asarray(w)
    n = w.shape[-1] - 2 if n is None else n
    x = Multivector.vector(Signature(n, 0), w[:n])
    return VahlenMatrix(x, w[n], w[n + 1], -x)


def lorentz_metric(n: int) -> np.ndarray:
    """Gram matrix of R^{n+1,1} in the basis ``(e_1..e_n, v_inf, v_0)``."""
    G = np.zeros((n + 2, n + 2))
    G[:n, :n] = np.eye(n)
    G[n, n + 1] = G[n + 1, n] = -0.5
    return G


def lorentz_inner(u, w, n: int | None = None) -> np.ndarray:
    u = np.asarray(u)
    w = np.asarray(w)
    n = u.shape[-1] - 2 if n is None else n
    return np.sum(u[..., :n] * w[..., :n], axis=-1) - 0.5 * (u[..., n] * w[..., n + 1] + u[..., n + 1] * w[..., n])


def embed_coords(x) -> np.ndarray:
    """Batched light-cone embedding in coordinates: ``x + |x|^2 v_inf + v_0``."""
    x = np.asarray(x)
    lam = bilinear(x, x)
    return np.concatenate([x, lam[..., None], np.ones_like(lam)[..., None]], axis=-1)


def stereo_project(v, tol: float = SCALAR_TOL):
    """Inverse of :func:`lightcone_embed` on the projective light cone."""
    w = lightcone_coords(v) if isinstance(v, VahlenMatrix) else np.asarray(v)
    n = w.shape[-1] - 2
    mu = w[n + 1]
    if abs(mu) <= tol * (1.0 + np.abs(w).max()):
        raise PointAtInfinity("vector is proportional to v_inf")
    return Multivector.vector(Signature(n, 0), w[:n] / mu)


def to_matrix_model(x: Multivector) -> VahlenMatrix:
    """Algebra isomorphism Cl(n+1, 1) -> 2x2 matrices over Cl(n, 0)."""
    if x.sig.q != 1 or x.sig.p < 1:
        raise SignatureMismatch("expected an element of Cl(n+1, 1)")
    n = x.sig.p - 1
    table = _matrix_model_table(n)
    m = np.tensordot(x.coeffs, table, axes=(0, 0))
    return VahlenMatrix.from_array(m, n)


def from_matrix_model(M: VahlenMatrix) -> Multivector:
    n = M.n
    table = _matrix_model_table(n).reshape(1 << (n + 2), -1)
    coeffs = np.linalg.solve(table.T, M.m.reshape(-1)) if not np.iscomplexobj(M.m) else (
        np.linalg.solve(table.T.astype(complex), M.m.reshape(-1))
    )
    return Multivector(Signature(n + 1, 1), coeffs)


@lru_cache(maxsize=None)
def _matrix_model_table(n: int) -> np.ndarray:
    alg = algebra(n, 0)
    gens = []
    for i in range(n):
        e = np.zeros(alg.size)
        e[1 << i] = 1.0
        g = np.zeros((2, 2, alg.size))
        g[0, 0] = e
        g[1, 1] = -e
        gens.append(g)
    g = np.zeros((2, 2, alg.size))
    g[0, 1, 0] = -1.0
    g[1, 0, 0] = 1.0
    gens.append(g)  # squares to -1
    g = np.zeros((2, 2, alg.size))
    g[0, 1, 0] = 1.0
    g[1, 0, 0] = 1.0
    gens.append(g)  # squares to +1
    size = 1 << (n + 2)
    table = np.zeros((size, 2, 2, alg.size))
    for blade in range(size):
        m = mat_identity(alg)
        for bit in range(n + 2):
            if blade >> bit & 1:
                m = mat_mul(alg, m, gens[bit])
        table[blade] = m
    table.setflags(write=False)
    return table


# ---------------------------------------------------------------------------
# cross-ratio
# ---------------------------------------------------------------------------


def cross_ratio(v0, v1, v2, v3, tol: float = SCALAR_TOL) -> tuple[Multivector, bool]:
    """Clifford cross-ratio ``(v1-v0)(v2-v1)^{-1}(v2-v3)(v3-v0)^{-1}``."""
    pts = [as_vector(v) for v in (v0, v1, v2, v3)]
    p0, p1, p2, p3 = pts
    scale = max(p.max_abs() for p in pts) + 1.0
    d21 = p2 - p1
    d30 = p3 - p0
    if d21.max_abs() <= tol * scale or d30.max_abs() <= tol * scale:
        raise CoincidentPoints("cross-ratio needs v1 != v2 and v0 != v3")
    cr = (p1 - p0) * invert(d21) * (p2 - p3) * invert(d30)
    return cr, cr.is_scalar(tol)


def cross_ratio_field(alg: Algebra, v0, v1, v2, v3) -> np.ndarray:
    """Batched cross-ratio of coordinate arrays; returns multivector arrays."""
    a = alg.from_vectors(np.asarray(v1) - np.asarray(v0))
    b = alg.from_vectors(alg.vec_inverse(np.asarray(v2) - np.asarray(v1)))
    c = alg.from_vectors(np.asarray(v2) - np.asarray(v3))
    d = alg.from_vectors(alg.vec_inverse(np.asarray(v3) - np.asarray(v0)))
    return alg.mul_chain(a, b, c, d)


def random_vahlen(n: int, rng: np.random.Generator, factors: int = 3, complex_: bool = False) -> VahlenMatrix:
    """Product of random non-null light-cone-model vectors, scaled to unit pseudo-determinant modulus."""
    sig = Signature(n, 0)
    M = VahlenMatrix.identity(n)
    for _ in range(factors):
        while True:
            x = rng.normal(size=n) + (1j * rng.normal(size=n) if complex_ else 0)
            lam, mu = rng.normal(size=2) + (1j * rng.normal(size=2) if complex_ else 0)
            sq = bilinear(x, x) - lam * mu
            if abs(sq) > 0.1:
                break
        xv = Multivector.vector(sig, x)
        M = M @ VahlenMatrix(xv, lam, mu, -xv).scale(1.0 / np.sqrt(abs(sq)))
    return M
