"""Extended flat frames, simple factors and the dressing action.

Frames are sampled at finitely many spectral values ``lam``; simple
factors are stored exactly by ``alpha`` and a null vector ``u`` spanning
the line ``L``. Light-cone vectors use coordinates ``(a, lam, mu)`` for
``a + lam v_inf + mu v_0``; in the 2x2 Clifford model such a vector is
``(a, lam; mu, -a)``.

The group element used for dressing is the Clifford lift
``p(lam) = 1 + (t - 1) P_L`` with ``t = (alpha - lam)/(alpha + lam)`` and
``P_L = u (rho u) / (u (rho u) + (rho u) u)``; its adjoint action on
vectors is the rational loop ``t pi_+ + pi_0 + pi_- / t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .clifford import (
    Algebra,
    algebra,
    bilinear,
    lorentz_inner,
    lorentz_metric,
    mat_exp,
    mat_identity,
    mat_inverse,
    mat_mul,
)
from .errors import (
    DegenerateLine,
    EqualParameters,
    InsufficientSamples,
    InvalidAlpha,
    InvalidParameter,
    MissingAlphaSample,
    NullSeed,
    OmegaDegenerate,
    OutOfChart,
    PoleEvaluation,
)
from .surface import ChristoffelPair, SurfaceGrid, differential, spanning_tree_sweep
from .transform import _edge_data, _offdiag, integrate_offdiag_frame, offdiag_edge_step, sym_formula

SAMPLE_TOL = 1e-12
DEFAULT_EPS = 1e-3


# ---------------------------------------------------------------------------
# light-cone vectors in the matrix model
# ---------------------------------------------------------------------------


def lc_to_matrix(alg: Algebra, w) -> np.ndarray:
    """``(a, lam, mu) -> (a, lam; mu, -a)`` batched over leading axes."""
    w = np.asarray(w)
    n = w.shape[-1] - 2
    out = np.zeros(w.shape[:-1] + (2, 2, alg.size), dtype=np.result_type(w, float))
    A = alg.from_vectors(w[..., :n])
    out[..., 0, 0, :] = A
    out[..., 1, 1, :] = -A
    out[..., 0, 1, 0] = w[..., n]
    out[..., 1, 0, 0] = w[..., n + 1]
    return out


def matrix_to_lc(alg: Algebra, M) -> np.ndarray:
    M = np.asarray(M)
    a = alg.vector_part(M[..., 0, 0, :])
    return np.concatenate([a, M[..., 0, 1, 0:1], M[..., 1, 0, 0:1]], axis=-1)


def rho(w) -> np.ndarray:
    """Reflection negating the ``R^n`` block."""
    w = np.array(w, copy=True)
    w[..., :-2] *= -1
    return w


def complex_embed(x) -> np.ndarray:
    """``x + (x, x) v_inf + v_0`` with the complex bilinear square."""
    x = np.asarray(x)
    lam = bilinear(x, x)
    return np.concatenate([x, lam[..., None], np.ones_like(lam)[..., None]], axis=-1)


def _chart_defect(w) -> np.ndarray:
    """``|lam mu| / |w|^2``; zero exactly when the line is ``<v_0>`` or ``<v_inf>``."""
    n = w.shape[-1] - 2
    scale = np.sum(np.abs(w) ** 2, axis=-1)
    with np.errstate(all="ignore"):
        return np.abs(w[..., n] * w[..., n + 1]) / scale


# ---------------------------------------------------------------------------
# simple factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimpleFactor:
    """``p_{alpha, L}`` with ``L`` spanned by the null vector ``u``."""

    alpha: complex
    u: np.ndarray
    seed_v: np.ndarray | None = None
    f_o: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.u.shape[-1] - 2

    @property
    def rho_u(self) -> np.ndarray:
        return rho(self.u)

    def t(self, lam) -> complex:
        return (self.alpha - lam) / (self.alpha + lam)

    def projections(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(pi_+, pi_0, pi_-)`` as matrices acting on coordinate columns."""
        G = lorentz_metric(self.n)
        u, ru = self.u, self.rho_u
        c = lorentz_inner(u, ru)
        pp = np.outer(u, G @ ru) / c
        pm = np.outer(ru, G @ u) / c
        return pp, np.eye(self.n + 2) - pp - pm, pm

    def to_json(self) -> dict:
        out = {"alpha": [float(np.real(self.alpha)), float(np.imag(self.alpha))]}
        if self.seed_v is not None:
            out["seed_v"] = [float(x) for x in np.real(self.seed_v)]
            out["f_o"] = [float(x) for x in np.real(self.f_o)]
        else:
            out["u"] = [[float(z.real), float(z.imag)] for z in np.asarray(self.u, dtype=complex)]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SimpleFactor":
        alpha = complex(*data["alpha"])
        if "seed_v" in data:
            return make_simple_factor(alpha, data["seed_v"], data["f_o"])
        u = np.array([complex(re, im) for re, im in data["u"]])
        return factor_from_line(alpha, u)


def _check_alpha(alpha) -> complex:
    alpha = complex(alpha)
    a2 = alpha * alpha
    if alpha == 0 or abs(a2.imag) > 1e-12 * (1.0 + abs(a2)):
        raise InvalidAlpha(f"alpha^2 must be real and nonzero, got {a2}")
    return alpha


def factor_from_line(alpha, u) -> SimpleFactor:
    alpha = _check_alpha(alpha)
    u = np.asarray(u, dtype=complex)
    if _chart_defect(u) < 1e-12:
        raise DegenerateLine("the line is <v_0> or <v_inf>")
    return SimpleFactor(alpha, u)


def make_simple_factor(alpha, v, f_at_o) -> SimpleFactor:
    """Factor whose line is the null line of ``alpha (v - f(o))``."""
    alpha = _check_alpha(alpha)
    x = np.asarray(v, dtype=float) - np.asarray(f_at_o, dtype=float)
    if np.linalg.norm(x) < 1e-12:
        raise NullSeed("v coincides with f(o)")
    u = complex_embed(alpha * x)
    return SimpleFactor(alpha, u, np.asarray(v, dtype=float), np.asarray(f_at_o, dtype=float))


def evaluate_factor(p: SimpleFactor, lam) -> np.ndarray:
    """``t pi_+ + pi_0 + pi_- / t`` in the vector representation."""
    lam = complex(lam)
    if abs(lam - p.alpha) < SAMPLE_TOL * (1 + abs(p.alpha)) or abs(lam + p.alpha) < SAMPLE_TOL * (1 + abs(p.alpha)):
        raise PoleEvaluation(f"lambda = {lam} is a pole of the factor")
    t = p.t(lam)
    pp, p0, pm = p.projections()
    return t * pp + p0 + pm / t


def factor_lift(alg: Algebra, alpha: complex, U: np.ndarray, lam, inverse: bool = False) -> np.ndarray:
    """Clifford lift ``1 + (t - 1) P`` (or its inverse) for a field of lines.

    ``U`` holds the lines as 2x2 Clifford matrices.
    """
    t = (alpha - lam) / (alpha + lam)
    s = (1.0 / t - 1.0) if inverse else (t - 1.0)
    return mat_identity(alg, U.shape[:-3], dtype=complex) + s * _projector(alg, U)


def _projector(alg: Algebra, U: np.ndarray) -> np.ndarray:
    RU = lc_to_matrix(alg, rho(matrix_to_lc(alg, U)))
    num = mat_mul(alg, U, RU)
    den = num + mat_mul(alg, RU, U)
    return num / den[..., 0, 0, 0][..., None, None, None]


def _projector_derivative(alg: Algebra, U, dU) -> np.ndarray:
    w, dw = matrix_to_lc(alg, U), matrix_to_lc(alg, dU)
    rw, rdw = rho(w), rho(dw)
    c = lorentz_inner(w, rw)
    dc = 2.0 * lorentz_inner(dw, rw)
    N = mat_mul(alg, U, lc_to_matrix(alg, rw))
    dN = mat_mul(alg, dU, lc_to_matrix(alg, rw)) + mat_mul(alg, U, lc_to_matrix(alg, rdw))
    return dN / (-2.0 * c)[..., None, None, None] + N * (dc / (2.0 * c * c))[..., None, None, None]


# ---------------------------------------------------------------------------
# extended frames
# ---------------------------------------------------------------------------


def _key(lam) -> complex:
    return complex(lam)


@dataclass(frozen=True)
class _Dressing:
    parent: "ExtendedFrameField"
    alpha: complex
    U: np.ndarray
    Uhat: np.ndarray
    dUhat: tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ExtendedFrameField:
    """Frames ``Phi(lam)`` per node at finitely many ``lam``, identity at the base node."""

    samples: dict
    grid: SurfaceGrid
    mask: np.ndarray
    pair: ChristoffelPair | None = None
    dressing: _Dressing | None = None
    order: int = 2

    @property
    def alg(self) -> Algebra:
        return algebra(self.grid.ambient_dim)

    @property
    def lambdas(self) -> list[complex]:
        return list(self.samples)

    def frame(self, lam) -> np.ndarray:
        k = _lookup(self.samples, lam)
        if k is None:
            raise MissingAlphaSample(f"no sample at lambda = {lam}")
        return self.samples[k]

    def has(self, lam) -> bool:
        return _lookup(self.samples, lam) is not None

    def maurer_cartan(self, lam) -> tuple[np.ndarray, np.ndarray]:
        """``(A_x, A_y)`` of ``Phi(lam)^{-1} d Phi(lam)`` from the carried structure."""
        alg = self.alg
        if self.dressing is None:
            df = differential(self.pair.f, self.order)
            dfc = differential(self.pair.fc, self.order)
            return tuple(lam * _offdiag(alg, a, b) for a, b in ((df.ax, dfc.ax), (df.ay, dfc.ay)))
        d = self.dressing
        parent = d.parent.maurer_cartan(lam)
        P = factor_lift(alg, d.alpha, d.Uhat, lam)
        Pi = factor_lift(alg, d.alpha, d.Uhat, lam, inverse=True)
        t = (d.alpha - lam) / (d.alpha + lam)
        out = []
        for A, dU in zip(parent, d.dUhat):
            dPi = (1.0 / t - 1.0) * _projector_derivative(alg, d.Uhat, dU)
            out.append(mat_mul(alg, mat_mul(alg, P, A), Pi) + mat_mul(alg, P, dPi))
        return tuple(out)

    def flatness_residual(self, lams: Iterable) -> float:
        """Max deviation of the Maurer-Cartan data from a degree-1 fit in ``lam``."""
        lams = np.array([complex(l) for l in lams])
        if len(lams) < 3:
            raise InsufficientSamples("a linear fit needs at least three samples")
        valid = ~self.mask
        vals = []
        for lam in lams:
            Ax, Ay = self.maurer_cartan(lam)
            vals.append(np.stack([Ax[valid], Ay[valid]]))
        V = np.stack(vals).reshape(len(lams), -1)
        Vd = np.vander(lams, 2)
        coef, *_ = np.linalg.lstsq(Vd, V, rcond=None)
        res = np.abs(V - Vd @ coef).max()
        return float(res / (1.0 + np.abs(V).max()))

    def reality_defect(self) -> float:
        worst = 0.0
        for lam, F in self.samples.items():
            k = _lookup(self.samples, np.conj(lam))
            if k is not None:
                worst = max(worst, _masked_abs(np.conj(F) - self.samples[k], self.mask))
        return worst

    def twisting_defect(self) -> float:
        worst = 0.0
        for lam, F in self.samples.items():
            k = _lookup(self.samples, -lam)
            if k is not None:
                worst = max(worst, _masked_abs(twist(F) - self.samples[k], self.mask))
        return worst

    def base_defect(self) -> float:
        i0, j0 = self.grid.base_index
        I = mat_identity(self.alg)
        return max(float(np.abs(F[i0, j0] - I).max()) for F in self.samples.values())

    def sym(self) -> "object":
        return sym_formula(self.samples, self.grid, self.mask if self.mask.any() else None)


def twist(F: np.ndarray) -> np.ndarray:
    """Conjugation by ``diag(1, -1)``."""
    out = np.array(F, copy=True)
    out[..., 0, 1, :] *= -1
    out[..., 1, 0, :] *= -1
    return out


def _masked_abs(D: np.ndarray, mask: np.ndarray) -> float:
    v = np.abs(D)[~mask]
    return float(np.nanmax(v)) if v.size else 0.0


def _lookup(samples: dict, lam):
    lam = complex(lam)
    for k in samples:
        if abs(complex(k) - lam) <= SAMPLE_TOL * (1.0 + abs(lam)):
            return k
    return None


def default_lambdas(alpha=None, eps: float = DEFAULT_EPS) -> list[complex]:
    """``{0, +-eps, +-2 eps, +-alpha, +-alpha/2, +-2 alpha}`` closed under conjugation."""
    base = [0.0, eps, -eps, 2 * eps, -2 * eps]
    if alpha is not None:
        a = complex(alpha)
        base += [a, -a, a / 2, -a / 2, 2 * a, -2 * a]
    out: list[complex] = []
    for lam in base:
        for z in (complex(lam), np.conj(complex(lam))):
            if _lookup(dict.fromkeys(out), z) is None:
                out.append(z)
    return out


def extended_frame(pair: ChristoffelPair, lambdas: Iterable, order: int = 2) -> ExtendedFrameField:
    """Based frames with Maurer-Cartan form ``lam (0, df; df^c, 0)``."""
    lams = [complex(l) for l in lambdas]
    keys = dict.fromkeys(lams)
    if _lookup(keys, 0) is None:
        raise InsufficientSamples("the sample lambda = 0 is required")
    for lam in lams:
        if _lookup(keys, -lam) is None or _lookup(keys, np.conj(lam)) is None:
            raise InvalidParameter(f"samples must be closed under negation and conjugation (missing partner of {lam})")
    samples = {}
    for lam in lams:
        s = lam.real if lam.imag == 0 else lam
        if lam == 0:
            samples[lam] = mat_identity(algebra(pair.f.ambient_dim), pair.f.shape)
            continue
        frames, _ = integrate_offdiag_frame(pair, s, s, order)
        samples[lam] = frames
    mask = pair.f.node_mask | pair.fc.node_mask
    return ExtendedFrameField(samples, pair.f, mask, pair=pair, order=order)


# ---------------------------------------------------------------------------
# dressing
# ---------------------------------------------------------------------------


def dress(p: SimpleFactor, phi: ExtendedFrameField, chart_tol: float = 1e-10) -> ExtendedFrameField:
    """``p_{alpha,L} Phi p_{alpha,Lhat}^{-1}`` with ``Lhat = Phi(alpha)^{-1} L`` per node.

    Samples at the poles ``+-alpha`` are dropped from the result.
    """
    alg = phi.alg
    alpha = p.alpha
    if not phi.has(alpha):
        raise MissingAlphaSample(f"the frame field has no sample at alpha = {alpha}")
    Fa = phi.frame(alpha)
    U = lc_to_matrix(alg, p.u.astype(complex))
    Uhat = mat_mul(alg, mat_mul(alg, mat_inverse(alg, Fa), U), Fa)
    w = matrix_to_lc(alg, Uhat)
    with np.errstate(all="ignore"):
        defect = _chart_defect(w)
    out_of_chart = ~np.isfinite(defect) | (defect < chart_tol)
    mask = phi.mask | out_of_chart
    if mask.all():
        raise OutOfChart("every node violates the domain condition")
    Uhat = np.where(out_of_chart[..., None, None, None], lc_to_matrix(alg, p.u.astype(complex)), Uhat)
    Aa = phi.maurer_cartan(alpha)
    dUhat = tuple(-(mat_mul(alg, A, Uhat) - mat_mul(alg, Uhat, A)) for A in Aa)
    samples = {}
    for lam, F in phi.samples.items():
        if abs(lam - alpha) < 1e-9 * (1 + abs(alpha)) or abs(lam + alpha) < 1e-9 * (1 + abs(alpha)):
            continue
        P = factor_lift(alg, alpha, U, lam)
        Pi = factor_lift(alg, alpha, Uhat, lam, inverse=True)
        new = mat_mul(alg, mat_mul(alg, P, F), Pi)
        if complex(lam).imag == 0 and np.isreal(alpha * alpha) and (complex(alpha).imag == 0 or complex(alpha).real == 0):
            imag = np.abs(new.imag)[~mask].max() if (~mask).any() else 0.0
            if imag < 1e-8 * (1 + np.abs(new).max()):
                new = new.real
        samples[lam] = new
    d = _Dressing(phi, alpha, U, Uhat, dUhat)
    return ExtendedFrameField(samples, phi.grid, mask, pair=phi.pair, dressing=d, order=phi.order)


def dress_pair_direct(p: SimpleFactor, pair: ChristoffelPair, order: int = 2, tol: float = 1e-10) -> ChristoffelPair:
    """Darboux transform with parameter ``alpha^2`` from the light-cone system.

    Integrates ``omega`` with ``omega(o) = u`` and ``d omega = [omega, A(alpha)]``
    along the spanning tree; ``g = a / (mu alpha)``.
    """
    f, fc = pair.f, pair.fc
    n = f.ambient_dim
    alg = algebra(n)
    alpha = p.alpha
    df, dfc = differential(f, order), differential(fc, order)

    def step(state, src, dst, axis):
        W = state.reshape(-1, 2, 2, alg.size)
        h, ch, d0, d1, dm, hc = _edge_data(f.values, df.ax, df.ay, f.hx, f.hy, src, dst, axis)
        _, cch, c0, c1, cm, chc = _edge_data(fc.values, dfc.ax, dfc.ay, f.hx, f.hy, src, dst, axis)
        top = tuple(alpha * x for x in (ch, d0, d1, dm, hc))
        bot = tuple(alpha * x for x in (cch, c0, c1, cm, chc))
        E = mat_exp(alg, offdiag_edge_step(alg, top, bot, h))
        W = mat_mul(alg, mat_mul(alg, mat_inverse(alg, E), W), E)
        return W.reshape(len(W), -1)

    W0 = lc_to_matrix(alg, p.u.astype(complex))
    W = spanning_tree_sweep(f.shape, f.base_index, W0.reshape(-1), step).reshape(f.shape + (2, 2, alg.size))
    w = matrix_to_lc(alg, W)
    scale = np.sum(np.abs(w) ** 2, axis=-1)
    drift = np.abs(lorentz_inner(w, w)) / scale
    a, mu = w[..., :n], w[..., n + 1]
    with np.errstate(all="ignore"):
        g = a / (mu * alpha)[..., None]
        gn = np.sqrt(np.sum(np.abs(g) ** 2, axis=-1))
    bad = (np.abs(mu) < tol * np.sqrt(scale)) | ~np.isfinite(gn) | (gn < 1e-8) | (gn > 1e8)
    if bad.all():
        raise OmegaDegenerate("omega degenerates at every node")
    imag = float(np.nanmax(np.where(bad, 0.0, np.abs(g.imag).max(axis=-1) / np.maximum(gn, 1e-300))))
    g = np.where(bad[..., None], np.nan, g.real)
    r = float(np.real(alpha * alpha))
    with np.errstate(all="ignore"):
        ginv = alg.vec_inverse(g)
        G = alg.from_vectors(g)
        Gi = alg.from_vectors(ginv)
        dfh = tuple(r * alg.vector_part(alg.mul_chain(G, alg.from_vectors(c), G)) for c in (dfc.ax, dfc.ay))
        dfhc = tuple(alg.vector_part(alg.mul_chain(Gi, alg.from_vectors(c), Gi)) / r for c in (df.ax, df.ay))
    mask = bad | f.node_mask
    fh = replace(f, values=f.values + g, exact_d=dfh, mask=mask)
    fhc = replace(fc, values=fc.values + ginv / r, exact_d=dfhc, mask=mask)
    diag = {
        "lightcone_drift": float(np.nanmax(np.where(mask, 0.0, drift))),
        "imaginary_part": imag,
        "masked_fraction": float(mask.mean()),
        "g": g,
    }
    return ChristoffelPair(fh, fhc, pair.q, diag)


# ---------------------------------------------------------------------------
# permutability
# ---------------------------------------------------------------------------


def circle_samples(p1: SimpleFactor, p2: SimpleFactor, count: int = 64) -> np.ndarray:
    """``count`` points on a circle well inside the poles ``+-alpha_1``, ``+-alpha_2``."""
    R = 0.6 * min(abs(p1.alpha), abs(p2.alpha))
    theta = 2 * np.pi * (np.arange(count) + 0.5) / count
    return R * np.exp(1j * theta)


def permutability_factors(p1: SimpleFactor, p2: SimpleFactor, lams=None) -> tuple[SimpleFactor, SimpleFactor, float]:
    """Transported factors with ``p1' p2 = p2' p1``; returns the sampled residual."""
    a1, a2 = complex(p1.alpha), complex(p2.alpha)
    if abs(a1 * a1 - a2 * a2) < 1e-12 * (1 + abs(a1) ** 2):
        raise EqualParameters("permutability needs alpha_1^2 != alpha_2^2")
    u1 = evaluate_factor(p2, a1) @ p1.u
    u2 = evaluate_factor(p1, a2) @ p2.u
    q1 = factor_from_line(a1, u1)
    q2 = factor_from_line(a2, u2)
    lams = circle_samples(p1, p2) if lams is None else lams
    res = 0.0
    for lam in lams:
        lhs = evaluate_factor(q1, lam) @ evaluate_factor(p2, lam)
        rhs = evaluate_factor(q2, lam) @ evaluate_factor(p1, lam)
        res = max(res, float(np.abs(lhs - rhs).max()))
    return q1, q2, res
