"""Darboux, T- and Bianchi transforms of Christoffel pairs.

All path integrations follow the row-then-column spanning tree of
:func:`isothermic.surface.spanning_tree_sweep`. Edge data come from the
node values (chords) and the node differentials of the input pair; along
an edge the differential is reconstructed by cubic Hermite interpolation,
which keeps both integrators fourth-order accurate.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .clifford import (
    Algebra,
    algebra,
    bilinear,
    cross_ratio_field,
    embed_coords,
    mat_exp,
    mat_identity,
    mat_mul,
    mat_pseudo_det,
)
from .errors import (
    AllSingular,
    DegenerateDenominator,
    GridMismatch,
    InsufficientSamples,
    IntegrationDiverged,
    InvalidParameter,
    NotUnitNormal,
    SeedSingular,
)
from .surface import (
    ChristoffelPair,
    GridOneForm,
    SurfaceGrid,
    differential,
    isothermic_residual,
    masked_max,
    spanning_tree_sweep,
)

G_MIN, G_MAX = 1e-8, 1e8


def max_workers() -> int:
    """Thread cap from ``ISOTHERMIC_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("ISOTHERMIC_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# edge helpers
# ---------------------------------------------------------------------------


def _edge_data(values, dx, dy, hx, hy, src, dst, axis):
    """Chord, endpoint derivatives and Hermite midpoint data along tree edges.

    Derivatives are taken with respect to the edge parameter ``t in [0, h]``.
    """
    h = hx if axis == 0 else hy
    comp = dx if axis == 0 else dy
    sgn = np.sign(dst[axis] - src[axis])[:, None]
    f0, f1 = values[src], values[dst]
    d0, d1 = sgn * comp[src], sgn * comp[dst]
    chord = f1 - f0
    d_mid = 1.5 * chord / h - 0.25 * (d0 + d1)
    f_mid = 0.5 * (f0 + f1) + 0.125 * h * (d0 - d1)
    return h, chord, d0, d1, d_mid, f_mid - f0


# ---------------------------------------------------------------------------
# Darboux transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DarbouxResult:
    """``fhat = f + g`` and ``fhat_c = f^c + (r g)^{-1}`` on unmasked nodes."""

    fhat: SurfaceGrid
    fhat_c: SurfaceGrid
    g: SurfaceGrid
    singular_mask: np.ndarray
    r: float
    v: np.ndarray
    q: float

    def as_pair(self) -> ChristoffelPair:
        return ChristoffelPair(self.fhat, self.fhat_c, self.q)

    @property
    def unmasked_fraction(self) -> float:
        return float(1.0 - self.singular_mask.mean())


def riccati_rhs(alg: Algebra, r, g, dfc, df) -> np.ndarray:
    """``r g df^c g - df`` for batches of vectors."""
    G = alg.from_vectors(g)
    return r * alg.vector_part(alg.mul_chain(G, alg.from_vectors(dfc), G)) - df


def darboux(pair: ChristoffelPair, r: float, v, order: int = 2) -> DarbouxResult:
    """Darboux transform ``D_r^v f`` by RK4 integration of the Riccati equation."""
    if r == 0:
        raise InvalidParameter("the Darboux parameter must be nonzero")
    f, fc = pair.f, pair.fc
    v = np.asarray(v)
    g0 = v - f.base_value
    if np.sqrt(np.abs(bilinear(g0, g0))) < G_MIN:
        raise SeedSingular("initial point coincides with f(o)")
    alg = algebra(f.ambient_dim)
    df, dfc = differential(f, order), differential(fc, order)
    fv, fcv = f.values, fc.values

    def step(g, src, dst, axis):
        h, _, a0, a1, am, _ = _edge_data(fv, df.ax, df.ay, f.hx, f.hy, src, dst, axis)
        _, _, c0, c1, cm, _ = _edge_data(fcv, dfc.ax, dfc.ay, f.hx, f.hy, src, dst, axis)
        with np.errstate(all="ignore"):
            k1 = riccati_rhs(alg, r, g, c0, a0)
            k2 = riccati_rhs(alg, r, g + 0.5 * h * k1, cm, am)
            k3 = riccati_rhs(alg, r, g + 0.5 * h * k2, cm, am)
            k4 = riccati_rhs(alg, r, g + h * k3, c1, a1)
            out = g + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            nrm = np.sqrt(np.abs(bilinear(out, out)))
        bad = ~np.isfinite(nrm) | (nrm < G_MIN) | (nrm > G_MAX)
        out[bad] = np.nan
        return out

    g = spanning_tree_sweep(f.shape, f.base_index, g0.astype(np.result_type(g0, fv, float)), step)
    with np.errstate(all="ignore"):
        nrm = np.sqrt(np.abs(bilinear(g, g)))
    mask = ~np.isfinite(nrm) | (nrm < G_MIN) | (nrm > G_MAX)
    if mask.all():
        raise AllSingular("every node is singular")
    with np.errstate(all="ignore"):
        ginv = alg.vec_inverse(g)
        G = alg.from_vectors(g)
        dfh_x = r * alg.vector_part(alg.mul_chain(G, alg.from_vectors(dfc.ax), G))
        dfh_y = r * alg.vector_part(alg.mul_chain(G, alg.from_vectors(dfc.ay), G))
        Gi = alg.from_vectors(ginv)
        dfhc_x = alg.vector_part(alg.mul_chain(Gi, alg.from_vectors(df.ax), Gi)) / r
        dfhc_y = alg.vector_part(alg.mul_chain(Gi, alg.from_vectors(df.ay), Gi)) / r
    fhat = replace(f, values=f.values + g, exact_d=(dfh_x, dfh_y), mask=mask | f.node_mask)
    fhat_c = replace(fc, values=fc.values + ginv / r, exact_d=(dfhc_x, dfhc_y), mask=mask | fc.node_mask)
    gg = replace(f, values=g, exact_d=None, mask=mask)
    return DarbouxResult(fhat, fhat_c, gg, mask, float(r), v, pair.q)


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameField:
    """Per-node 2x2 Clifford matrices ``frames[i, j]`` over a grid."""

    frames: np.ndarray
    grid: SurfaceGrid

    @property
    def alg(self) -> Algebra:
        return algebra(self.grid.ambient_dim)

    def act(self, point: str = "zero") -> np.ndarray:
        """``F . 0`` (``b d^{-1}``) or ``F . inf`` (``a c^{-1}``) as vector arrays."""
        alg = self.alg
        F = self.frames
        if point == "zero":
            num, den = F[..., 0, 1, :], F[..., 1, 1, :]
        else:
            num, den = F[..., 0, 0, :], F[..., 1, 0, :]
        with np.errstate(all="ignore"):
            return alg.vector_part(alg.mul(num, alg.inverse(den)))

    def partner(self) -> SurfaceGrid:
        """``F . inf``, masked where it leaves the ball of radius ``1e8``."""
        with np.errstate(all="ignore"):
            fh = self.act("inf")
            big = ~np.all(np.isfinite(fh), axis=-1) | (np.sqrt(np.abs(bilinear(fh, fh))) > G_MAX)
        fh = np.where(big[..., None], np.nan, fh)
        return replace(self.grid, values=fh, exact_d=None, mask=big)

    def pseudo_det(self) -> np.ndarray:
        return mat_pseudo_det(self.alg, self.frames)[..., 0]


def _offdiag(alg: Algebra, top, bottom) -> np.ndarray:
    shape = np.shape(top)[:-1]
    dtype = np.result_type(np.asarray(top).dtype, np.asarray(bottom).dtype, float)
    out = np.zeros(shape + (2, 2, alg.size), dtype=dtype)
    out[..., 0, 1, :] = alg.from_vectors(top)
    out[..., 1, 0, :] = alg.from_vectors(bottom)
    return out


def _commutator(alg, A, B):
    return mat_mul(alg, A, B) - mat_mul(alg, B, A)


def offdiag_edge_step(alg, top: tuple, bottom: tuple, h: float, half: bool = False):
    """Fourth-order Magnus exponent for ``F' = F (0 top(t); bottom(t) 0)``.

    ``top`` and ``bottom`` are ``(chord, d0, d1, d_mid, half_chord)`` tuples.
    With ``half`` the exponent covers only the first half of the edge.
    """
    tc, t0, t1, tm, thc = top
    bc, b0, b1, bm, bhc = bottom
    A0 = _offdiag(alg, t0, b0)
    if half:
        Am = _offdiag(alg, tm, bm)
        return _offdiag(alg, thc, bhc) + (0.5 * h) ** 2 / 12.0 * _commutator(alg, A0, Am)
    A1 = _offdiag(alg, t1, b1)
    return _offdiag(alg, tc, bc) + h * h / 12.0 * _commutator(alg, A0, A1)


def renormalize(alg: Algebra, F: np.ndarray) -> np.ndarray:
    pd = mat_pseudo_det(alg, F)[..., 0]
    root = np.sqrt(pd.astype(complex)) if np.iscomplexobj(F) or np.any(np.real(pd) < 0) else np.sqrt(pd)
    if not np.iscomplexobj(F):
        root = np.real(root)
    return F / root[..., None, None, None]


def integrate_offdiag_frame(pair: ChristoffelPair, top_scale, bottom_scale, order: int = 2, dual_weight=None):
    """Frame with ``F(o) = 1`` and MC form ``(0, top_scale df; bottom_scale df^c, 0)``.

    With ``dual_weight`` set, also integrates ``d F^c = d_{22} df^c d_{22}^t``
    (Simpson's rule with the frame at edge midpoints) and returns it.
    """
    f, fc = pair.f, pair.fc
    alg = algebra(f.ambient_dim)
    df, dfc = differential(f, order), differential(fc, order)
    dtype = np.result_type(np.asarray(top_scale), np.asarray(bottom_scale), f.values, float)
    n = f.ambient_dim

    def pieces(src, dst, axis):
        h, ch, d0, d1, dm, hc = _edge_data(f.values, df.ax, df.ay, f.hx, f.hy, src, dst, axis)
        _, cch, c0, c1, cm, chc = _edge_data(fc.values, dfc.ax, dfc.ay, f.hx, f.hy, src, dst, axis)
        top = tuple(top_scale * x for x in (ch, d0, d1, dm, hc))
        bot = tuple(bottom_scale * x for x in (cch, c0, c1, cm, chc))
        return h, top, bot, (c0, c1, cm)

    def dual_density(F, c):
        D = alg.from_vectors(c)
        d22 = F[..., 1, 1, :]
        return alg.vector_part(alg.mul_chain(d22, D, alg.transpose(d22)))

    size = alg.size
    with_dual = dual_weight is not None

    def step(state, src, dst, axis):
        F = state[..., : 4 * size].reshape(-1, 2, 2, size)
        h, top, bot, cd = pieces(src, dst, axis)
        E = mat_exp(alg, offdiag_edge_step(alg, top, bot, h))
        F1 = renormalize(alg, mat_mul(alg, F, E))
        out = [F1.reshape(len(F1), -1)]
        if with_dual:
            Em = mat_exp(alg, offdiag_edge_step(alg, top, bot, h, half=True))
            Fm = mat_mul(alg, F, Em)
            Fm = renormalize(alg, Fm)
            a0 = dual_density(F, cd[0])
            a1 = dual_density(F1, cd[1])
            am = dual_density(Fm, cd[2])
            fcv = state[..., 4 * size :] + h / 6.0 * (a0 + 4 * am + a1)
            out.append(fcv)
        return np.concatenate(out, axis=-1)

    init = mat_identity(alg, dtype=dtype).reshape(-1)
    if with_dual:
        init = np.concatenate([init, np.zeros(n, dtype=dtype)])
    state = spanning_tree_sweep(f.shape, f.base_index, init, step)
    frames = state[..., : 4 * size].reshape(f.shape + (2, 2, size))
    dual = state[..., 4 * size :] if with_dual else None
    return frames, dual


def t_transform(pair: ChristoffelPair, r: float, order: int = 2) -> tuple[ChristoffelPair, FrameField]:
    """T-transform ``T_r`` with based frame ``F_r(o) = 1``.

    Returns the transformed Christoffel pair ``(F_r . 0, dual)`` and the
    frame; ``frame.partner()`` gives the Darboux partner ``F_r . inf``.
    """
    alg = algebra(pair.f.ambient_dim)
    frames, dual = integrate_offdiag_frame(pair, 1.0, r, order, dual_weight=True)
    frame = FrameField(frames, pair.f)
    fr = frame.act("zero")
    if not np.all(np.isfinite(fr)):
        raise IntegrationDiverged("frame integration produced non-finite values")
    dfc = differential(pair.fc, order)
    df = differential(pair.f, order)
    d22 = frames[..., 1, 1, :]
    d22inv = alg.inverse(d22)
    d22t = alg.transpose(d22)
    d22tinv = alg.inverse(d22t)
    dfr = tuple(alg.vector_part(alg.mul_chain(d22tinv, alg.from_vectors(a), d22inv)) for a in (df.ax, df.ay))
    dfrc = tuple(alg.vector_part(alg.mul_chain(d22, alg.from_vectors(a), d22t)) for a in (dfc.ax, dfc.ay))
    f_r = replace(pair.f, values=fr, exact_d=dfr, mask=None)
    fc_r = replace(pair.fc, values=dual, exact_d=dfrc, mask=None)
    return ChristoffelPair(f_r, fc_r, pair.q), frame


def gauge_R(r: float, n: int) -> np.ndarray:
    """``R_r = (0, sign(r)/sqrt|r|; sqrt|r|, 0)`` as a Clifford matrix."""
    alg = algebra(n)
    R = np.zeros((2, 2, alg.size))
    R[0, 1, 0] = np.sign(r) / np.sqrt(abs(r))
    R[1, 0, 0] = np.sqrt(abs(r))
    return R


# ---------------------------------------------------------------------------
# Bianchi permutability
# ---------------------------------------------------------------------------


def bianchi_fourth(f: SurfaceGrid, f1: SurfaceGrid, f2: SurfaceGrid, r1: float, r2: float, tol: float = 1e-10) -> SurfaceGrid:
    """Algebraic fourth surface of a Bianchi quadrilateral, node by node."""
    if r1 == r2:
        raise InvalidParameter("Bianchi permutability needs r1 != r2")
    if not (f.congruent(f1) and f.congruent(f2)):
        raise GridMismatch("surfaces are sampled on different grids")
    alg = algebra(f.ambient_dim)
    with np.errstate(all="ignore"):
        g1i = alg.vec_inverse(f1.values - f.values)
        g2i = alg.vec_inverse(f2.values - f.values)
        den = r2 * g1i - r1 * g2i
        dn = np.sqrt(np.abs(bilinear(den, den)))
        num = r2 * alg.mul(alg.from_vectors(f1.values), alg.from_vectors(g1i)) - r1 * alg.mul(
            alg.from_vectors(f2.values), alg.from_vectors(g2i)
        )
        out = alg.mul(num, alg.from_vectors(alg.vec_inverse(den)))
    scale = 1.0 + np.sqrt(np.abs(bilinear(g1i, g1i))) + np.sqrt(np.abs(bilinear(g2i, g2i)))
    mask = ~np.isfinite(dn) | (dn < tol * scale) | f.node_mask | f1.node_mask | f2.node_mask
    if mask.all():
        raise DegenerateDenominator("every node has a degenerate denominator")
    values = np.where(mask[..., None], np.nan, alg.vector_part(out))
    return replace(f, values=values, exact_d=None, mask=mask)


def cross_ratio_deviation(v0, v1, v2, v3, target: float) -> np.ndarray:
    """Max-coefficient deviation of the nodewise cross-ratio from ``target``."""
    v0 = np.asarray(v0)
    alg = algebra(v0.shape[-1])
    with np.errstate(all="ignore"):
        C = cross_ratio_field(alg, v0, v1, v2, v3)
    C = C.copy()
    C[..., 0] -= target
    return np.abs(C).max(axis=-1)


@dataclass(frozen=True)
class BianchiCube:
    surfaces: dict
    face_report: dict
    sphere_residual: np.ndarray
    mask: np.ndarray

    def max_face_deviation(self) -> float:
        return max(v["max_deviation"] for v in self.face_report.values())


def bianchi_cube(pair: ChristoffelPair, r1: float, r2: float, r3: float, v1, v2, v3, order: int = 2) -> BianchiCube:
    """Cube of eight surfaces from three Darboux transforms and Bianchi closure."""
    rs = (r1, r2, r3)
    if len(set(rs)) < 3 or 0 in rs:
        raise InvalidParameter("r1, r2, r3 must be distinct and nonzero")
    f = pair.f
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        jobs = [pool.submit(darboux, pair, r, v, order) for r, v in ((r1, v1), (r2, v2), (r3, v3))]
        f1, f2, fp = (j.result().fhat for j in jobs)
    f12 = bianchi_fourth(f, f1, f2, r1, r2)
    fp1 = bianchi_fourth(f, f1, fp, r1, r3)
    fp2 = bianchi_fourth(f, f2, fp, r2, r3)
    fhp = bianchi_fourth(fp, fp1, fp2, r1, r2)
    S = {"f": f, "f1": f1, "f2": f2, "f3": fp, "f12": f12, "f13": fp1, "f23": fp2, "f123": fhp}
    mask = np.zeros(f.shape, dtype=bool)
    for s in S.values():
        mask |= s.node_mask
    faces = {
        "f,f1,f12,f2": (("f", "f1", "f12", "f2"), r2 / r1),
        "f3,f13,f123,f23": (("f3", "f13", "f123", "f23"), r2 / r1),
        "f,f1,f13,f3": (("f", "f1", "f13", "f3"), r3 / r1),
        "f2,f12,f123,f23": (("f2", "f12", "f123", "f23"), r3 / r1),
        "f,f2,f23,f3": (("f", "f2", "f23", "f3"), r3 / r2),
        "f1,f12,f123,f13": (("f1", "f12", "f123", "f13"), r3 / r2),
    }
    report = {}
    for name, (keys, target) in faces.items():
        dev = cross_ratio_deviation(*(S[k].values for k in keys), target)
        report[name] = {"target": target, "max_deviation": masked_max(dev, ~mask)}
    pts = np.stack([embed_coords(S[k].values) for k in S], axis=-2)
    with np.errstate(all="ignore"):
        pts = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
        sv = np.linalg.svd(np.where(mask[..., None, None], 0.0, pts), compute_uv=False)
        sphere = np.where(mask, np.nan, sv[..., 4] / sv[..., 0]) if sv.shape[-1] > 4 else np.zeros(f.shape)
    return BianchiCube(S, report, sphere, mask)


def dual_fourth(pair: ChristoffelPair, d1: DarbouxResult, d2: DarbouxResult, fhat: SurfaceGrid) -> SurfaceGrid:
    """Christoffel dual of the fourth surface, ``f1^c + (r2 (fhat - f1))^{-1}``."""
    alg = algebra(pair.f.ambient_dim)
    with np.errstate(all="ignore"):
        vals = d1.fhat_c.values + alg.vec_inverse(d2.r * (fhat.values - d1.fhat.values))
    return replace(pair.fc, values=vals, exact_d=None, mask=fhat.node_mask | d1.singular_mask | d2.singular_mask)


# ---------------------------------------------------------------------------
# H-surfaces
# ---------------------------------------------------------------------------


def _check_unit(N: SurfaceGrid, tol: float = 1e-6) -> None:
    dev = np.abs(bilinear(N.values, N.values) - 1.0)
    if dev.max() > tol:
        raise NotUnitNormal(f"normal field deviates from unit length by {dev.max():.3g}")


def cylinder_normal(grid: SurfaceGrid) -> SurfaceGrid:
    """Unit normal ``(-sin 2x, cos 2x, 0)`` of the radius-1/2 cylinder seed, so ``f^c = f + N - e2``."""
    X, _ = grid.mesh()
    N = np.stack([-np.sin(2 * X), np.cos(2 * X), np.zeros_like(X)], axis=-1)
    return replace(grid, values=N, exact_d=None, mask=None)


def admissible_h_seed(f_o, N_o, H: float, r: float, direction=None) -> np.ndarray:
    """A point ``v`` with ``I(o) = 0``: ``g(o) = N/H + w``, ``|w|^2 = (r/H - 1)/(r H)``, ``w`` normal to ``N``."""
    if r == 0 or H == 0:
        raise InvalidParameter("r and H must be nonzero")
    rad2 = (r / H - 1.0) / (r * H)
    if rad2 < 0:
        raise InvalidParameter(f"no admissible initial point for r = {r}, H = {H}")
    N_o = np.asarray(N_o, dtype=float)
    if direction is None:
        direction = np.eye(len(N_o))[np.argmin(np.abs(N_o))]
    w = np.asarray(direction, dtype=float) - np.dot(direction, N_o) * N_o
    w = w / np.linalg.norm(w)
    return np.asarray(f_o, dtype=float) + N_o / H + np.sqrt(rad2) * w


def h_surface_invariant(pair: ChristoffelPair, result: DarbouxResult, N: SurfaceGrid, H: float) -> tuple[np.ndarray, float]:
    """``|I|`` with ``I = r H g^2 - r {g, N} - 1`` and its max over unmasked nodes."""
    _check_unit(N)
    alg = algebra(pair.f.ambient_dim)
    r = result.r
    G = alg.from_vectors(result.g.values)
    Nv = alg.from_vectors(N.values)
    with np.errstate(all="ignore"):
        I = r * H * alg.mul(G, G) - r * (alg.mul(G, Nv) + alg.mul(Nv, G))
        I[..., 0] -= 1.0
        drift = np.abs(I).max(axis=-1)
    return drift, masked_max(drift, ~result.singular_mask)


def parallel_dual_residual(result: DarbouxResult, N: SurfaceGrid, H: float) -> tuple[np.ndarray, float]:
    """Deviation of ``fhat^c - H fhat - Nhat`` from its base value, ``Nhat = -g N g^{-1}``."""
    _check_unit(N)
    alg = algebra(N.ambient_dim)
    g = result.g.values
    with np.errstate(all="ignore"):
        G = alg.from_vectors(g)
        Nh = -alg.vector_part(alg.mul_chain(G, alg.from_vectors(N.values), alg.from_vectors(alg.vec_inverse(g))))
        diff = result.fhat_c.values - H * result.fhat.values - Nh
    i0, j0 = N.base_index
    res = np.linalg.norm(diff - diff[i0, j0], axis=-1)
    return res, masked_max(res, ~result.singular_mask)


# ---------------------------------------------------------------------------
# Sym formula
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PFlatMap:
    """Off-diagonal blocks ``(f0, f0^c)`` of a map into the tangent block p."""

    f0: SurfaceGrid
    f0c: SurfaceGrid

    def as_pair(self, q: float) -> ChristoffelPair:
        return ChristoffelPair(self.f0, self.f0c, q)

    def flatness_residual(self, margin: int = 1) -> float:
        return isothermic_residual(self.f0, self.f0c, margin=margin)[1]


def _sym_stencil(lams) -> tuple[float, dict]:
    lams = list(lams)
    pos = sorted({abs(l.real) for l in lams if l != 0 and l.imag == 0 and -l in lams})
    for eps in pos:
        if 0 in lams and 2 * eps in lams and -2 * eps in lams:
            return eps, {2 * eps: -1 / 12, eps: 8 / 12, -eps: -8 / 12, -2 * eps: 1 / 12}
    if pos:
        eps = pos[0]
        return eps, {eps: 0.5, -eps: -0.5}
    raise InsufficientSamples("need real samples at +-eps (and ideally +-2 eps)")


def sym_formula(samples: Mapping[complex, np.ndarray], grid: SurfaceGrid, mask: np.ndarray | None = None) -> PFlatMap:
    """Central-difference derivative of a frame family at ``lambda = 0``."""
    keys = {complex(k): k for k in samples}
    if 0 not in keys:
        raise InsufficientSamples("the sample lambda = 0 is required")
    eps, weights = _sym_stencil(keys)
    deriv = sum(w * np.asarray(samples[keys[complex(l)]]) for l, w in weights.items()) / eps
    alg = algebra(grid.ambient_dim)
    f0 = alg.vector_part(deriv[..., 0, 1, :])
    f0c = alg.vector_part(deriv[..., 1, 0, :])
    if np.iscomplexobj(f0):
        f0, f0c = f0.real, f0c.real
    return PFlatMap(replace(grid, values=f0, exact_d=None, mask=mask), replace(grid, values=f0c, exact_d=None, mask=mask))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def pair_frame_forms(pair: ChristoffelPair, result: DarbouxResult, order: int = 2) -> tuple[GridOneForm, GridOneForm]:
    """Off-diagonal Maurer-Cartan blocks ``beta = df`` and ``gamma = -g^{-1} dfhat g^{-1}``."""
    alg = algebra(pair.f.ambient_dim)
    df = differential(pair.f, order)
    dh = differential(result.fhat, order)
    with np.errstate(all="ignore"):
        Gi = alg.from_vectors(alg.vec_inverse(result.g.values))
        gam = [-alg.vector_part(alg.mul_chain(Gi, alg.from_vectors(a), Gi)) for a in (dh.ax, dh.ay)]
    return df, GridOneForm(*gam)


def hopf_pairing(beta: GridOneForm, gamma: GridOneForm) -> np.ndarray:
    """``2 (beta_z, gamma_z)`` per node."""
    bz = 0.5 * (beta.ax - 1j * beta.ay)
    gz = 0.5 * (gamma.ax - 1j * gamma.ay)
    return 2.0 * bilinear(bz, gz)
