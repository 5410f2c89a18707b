"""Conformal frames of isothermic surfaces and the vector Calapso equation.

Light-cone coordinates are ``(a, lam, mu)`` for ``a + lam v_inf + mu v_0``
with ``(v, v) = |a|^2 - lam mu``. The frame of a surface in curvature-line
coordinates consists of the isometric lift ``F``, ``X = F_x``, ``Y = F_y``,
parallel normals ``N_i`` of the conformal Gauss map and the null vector
``Fhat`` with ``(F, Fhat) = -1/2``. In this frame

    dX    = chi_1 F + 2 dx Fhat + kappa.N dx
    dY    = chi_2 F + 2 dy Fhat - kappa.N dy
    dN_i  = -kappa_i X dx + kappa_i Y dy + tau_i F
    dFhat = (chi_1 X + chi_2 Y + tau.N) / 2

with ``chi_1 = chi11 dx + psi dy``, ``chi_2 = psi dx + chi22 dy`` and
``chi11 - chi22 = u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .clifford import embed_coords, lorentz_metric
from .errors import InconsistentData, NonFlatNormalBundle, NotCCL
from .surface import (
    GridOneForm,
    SurfaceGrid,
    integrate_one_form,
    interior_mask,
    masked_max,
    partial_x,
    partial_y,
    spanning_tree_sweep,
)


def _inner(G, a, b):
    return np.einsum("...i,ij,...j->...", a, G, b)


@dataclass(frozen=True)
class CalapsoData:
    """Gauge-fixed conformal invariants of a surface on its grid.

    ``kappa`` has shape ``(nx, ny, n-2)``; ``tau`` has shape
    ``(nx, ny, n-2, 2)`` holding the ``dx`` and ``dy`` components.
    """

    kappa: np.ndarray
    psi: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    chi11: np.ndarray
    chi22: np.ndarray
    lift: np.ndarray
    fhat: np.ndarray
    normals: np.ndarray
    hx: float
    hy: float
    base_index: tuple[int, int]
    x0: float = 0.0
    y0: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.psi.shape

    @property
    def kappa_norm(self) -> np.ndarray:
        return np.linalg.norm(self.kappa, axis=-1)

    def kappa_grid(self) -> SurfaceGrid:
        return SurfaceGrid(self.kappa, self.hx, self.hy, self.x0, self.y0, self.base_index)

    def psi_grid(self) -> SurfaceGrid:
        return SurfaceGrid(self.psi[..., None], self.hx, self.hy, self.x0, self.y0, self.base_index)

    def with_psi(self, psi) -> "CalapsoData":
        return CalapsoData(**{**self.__dict__, "psi": np.asarray(psi)})


def _normal_basis(G, cols: np.ndarray, k: int) -> np.ndarray:
    """``k`` vectors spanning the metric complement of ``cols`` (shape (m, n+2))."""
    A = cols @ G
    _, _, vt = np.linalg.svd(A)
    Z = vt[A.shape[0] :]
    return _lowdin(G, Z[:k])


def _lowdin(G, N: np.ndarray) -> np.ndarray:
    """Polar orthonormalization of the rows of ``N`` for the metric ``G``."""
    gram = np.einsum("...ia,ab,...jb->...ij", N, G, N)
    w, v = np.linalg.eigh(gram)
    inv_sqrt = np.einsum("...ij,...j,...kj->...ik", v, 1.0 / np.sqrt(w), v)
    return np.einsum("...ij,...ja->...ia", inv_sqrt, N)


def conformal_frame(f: SurfaceGrid, order: int = 2, conformal_tol: float = 5e-2, ccl_tol: float = 1e-2) -> CalapsoData:
    """Conformal frame and Calapso data of ``f`` in its grid coordinates.

    The grid coordinates must be conformal curvature-line coordinates.
    """
    n = f.ambient_dim
    if n < 3:
        raise NotCCL("surfaces need ambient dimension at least 3")
    G = lorentz_metric(n)
    hx, hy = f.hx, f.hy
    fx, fy = partial_x(f.values, hx, order), partial_y(f.values, hy, order)
    ex, ey = np.sum(fx * fx, -1), np.sum(fy * fy, -1)
    e2u = 0.5 * (ex + ey)
    scale = e2u.max()
    inner = interior_mask(f.shape, 1)
    conf = max(np.abs(ex - ey)[inner].max(), 2 * np.abs(np.sum(fx * fy, -1))[inner].max()) / scale
    if conf > conformal_tol:
        raise NotCCL(f"grid coordinates are not conformal (defect {conf:.3g})")
    F = embed_coords(f.values) / np.sqrt(e2u)[..., None]
    X = partial_x(F, hx, order)
    Y = partial_y(F, hy, order)
    Fxx = partial_x(X, hx, order)
    Fyy = partial_y(Y, hy, order)
    Fxy = 0.5 * (partial_y(X, hy, order) + partial_x(Y, hx, order))

    # Fhat from the Laplacian of the lift
    D = Fxx + Fyy
    D = D - _inner(G, D, X)[..., None] * X - _inner(G, D, Y)[..., None] * Y
    c = _inner(G, F, D)
    b = -0.5 / c
    a = -b * _inner(G, D, D) / (2 * c)
    Fh = a[..., None] * F + b[..., None] * D

    k = n - 2
    cols = np.stack([F, X, Y, Fh], axis=-2)
    i0, j0 = f.base_index
    N0 = _normal_basis(G, cols[i0, j0], k)

    def step(state, src, dst, axis):
        N = state.reshape(-1, k, n + 2)
        C = cols[dst]
        gram = np.einsum("bma,ac,bpc->bmp", C, G, C)
        rhs = np.einsum("bma,ac,bic->bmi", C, G, N)
        coef = np.linalg.solve(gram, rhs)
        N = N - np.einsum("bmi,bma->bia", coef, C)
        return _lowdin(G, N).reshape(len(N), -1)

    normals = spanning_tree_sweep(f.shape, f.base_index, N0.reshape(-1), step).reshape(f.shape + (k, n + 2))

    # flat normal bundle and curvature-line checks
    kxx = np.einsum("...ia,ab,...b->...i", normals, G, Fxx)
    kyy = np.einsum("...ia,ab,...b->...i", normals, G, Fyy)
    kxy = np.einsum("...ia,ab,...b->...i", normals, G, Fxy)
    ref = 1.0 + np.abs(kxx).max() + np.abs(kyy).max()
    if k >= 2:
        defect = 0.0
        inner = interior_mask(f.shape, 2)
        for i in range(k):
            for j in range(i + 1, k):
                # [A_i, A_j] for symmetric 2x2 A = (a b; b c) has off-diagonal b_i(c_j - a_j) - b_j(c_i - a_i)
                cij = kxy[..., i] * (kyy[..., j] - kxx[..., j]) - kxy[..., j] * (kyy[..., i] - kxx[..., i])
                defect = max(defect, np.abs(cij[inner]).max() / ref**2)
        if defect > ccl_tol:
            raise NonFlatNormalBundle(f"shape operators do not commute (defect {defect:.3g})")
    off = np.abs(kxy[interior_mask(f.shape, 2)]).max() / ref
    if off > ccl_tol:
        raise NotCCL(f"grid coordinates are not curvature lines (defect {off:.3g})")

    kappa = 0.5 * (kxx - kyy)
    psi = -2.0 * _inner(G, Fxy, Fh)
    u = -2.0 * (_inner(G, Fxx, Fh) - _inner(G, Fyy, Fh))
    kk = np.sum(kappa**2, -1)
    chi11 = 0.5 * (u - kk)
    chi22 = 0.5 * (-u - kk)
    Nx = partial_x(normals, hx, order)
    Ny = partial_y(normals, hy, order)
    tau = np.stack(
        [
            -2.0 * np.einsum("...ia,ab,...b->...i", Nx, G, Fh),
            -2.0 * np.einsum("...ia,ab,...b->...i", Ny, G, Fh),
        ],
        axis=-1,
    )
    return CalapsoData(kappa, psi, u, tau, chi11, chi22, F, Fh, normals, hx, hy, f.base_index, f.x0, f.y0)


def calapso_residual(data: CalapsoData, margin: int = 3, order: int = 2) -> tuple[float, float]:
    """``(max |kappa_xy - psi kappa|, max |Laplace psi + 2 (kappa, kappa)_xy|)`` on interior nodes."""
    hx, hy = data.hx, data.hy
    kap, psi = data.kappa, data.psi
    kxy = partial_y(partial_x(kap, hx, order), hy, order)
    r1 = np.linalg.norm(kxy - psi[..., None] * kap, axis=-1)
    kk = np.sum(kap**2, -1)
    lap = partial_x(partial_x(psi, hx, order), hx, order) + partial_y(partial_y(psi, hy, order), hy, order)
    r2 = np.abs(lap + 2.0 * partial_y(partial_x(kk, hx, order), hy, order))
    inner = interior_mask(data.shape, margin)
    return masked_max(r1, inner), masked_max(r2, inner)


def _as_field(g, channels: bool):
    v = g.values if isinstance(g, SurfaceGrid) else np.asarray(g)
    if not channels and v.ndim == 3:
        v = v[..., 0]
    return v


def frame_from_calapso(
    kappa: SurfaceGrid,
    psi: SurfaceGrid,
    r: float = 0.0,
    order: int = 2,
    consistency_tol: float = 1e-2,
    margin: int = 3,
) -> SurfaceGrid:
    """Isothermic surface in ``R^(k+2)`` with Calapso data ``(kappa, psi)``.

    ``u`` is integrated with base value ``r``; shifting ``r`` moves along the
    T-transform family. The frame is ``1`` at the base node, so the surface
    passes through the origin there with ``f_x = e1``, ``f_y = e2``.
    """
    kap = _as_field(kappa, True)
    ps = _as_field(psi, False)
    hx, hy, base = kappa.hx, kappa.hy, kappa.base_index
    k = kap.shape[-1]
    n = k + 2
    kk = np.sum(kap**2, -1)
    kk_x, kk_y = partial_x(kk, hx, order), partial_y(kk, hy, order)
    ps_x, ps_y = partial_x(ps, hx, order), partial_y(ps, hy, order)
    ux = -2.0 * ps_y - 2.0 * kk_x
    uy = 2.0 * ps_x + 2.0 * kk_y
    curl = partial_y(ux, hy, order) - partial_x(uy, hx, order)
    scale = 1.0 + np.abs(kk).max() + np.abs(ps).max()
    bad = masked_max(np.abs(curl), interior_mask(ps.shape, margin)) / scale
    if bad > consistency_tol:
        raise InconsistentData(f"u has inconsistent mixed partials (defect {bad:.3g})")
    u = integrate_one_form(GridOneForm(ux[..., None], uy[..., None]), hx, hy, base)[..., 0] + r
    tx, ty = partial_x(kap, hx, order), -partial_y(kap, hy, order)
    c11 = 0.5 * (u - kk)
    c22 = 0.5 * (-u - kk)

    m = n + 2
    Bx = np.zeros(ps.shape + (m, m))
    By = np.zeros(ps.shape + (m, m))
    H = n + 1
    N = slice(3, 3 + k)
    Bx[..., 1, 0] = 1.0
    By[..., 2, 0] = 1.0
    Bx[..., 0, 1], By[..., 0, 1] = c11, ps
    Bx[..., H, 1] = 2.0
    Bx[..., N, 1] = kap
    Bx[..., 0, 2], By[..., 0, 2] = ps, c22
    By[..., H, 2] = 2.0
    By[..., N, 2] = -kap
    Bx[..., 1, N] = -kap
    By[..., 2, N] = kap
    Bx[..., 0, N], By[..., 0, N] = tx, ty
    Bx[..., 1, H], By[..., 1, H] = 0.5 * c11, 0.5 * ps
    Bx[..., 2, H], By[..., 2, H] = 0.5 * ps, 0.5 * c22
    Bx[..., N, H], By[..., N, H] = 0.5 * tx, 0.5 * ty

    def step(state, src, dst, axis):
        Fm = state.reshape(-1, m, m)
        B, h = (Bx, hx) if axis == 0 else (By, hy)
        sgn = np.sign(dst[axis] - src[axis])[:, None, None]
        A0, A1 = sgn * B[src], sgn * B[dst]
        Om = 0.5 * h * (A0 + A1) + h * h / 12.0 * (A0 @ A1 - A1 @ A0)
        return (Fm @ expm(Om)).reshape(len(Fm), -1)

    frames = spanning_tree_sweep(ps.shape, base, np.eye(m).reshape(-1), step).reshape(ps.shape + (m, m))
    lift = frames[..., :, 0]
    mu = lift[..., 0]
    with np.errstate(all="ignore"):
        vals = lift[..., 1 : n + 1] / mu[..., None]
    mask = np.abs(mu) < 1e-12 * (1.0 + np.abs(lift).max(axis=-1))
    vals[mask] = np.nan
    return SurfaceGrid(vals, hx, hy, kappa.x0, kappa.y0, base, mask=mask if mask.any() else None)
