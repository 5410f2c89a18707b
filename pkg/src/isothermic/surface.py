"""Sampled surfaces on conformal curvature-line grids.

A :class:`SurfaceGrid` stores node values of a map from a rectangular
``(x, y)`` lattice into R^n. One-forms are stored as their ``dx`` and ``dy``
coefficients per node. Clifford-valued products of forms use the algebra
Cl(n, 0) from :mod:`isothermic.clifford`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .clifford import algebra, bilinear
from .errors import (
    CoincidentSurfaces,
    DegenerateGrid,
    GridMismatch,
    InvalidParams,
    NotClosed,
    NotConformal,
    UmbilicZero,
)

DEGENERATE_TOL = 1e-10


@dataclass(frozen=True)
class SurfaceGrid:
    """Node values ``values[i, j] = f(x0 + i hx, y0 + j hy)``.

    ``exact_d`` optionally carries the ``(f_x, f_y)`` node values of the
    differential when it is known in closed form or produced by an
    integrator; transforms prefer it over finite differences. ``mask``
    flags nodes excluded from comparisons (True = masked).
    """

    values: np.ndarray
    hx: float
    hy: float
    x0: float = 0.0
    y0: float = 0.0
    base_index: tuple[int, int] = (0, 0)
    exact_d: tuple[np.ndarray, np.ndarray] | None = None
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise DegenerateGrid(f"values must have shape (nx, ny, n), got {v.shape}")
        if v.shape[0] < 3 or v.shape[1] < 3:
            raise DegenerateGrid(f"need at least 3x3 nodes, got {v.shape[:2]}")
        if not (self.hx > 0 and self.hy > 0):
            raise DegenerateGrid("grid spacings must be positive")
        i0, j0 = self.base_index
        if not (0 <= i0 < v.shape[0] and 0 <= j0 < v.shape[1]):
            raise DegenerateGrid(f"base index {self.base_index} outside the grid")
        object.__setattr__(self, "base_index", (int(i0), int(j0)))

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    @property
    def base_value(self) -> np.ndarray:
        return self.values[self.base_index]

    @property
    def node_mask(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)

    def with_values(self, values, exact_d=None, mask=None) -> "SurfaceGrid":
        return replace(self, values=np.asarray(values), exact_d=exact_d, mask=mask)

    def congruent(self, other: "SurfaceGrid") -> bool:
        return (
            self.shape == other.shape
            and np.isclose(self.hx, other.hx)
            and np.isclose(self.hy, other.hy)
            and np.isclose(self.x0, other.x0)
            and np.isclose(self.y0, other.y0)
        )


def grid_from_function(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    box: tuple[float, float, float, float],
    shape: tuple[int, int],
    base_point: tuple[float, float] | None = None,
    dfn: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None,
) -> SurfaceGrid:
    """Sample ``fn(X, Y) -> (nx, ny, n)`` on the box ``(x0, x1, y0, y1)``."""
    x0, x1, y0, y1 = box
    nx, ny = shape
    if nx < 3 or ny < 3 or not (x1 > x0 and y1 > y0):
        raise InvalidParams(f"bad box {box} or shape {shape}")
    hx = (x1 - x0) / (nx - 1)
    hy = (y1 - y0) / (ny - 1)
    X, Y = np.meshgrid(x0 + hx * np.arange(nx), y0 + hy * np.arange(ny), indexing="ij")
    if base_point is None:
        base_point = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    i0 = int(round((base_point[0] - x0) / hx))
    j0 = int(round((base_point[1] - y0) / hy))
    if not (0 <= i0 < nx and 0 <= j0 < ny):
        raise InvalidParams(f"base point {base_point} outside the box")
    values = np.asarray(fn(X, Y))
    exact = None
    if dfn is not None:
        fx, fy = dfn(X, Y)
        exact = (np.asarray(fx), np.asarray(fy))
    return SurfaceGrid(values, hx, hy, x0, y0, (i0, j0), exact)


# ---------------------------------------------------------------------------
# one-forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridOneForm:
    """``alpha = ax dx + ay dy`` with Clifford-vector node values."""

    ax: np.ndarray
    ay: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.ax) != np.shape(self.ay):
            raise GridMismatch("dx and dy components differ in shape")


def _diff_axis(v: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    if order == 2:
        return np.gradient(v, h, axis=axis, edge_order=2)
    if order != 4:
        raise ValueError("order must be 2 or 4")
    v = np.moveaxis(v, axis, 0)
    m = v.shape[0]
    if m < 5:
        raise DegenerateGrid("fourth-order stencils need at least 5 nodes per axis")
    out = np.empty_like(v)
    out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / 12.0
    out[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / 12.0
    out[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / 12.0
    out[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / 12.0
    out[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / 12.0
    return np.moveaxis(out / h, 0, axis)


def partial_x(v: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    return _diff_axis(np.asarray(v), h, 0, order)


def partial_y(v: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    return _diff_axis(np.asarray(v), h, 1, order)


def d_form(f: SurfaceGrid, order: int = 2) -> GridOneForm:
    """Finite-difference differential; exact on affine maps."""
    return GridOneForm(partial_x(f.values, f.hx, order), partial_y(f.values, f.hy, order))


def differential(f: SurfaceGrid, order: int = 2) -> GridOneForm:
    """The carried exact differential when present, else :func:`d_form`."""
    if f.exact_d is not None:
        return GridOneForm(*f.exact_d)
    return d_form(f, order)


def wedge(alpha: GridOneForm, beta: GridOneForm) -> np.ndarray:
    """Per-node ``ax by - ay bx`` as Clifford multivector arrays."""
    if np.shape(alpha.ax) != np.shape(beta.ax):
        raise GridMismatch("forms live on different grids")
    alg = algebra(np.shape(alpha.ax)[-1])
    ax, ay = alg.from_vectors(alpha.ax), alg.from_vectors(alpha.ay)
    bx, by = alg.from_vectors(beta.ax), alg.from_vectors(beta.ay)
    return alg.mul(ax, by) - alg.mul(ay, bx)


def interior_mask(shape: tuple[int, int], margin: int = 1) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[margin : shape[0] - margin, margin : shape[1] - margin] = True
    return m


def masked_max(field_: np.ndarray, valid: np.ndarray) -> float:
    vals = np.asarray(field_)[valid]
    vals = vals[np.isfinite(vals)]
    return float(vals.max()) if vals.size else 0.0


def isothermic_residual(f: SurfaceGrid, fc: SurfaceGrid, order: int = 2, margin: int = 1) -> tuple[np.ndarray, float]:
    """Frobenius norm of ``df ^ df^c`` per node and its max over interior nodes."""
    if not f.congruent(fc):
        raise GridMismatch("surfaces are sampled on different grids")
    w = wedge(d_form(f, order), d_form(fc, order))
    res = np.sqrt(np.sum(np.abs(w) ** 2, axis=-1))
    valid = interior_mask(f.shape, margin) & ~f.node_mask & ~fc.node_mask
    return res, masked_max(res, valid)


# ---------------------------------------------------------------------------
# path integration along the row-then-column spanning tree
# ---------------------------------------------------------------------------


def spanning_tree_sweep(shape, base, init, step) -> np.ndarray:
    """Propagate a node state from ``base`` along the fixed spanning tree.

    The tree first walks the base row (varying ``i``), then every column
    (varying ``j``), all columns at once. ``step(state, src, dst, axis)``
    maps a batch of states at index arrays ``src = (I, J)`` to ``dst``.
    """
    nx, ny = shape
    i0, j0 = base
    init = np.asarray(init)
    out = np.full((nx, ny) + init.shape, np.nan, dtype=init.dtype)
    out[i0, j0] = init

    def _store(idx, val):
        nonlocal out
        if np.iscomplexobj(val) and not np.iscomplexobj(out):
            out = out.astype(complex)
        out[idx] = val

    for rng_ in (range(i0, nx - 1), range(i0, 0, -1)):
        for i in rng_:
            dst_i = i + 1 if rng_.step == 1 else i - 1
            src = (np.array([i]), np.array([j0]))
            dst = (np.array([dst_i]), np.array([j0]))
            _store(dst, step(out[src], src, dst, 0))
    cols = np.arange(nx)
    for rng_ in (range(j0, ny - 1), range(j0, 0, -1)):
        for j in rng_:
            dst_j = j + 1 if rng_.step == 1 else j - 1
            src = (cols, np.full(nx, j))
            dst = (cols, np.full(nx, dst_j))
            _store(dst, step(out[src], src, dst, 1))
    return out


def integrate_one_form(alpha: GridOneForm, hx: float, hy: float, base: tuple[int, int]) -> np.ndarray:
    """Trapezoidal path integral of ``alpha`` with value 0 at ``base``."""
    ax, ay = np.asarray(alpha.ax), np.asarray(alpha.ay)

    def step(state, src, dst, axis):
        comp, h = (ax, hx) if axis == 0 else (ay, hy)
        sgn = np.sign(dst[axis] - src[axis])[:, None]
        return state + sgn * h * 0.5 * (comp[src] + comp[dst])

    return spanning_tree_sweep(ax.shape[:2], base, np.zeros(ax.shape[2:], dtype=np.result_type(ax, ay)), step)


def cell_loop_residual(alpha: GridOneForm, hx: float, hy: float) -> np.ndarray:
    """Trapezoidal circulation of ``alpha`` around every grid cell."""
    ax, ay = np.asarray(alpha.ax), np.asarray(alpha.ay)
    bottom = 0.5 * hx * (ax[:-1, :-1] + ax[1:, :-1])
    right = 0.5 * hy * (ay[1:, :-1] + ay[1:, 1:])
    top = 0.5 * hx * (ax[:-1, 1:] + ax[1:, 1:])
    left = 0.5 * hy * (ay[:-1, :-1] + ay[:-1, 1:])
    loop = bottom + right - top - left
    return np.sqrt(np.sum(np.abs(loop) ** 2, axis=-1))


# ---------------------------------------------------------------------------
# Christoffel pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChristoffelPair:
    """A surface, its Christoffel dual and the polarisation ``q``.

    The dual satisfies ``f^c_x = q f_x / |f_x|^2`` and
    ``f^c_y = -q f_y / |f_y|^2`` in the grid's coordinates.
    """

    f: SurfaceGrid
    fc: SurfaceGrid
    q: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.f.congruent(self.fc):
            raise GridMismatch("f and f^c are sampled on different grids")


def conformality_defect(df: GridOneForm) -> np.ndarray:
    fx, fy = df.ax, df.ay
    a, b = bilinear(fx, fx), bilinear(fy, fy)
    scale = np.abs(a) + np.abs(b) + 1e-300
    return np.maximum(np.abs(a - b), 2 * np.abs(bilinear(fx, fy))) / scale


def polarisation(pair: ChristoffelPair, order: int = 2) -> np.ndarray:
    """Per-node ``2 (f_z, f^c_z)``, which equals ``q`` for a Christoffel pair."""
    df, dfc = differential(pair.f, order), differential(pair.fc, order)
    fz = 0.5 * (df.ax - 1j * df.ay)
    fcz = 0.5 * (dfc.ax - 1j * dfc.ay)
    return 2.0 * bilinear(fz, fcz)


def christoffel_transform(
    f: SurfaceGrid,
    q: float,
    order: int = 2,
    conformal_tol: float = 1e-2,
    closed_tol: float = 1e-2,
) -> ChristoffelPair:
    """Dual surface with ``f^c(o) = 0`` obtained by integrating the closed form eta."""
    if q == 0:
        raise InvalidParams("q = 0 gives a constant dual")
    df = differential(f, order)
    e2u = 0.5 * (bilinear(df.ax, df.ax) + bilinear(df.ay, df.ay)).real
    if np.any(e2u < DEGENERATE_TOL):
        raise UmbilicZero("(df, df) vanishes at some node")
    defect = conformality_defect(df)
    if defect.max() > conformal_tol:
        raise NotConformal(f"coordinates are not conformal (defect {defect.max():.3g})")
    eta = GridOneForm(q * df.ax / e2u[..., None], -q * df.ay / e2u[..., None])
    curl = partial_x(eta.ay, f.hx, order) - partial_y(eta.ax, f.hy, order)
    scale = 1.0 + max(np.abs(eta.ax).max(), np.abs(eta.ay).max())
    closed = masked_max(np.sqrt(np.sum(np.abs(curl) ** 2, axis=-1)), interior_mask(f.shape))
    if closed > closed_tol * scale:
        raise NotClosed(f"eta is not closed: residual {closed:.3g}")
    values = integrate_one_form(eta, f.hx, f.hy, f.base_index)
    loops = cell_loop_residual(eta, f.hx, f.hy)
    fc = replace(f, values=values, exact_d=(eta.ax, eta.ay), mask=None)
    diag = {"closedness": closed, "loop_residual": float(loops.max()), "conformality": float(defect.max())}
    return ChristoffelPair(f, fc, float(q), diag)


def envelope_residual(f: SurfaceGrid, fhat: SurfaceGrid, order: int = 2, margin: int = 1) -> tuple[np.ndarray, float]:
    """Sine of the largest principal angle between ``span d fhat`` and ``span g df g^{-1}``."""
    if not f.congruent(fhat):
        raise GridMismatch("surfaces are sampled on different grids")
    g = fhat.values - f.values
    gn = np.sqrt(np.abs(bilinear(g, g)))
    valid = interior_mask(f.shape, margin) & ~f.node_mask & ~fhat.node_mask
    if np.any(gn[valid] < DEGENERATE_TOL):
        raise CoincidentSurfaces("f and fhat meet at a node")
    alg = algebra(f.ambient_dim)
    df = differential(f, order)
    dh = differential(fhat, order)
    G = alg.from_vectors(g)
    Ginv = alg.inverse(G)
    rx = alg.vector_part(alg.mul_chain(G, alg.from_vectors(df.ax), Ginv))
    ry = alg.vector_part(alg.mul_chain(G, alg.from_vectors(df.ay), Ginv))
    A = np.stack([dh.ax.real, dh.ay.real], axis=-1)
    B = np.stack([rx.real, ry.real], axis=-1)
    finite = np.all(np.isfinite(A), axis=(-2, -1)) & np.all(np.isfinite(B), axis=(-2, -1))
    valid &= finite
    A = np.where(finite[..., None, None], A, 0.0)
    B = np.where(finite[..., None, None], B, 0.0)
    with np.errstate(all="ignore"):
        qa, _ = np.linalg.qr(A)
        qb, _ = np.linalg.qr(B)
        resid = qa - qb @ (np.swapaxes(qb, -1, -2) @ qa)
        res = np.linalg.norm(resid, ord=2, axis=(-2, -1))
    return res, masked_max(res, valid)


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


def _box_shape(params: dict, box, shape):
    box = tuple(params.get("box", box))
    shape = tuple(params.get("shape", shape))
    if len(box) != 4 or len(shape) != 2:
        raise InvalidParams("box needs 4 numbers and shape 2 integers")
    return box, (int(shape[0]), int(shape[1]))


def plane_pair(box=(-1.0, 1.0, -1.0, 1.0), shape=(101, 101), base_point=(0.0, 0.0), n: int = 3) -> ChristoffelPair:
    def fn(s):
        def _f(X, Y):
            out = np.zeros(X.shape + (n,))
            out[..., 0] = X
            out[..., 1] = s * Y
            return out

        def _d(X, Y):
            fx = np.zeros(X.shape + (n,))
            fy = np.zeros(X.shape + (n,))
            fx[..., 0] = 1.0
            fy[..., 1] = s
            return fx, fy

        return _f, _d

    ff, fd = fn(1.0)
    cf, cd = fn(-1.0)
    f = grid_from_function(ff, box, shape, base_point, fd)
    fc = grid_from_function(cf, box, shape, base_point, cd)
    return ChristoffelPair(f, fc, 1.0)


def cylinder_pair(box=(0.0, np.pi, -1.0, 1.0), shape=(101, 101), base_point=(0.0, 0.0)) -> ChristoffelPair:
    """Right cylinder of radius 1/2 and its dual; polarisation ``q = -1``."""

    def f(X, Y, s):
        return np.stack([s * 0.5 * np.sin(2 * X), s * 0.5 * (1 - np.cos(2 * X)), Y], axis=-1)

    def d(X, Y, s):
        z = np.zeros_like(X)
        fx = np.stack([s * np.cos(2 * X), s * np.sin(2 * X), z], axis=-1)
        fy = np.stack([z, z, np.ones_like(X)], axis=-1)
        return fx, fy

    fg = grid_from_function(lambda X, Y: f(X, Y, 1.0), box, shape, base_point, lambda X, Y: d(X, Y, 1.0))
    fcg = grid_from_function(lambda X, Y: f(X, Y, -1.0), box, shape, base_point, lambda X, Y: d(X, Y, -1.0))
    return ChristoffelPair(fg, fcg, -1.0)


_PROFILES = {
    # name: (r, r', h, h') with r'^2 + h'^2 = r^2
    "catenoid": (np.cosh, np.sinh, lambda x: x, np.ones_like),
    "sphere": (lambda x: 1 / np.cosh(x), lambda x: -np.tanh(x) / np.cosh(x), np.tanh, lambda x: 1 / np.cosh(x) ** 2),
    "cylinder": (np.ones_like, np.zeros_like, lambda x: x, np.ones_like),
}


def revolution_surface(profile: str = "catenoid", box=(-0.5, 0.5, -1.0, 1.0), shape=(101, 101), base_point=None) -> SurfaceGrid:
    """Conformally parametrized surface of revolution ``(r cos y, r sin y, h)``."""
    if profile not in _PROFILES:
        raise InvalidParams(f"unknown profile {profile!r}; choose from {sorted(_PROFILES)}")
    r, dr, h, dh = _PROFILES[profile]

    def fn(X, Y):
        return np.stack([r(X) * np.cos(Y), r(X) * np.sin(Y), h(X)], axis=-1)

    def dfn(X, Y):
        fx = np.stack([dr(X) * np.cos(Y), dr(X) * np.sin(Y), dh(X)], axis=-1)
        fy = np.stack([-r(X) * np.sin(Y), r(X) * np.cos(Y), np.zeros_like(X)], axis=-1)
        return fx, fy

    return grid_from_function(fn, box, shape, base_point, dfn)


def seed_surface(kind: str, params: dict | None = None) -> ChristoffelPair:
    """Seed Christoffel pairs: ``plane``, ``cylinder`` or ``revolution``."""
    params = dict(params or {})
    if kind == "plane":
        box, shape = _box_shape(params, (-1.0, 1.0, -1.0, 1.0), (101, 101))
        n = int(params.get("ambient_dim", 3))
        if n < 2:
            raise InvalidParams("ambient dimension must be at least 2")
        return plane_pair(box, shape, tuple(params.get("base_point", (0.0, 0.0))), n)
    if kind == "cylinder":
        box, shape = _box_shape(params, (0.0, np.pi, -1.0, 1.0), (101, 101))
        return cylinder_pair(box, shape, tuple(params.get("base_point", (0.0, 0.0))))
    if kind == "revolution":
        box, shape = _box_shape(params, (-0.5, 0.5, -1.0, 1.0), (101, 101))
        bp = params.get("base_point")
        f = revolution_surface(params.get("profile", "catenoid"), box, shape, None if bp is None else tuple(bp))
        return christoffel_transform(f, float(params.get("q", 1.0)))
    raise InvalidParams(f"unknown seed kind {kind!r}")
