"""Grid serialization and mesh export."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import BadAxes, SpecInvalid
from .surface import SurfaceGrid

GRID_FORMAT = "isothermic-grid"


def grid_to_json(grid: SurfaceGrid) -> dict:
    vals = np.where(np.isfinite(grid.values), grid.values, 0.0)
    return {
        "format": GRID_FORMAT,
        "version": 1,
        "nx": grid.nx,
        "ny": grid.ny,
        "n": grid.ambient_dim,
        "hx": grid.hx,
        "hy": grid.hy,
        "x0": grid.x0,
        "y0": grid.y0,
        "base_index": list(grid.base_index),
        "values": np.round(vals, 15).tolist(),
        "mask": grid.node_mask.astype(int).tolist(),
    }


def grid_from_json(data: dict) -> SurfaceGrid:
    if data.get("format") != GRID_FORMAT:
        raise SpecInvalid(f"not a {GRID_FORMAT} document")
    try:
        values = np.asarray(data["values"], dtype=float)
        mask = np.asarray(data.get("mask", np.zeros(values.shape[:2])), dtype=bool)
        return SurfaceGrid(
            values,
            float(data["hx"]),
            float(data["hy"]),
            float(data.get("x0", 0.0)),
            float(data.get("y0", 0.0)),
            tuple(data.get("base_index", (0, 0))),
            mask=mask if mask.any() else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecInvalid(f"malformed grid document: {exc}") from exc


def save_grid(grid: SurfaceGrid, path) -> None:
    Path(path).write_text(json.dumps(grid_to_json(grid), sort_keys=True) + "\n")


def load_grid(path) -> SurfaceGrid:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecInvalid(f"{path}: invalid JSON ({exc})") from exc
    return grid_from_json(data)


def save_grid_csv(grid: SurfaceGrid, path) -> None:
    """One row per node: ``i, j, x, y, masked, f_1, ..., f_n``."""
    X, Y = grid.mesh()
    rows = ["i,j,x,y,masked," + ",".join(f"f{k + 1}" for k in range(grid.ambient_dim))]
    mask = grid.node_mask
    for i in range(grid.nx):
        for j in range(grid.ny):
            coords = ",".join(f"{c:.15g}" for c in grid.values[i, j])
            rows.append(f"{i},{j},{X[i, j]:.15g},{Y[i, j]:.15g},{int(mask[i, j])},{coords}")
    Path(path).write_text("\n".join(rows) + "\n")


def parse_axes(axes, n: int) -> tuple[int, int, int]:
    if isinstance(axes, str):
        try:
            axes = [int(a) for a in axes.split(",")]
        except ValueError as exc:
            raise BadAxes(f"cannot parse axes {axes!r}") from exc
    axes = tuple(int(a) for a in axes)
    if len(axes) != 3 or len(set(axes)) != 3 or any(a < 0 or a >= n for a in axes):
        raise BadAxes(f"axes must be three distinct indices below {n}, got {axes}")
    return axes


def mesh_faces(mask: np.ndarray) -> list[tuple[int, int, int, int]]:
    """Quads ``(i,j), (i+1,j), (i+1,j+1), (i,j+1)`` avoiding masked nodes (0-based ids)."""
    nx, ny = mask.shape
    ok = ~mask
    good = ok[:-1, :-1] & ok[1:, :-1] & ok[1:, 1:] & ok[:-1, 1:]
    faces = []
    for i, j in zip(*np.nonzero(good)):
        a = i * ny + j
        faces.append((a, a + ny, a + ny + 1, a + 1))
    return faces


def export_mesh(surface: SurfaceGrid, path, format: str = "obj", axes=(0, 1, 2)) -> None:
    """Write vertices (selected coordinates) and quad faces; masked vertices are zeroed."""
    ax = parse_axes(axes, surface.ambient_dim)
    mask = surface.node_mask | ~np.all(np.isfinite(surface.values), axis=-1)
    verts = np.where(mask[..., None], 0.0, surface.values[..., list(ax)]).reshape(-1, 3)
    faces = mesh_faces(mask)
    fmt = format.lower()
    if fmt == "obj":
        lines = [f"v {x:.12g} {y:.12g} {z:.12g}" for x, y, z in verts]
        lines += [f"f {a + 1} {b + 1} {c + 1} {d + 1}" for a, b, c, d in faces]
    elif fmt == "ply":
        lines = [
            "ply",
            "format ascii 1.0",
            f"element vertex {len(verts)}",
            "property double x",
            "property double y",
            "property double z",
            f"element face {len(faces)}",
            "property list uchar int vertex_indices",
            "end_header",
        ]
        lines += [f"{x:.12g} {y:.12g} {z:.12g}" for x, y, z in verts]
        lines += [f"4 {a} {b} {c} {d}" for a, b, c, d in faces]
    else:
        raise SpecInvalid(f"unknown mesh format {format!r}")
    Path(path).write_text("\n".join(lines) + "\n")
