"""Command-line front end: ``isothermic run | verify | export``.

A job is a JSON document::

    {
      "name": "plane-t",
      "seed": {"kind": "plane", "params": {"box": [-1, 1, -1, 1], "shape": [101, 101]}},
      "transforms": [{"op": "t_transform", "r": 1.0}],
      "checks": [{"name": "plane_t_closed_form", "r": 1.0, "tol": 1e-5}],
      "outputs": {"mesh": "surface.obj", "axes": [0, 1, 2], "grid": "surface.json"}
    }

Exit status is 0 when every check passes, 1 when a check fails and 2 for
invalid jobs or runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import calapso, closed_forms, io, loopgroup, surface, transform
from .errors import IsothermicError, SpecInvalid

log = logging.getLogger("isothermic")

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


@dataclass
class JobState:
    seed: surface.ChristoffelPair
    seed_kind: str
    pair: surface.ChristoffelPair
    history: list = field(default_factory=list)
    last_darboux: transform.DarbouxResult | None = None
    last_op: dict | None = None
    t_total: float = 0.0
    t_only: bool = True


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _vector(value, n: int, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.shape != (n,):
        raise SpecInvalid(f"{name} must be a list of {n} numbers")
    return v


def _alpha(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise SpecInvalid("alpha must be a number or [re, im]")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _seed_point(state: JobState, step: dict, r: float) -> np.ndarray:
    v = step.get("v")
    pair = state.pair
    if v == "admissible":
        if state.seed_kind != "cylinder":
            raise SpecInvalid("'admissible' seeds are defined for the cylinder only")
        N = transform.cylinder_normal(pair.f)
        H = float(step.get("H", 1.0))
        return transform.admissible_h_seed(pair.f.base_value, N.base_value, H, r, step.get("direction"))
    if v is None:
        raise SpecInvalid(f"{step['op']} needs a seed point 'v'")
    return _vector(v, pair.f.ambient_dim, "v")


def _op_darboux(state: JobState, step: dict) -> None:
    r = float(step["r"])
    res = transform.darboux(state.pair, r, _seed_point(state, step, r), int(step.get("order", 2)))
    state.last_darboux = res
    state.pair = res.as_pair()
    state.t_only = False


def _op_t_transform(state: JobState, step: dict) -> None:
    r = float(step["r"])
    state.pair, _ = transform.t_transform(state.pair, r, int(step.get("order", 2)))
    state.t_total += r


def _op_christoffel(state: JobState, step: dict) -> None:
    state.pair = surface.christoffel_transform(state.pair.f, float(step.get("q", state.pair.q)))
    state.t_only = False


def _op_dress(state: JobState, step: dict) -> None:
    alpha = _alpha(step["alpha"])
    r = float(np.real(alpha * alpha))
    p = loopgroup.make_simple_factor(alpha, _seed_point(state, step, r), state.pair.f.base_value)
    state.pair = loopgroup.dress_pair_direct(p, state.pair, int(step.get("order", 2)))
    state.t_only = False


def _op_bianchi(state: JobState, step: dict) -> None:
    pair = state.pair
    n = pair.f.ambient_dim
    r1, r2 = float(step["r1"]), float(step["r2"])
    d1 = transform.darboux(pair, r1, _vector(step["v1"], n, "v1"))
    d2 = transform.darboux(pair, r2, _vector(step["v2"], n, "v2"))
    fh = transform.bianchi_fourth(pair.f, d1.fhat, d2.fhat, r1, r2)
    fhc = transform.dual_fourth(pair, d1, d2, fh)
    state.pair = surface.ChristoffelPair(fh, fhc, pair.q)
    state.t_only = False


OPS = {
    "darboux": _op_darboux,
    "t_transform": _op_t_transform,
    "christoffel": _op_christoffel,
    "dress": _op_dress,
    "bianchi": _op_bianchi,
}


# ---------------------------------------------------------------------------
# checks: each returns (max_residual, masked_fraction)
# ---------------------------------------------------------------------------


def _chk_isothermic(state: JobState, c: dict):
    mask = state.pair.f.node_mask | state.pair.fc.node_mask
    field_, _ = surface.isothermic_residual(state.pair.f, state.pair.fc, int(c.get("order", 2)), int(c.get("margin", 1)))
    valid = surface.interior_mask(state.pair.f.shape, int(c.get("margin", 1))) & ~mask
    return surface.masked_max(field_, valid), float(mask.mean())


def _chk_envelope(state: JobState, c: dict):
    if len(state.history) < 2:
        raise SpecInvalid("envelope_residual needs a previous surface")
    prev = state.history[-2]
    field_, mx = surface.envelope_residual(prev.f, state.pair.f, int(c.get("order", 4)), int(c.get("margin", 3)))
    return mx, float(state.pair.f.node_mask.mean())


def _chk_plane_t(state: JobState, c: dict):
    if state.seed_kind != "plane" or not state.t_only:
        raise SpecInvalid("plane_t_closed_form applies to T-transforms of the plane seed")
    r = float(c.get("r", state.t_total))
    X, Y = state.pair.f.mesh()
    X0, Y0 = state.seed.f.base_value[:2]
    ref = closed_forms.plane_t_closed_form(X - X0, Y - Y0, r)
    err = np.abs(state.pair.f.values[..., :3] - ref).max()
    return float(err), 0.0


def _chk_h_surface(state: JobState, c: dict):
    if state.seed_kind != "cylinder" or state.last_darboux is None or state.last_op.get("op") != "darboux":
        raise SpecInvalid("h_surface_invariant needs a Darboux transform of the cylinder seed")
    prev = state.history[-2]
    N = transform.cylinder_normal(prev.f)
    _, mx = transform.h_surface_invariant(prev, state.last_darboux, N, float(c.get("H", 1.0)))
    return mx, float(state.last_darboux.singular_mask.mean())


def _chk_parallel_dual(state: JobState, c: dict):
    if state.seed_kind != "cylinder" or state.last_darboux is None or state.last_op.get("op") != "darboux":
        raise SpecInvalid("parallel_dual needs a Darboux transform of the cylinder seed")
    N = transform.cylinder_normal(state.history[-2].f)
    _, mx = transform.parallel_dual_residual(state.last_darboux, N, float(c.get("H", 1.0)))
    return mx, float(state.last_darboux.singular_mask.mean())


def _chk_involution(state: JobState, c: dict):
    if state.last_darboux is None or state.last_op.get("op") != "darboux":
        raise SpecInvalid("darboux_involution needs a preceding darboux step")
    prev = state.history[-2]
    res = state.last_darboux
    back = transform.darboux(res.as_pair(), res.r, prev.f.base_value)
    valid = ~(back.singular_mask | res.singular_mask)
    err = np.linalg.norm(back.fhat.values - prev.f.values, axis=-1)
    return surface.masked_max(err, valid), float(1 - valid.mean())


def _chk_calapso(state: JobState, c: dict):
    data = calapso.conformal_frame(state.pair.f, int(c.get("order", 2)))
    margin = int(c.get("margin", max(6, (min(data.shape) - 1) // 8)))
    r1, r2 = calapso.calapso_residual(data, margin)
    return max(r1, r2), 0.0


def _chk_lightcone(state: JobState, c: dict):
    diag = state.pair.diagnostics or {}
    if "lightcone_drift" not in diag:
        raise SpecInvalid("lightcone_drift needs a preceding dress step")
    return float(diag["lightcone_drift"]), float(diag["masked_fraction"])


CHECKS = {
    "isothermic_residual": (_chk_isothermic, 1e-3),
    "envelope_residual": (_chk_envelope, 1e-6),
    "plane_t_closed_form": (_chk_plane_t, 1e-5),
    "h_surface_invariant": (_chk_h_surface, 1e-7),
    "parallel_dual": (_chk_parallel_dual, 1e-6),
    "darboux_involution": (_chk_involution, 1e-6),
    "calapso_residual": (_chk_calapso, 1e-2),
    "lightcone_drift": (_chk_lightcone, 1e-9),
}


# ---------------------------------------------------------------------------
# job handling
# ---------------------------------------------------------------------------


def validate_spec(spec) -> dict:
    if not isinstance(spec, dict):
        raise SpecInvalid("a job must be a JSON object")
    seed = spec.get("seed")
    if not isinstance(seed, dict) or "kind" not in seed:
        raise SpecInvalid("missing seed descriptor {kind, params}")
    params = seed.get("params", {})
    if not isinstance(params, dict):
        raise SpecInvalid("seed params must be an object")
    shape = params.get("shape")
    if shape is not None and (len(shape) != 2 or min(shape) < 3):
        raise SpecInvalid("resolution must be at least 3x3")
    transforms = spec.get("transforms", [])
    checks = spec.get("checks", [])
    if not isinstance(transforms, list) or not isinstance(checks, list):
        raise SpecInvalid("transforms and checks must be lists")
    for t in transforms:
        if not isinstance(t, dict) or t.get("op") not in OPS:
            raise SpecInvalid(f"unknown transform op {t.get('op') if isinstance(t, dict) else t!r}")
    for c in checks:
        c = {"name": c} if isinstance(c, str) else c
        if not isinstance(c, dict) or c.get("name") not in CHECKS:
            raise SpecInvalid(f"unknown check {c!r}")
        if "tol" in c and not float(c["tol"]) > 0:
            raise SpecInvalid("tolerances must be positive")
    for k, v in spec.get("tolerances", {}).items():
        if k not in CHECKS or not float(v) > 0:
            raise SpecInvalid(f"invalid tolerance override {k}: {v}")
    return spec


def load_spec(path) -> dict:
    try:
        spec = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpecInvalid(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecInvalid(f"{path}: invalid JSON ({exc})") from exc
    return validate_spec(spec)


def run_job(spec: dict, out_dir=None, write: bool = True) -> dict:
    """Seed, transform, verify and (optionally) write artifacts; returns the report."""
    spec = validate_spec(spec)
    seed_desc = spec["seed"]
    report: dict = {"name": spec.get("name", "job"), "steps": [], "checks": {}, "pass": True}
    try:
        seed = surface.seed_surface(seed_desc["kind"], seed_desc.get("params", {}))
    except IsothermicError as exc:
        raise SpecInvalid(f"seed: {exc}") from exc
    state = JobState(seed, seed_desc["kind"], seed, [seed])
    for step in spec.get("transforms", []):
        log.info("transform %s", step)
        try:
            OPS[step["op"]](state, step)
        except KeyError as exc:
            raise SpecInvalid(f"{step['op']}: missing parameter {exc}") from exc
        except IsothermicError as exc:
            report["steps"].append({"op": step["op"], "status": "error", "error": f"{type(exc).__name__}: {exc}"})
            report["pass"] = False
            report["error"] = report["steps"][-1]["error"]
            return report
        state.history.append(state.pair)
        state.last_op = step
        mask = state.pair.f.node_mask
        report["steps"].append({"op": step["op"], "status": "ok", "masked_fraction": float(mask.mean())})
    overrides = spec.get("tolerances", {})
    for c in spec.get("checks", []):
        c = {"name": c} if isinstance(c, str) else c
        fn, default = CHECKS[c["name"]]
        tol = float(c.get("tol", overrides.get(c["name"], default)))
        key = c.get("label", c["name"])
        try:
            value, masked = fn(state, c)
            ok = bool(np.isfinite(value) and value <= tol)
            report["checks"][key] = {"max_residual": float(value), "masked_fraction": masked, "tol": tol, "pass": ok}
        except IsothermicError as exc:
            report["checks"][key] = {"error": f"{type(exc).__name__}: {exc}", "tol": tol, "pass": False}
            ok = False
        log.info("check %s -> %s", key, report["checks"][key])
        report["pass"] = report["pass"] and ok
    if write:
        _write_outputs(spec, state, report, Path(out_dir or "."))
    return report


def _write_outputs(spec: dict, state: JobState, report: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    outputs = spec.get("outputs", {})
    f = state.pair.f
    if "mesh" in outputs:
        mesh = outputs["mesh"]
        fmt = outputs.get("format", Path(mesh).suffix.lstrip(".") or "obj")
        io.export_mesh(f, out / mesh, fmt, outputs.get("axes", (0, 1, 2)))
    if "grid" in outputs:
        io.save_grid(f, out / outputs["grid"])
    if "dual_grid" in outputs:
        io.save_grid(state.pair.fc, out / outputs["dual_grid"])
    if "csv" in outputs:
        io.save_grid_csv(f, out / outputs["csv"])
    (out / outputs.get("report", "report.json")).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isothermic", description="Transforms of isothermic surfaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a job and write its artifacts")
    run.add_argument("spec")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--verbose", "-v", action="store_true")
    ver = sub.add_parser("verify", help="execute a job's checks without writing artifacts")
    ver.add_argument("spec")
    ver.add_argument("--verbose", "-v", action="store_true")
    exp = sub.add_parser("export", help="convert a grid JSON file to a mesh")
    exp.add_argument("grid")
    exp.add_argument("--format", choices=("obj", "ply"), default="obj")
    exp.add_argument("--axes", default="0,1,2")
    exp.add_argument("--output", "-o", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    try:
        if args.command == "export":
            grid = io.load_grid(args.grid)
            target = args.output or str(Path(args.grid).with_suffix("." + args.format))
            io.export_mesh(grid, target, args.format, args.axes)
            print(target)
            return EXIT_PASS
        spec = load_spec(args.spec)
        report = run_job(spec, getattr(args, "out", None), write=args.command == "run")
    except IsothermicError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps(report, indent=2, sort_keys=True))
    if "error" in report:
        return EXIT_ERROR
    return EXIT_PASS if report["pass"] else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
