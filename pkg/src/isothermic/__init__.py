"""Isothermic surfaces in R^n: Clifford algebra, transforms and loop-group dressing."""

from . import calapso, clifford, closed_forms, errors, io, loopgroup, surface, transform
from .calapso import CalapsoData, calapso_residual, conformal_frame, frame_from_calapso
from .clifford import (
    INFINITY,
    Multivector,
    Signature,
    VahlenMatrix,
    algebra,
    cross_ratio,
    geometric_product,
    is_vahlen,
    lightcone_embed,
    mobius_apply,
    stereo_project,
)
from .errors import IsothermicError
from .loopgroup import (
    ExtendedFrameField,
    SimpleFactor,
    dress,
    dress_pair_direct,
    extended_frame,
    make_simple_factor,
    permutability_factors,
)
from .surface import (
    ChristoffelPair,
    SurfaceGrid,
    christoffel_transform,
    envelope_residual,
    isothermic_residual,
    seed_surface,
)
from .transform import (
    DarbouxResult,
    FrameField,
    bianchi_cube,
    bianchi_fourth,
    darboux,
    h_surface_invariant,
    sym_formula,
    t_transform,
)

__version__ = "0.1.0"

__all__ = [
    "CalapsoData",
    "ChristoffelPair",
    "DarbouxResult",
    "ExtendedFrameField",
    "FrameField",
    "INFINITY",
    "IsothermicError",
    "Multivector",
    "Signature",
    "SimpleFactor",
    "SurfaceGrid",
    "VahlenMatrix",
    "algebra",
    "bianchi_cube",
    "bianchi_fourth",
    "calapso",
    "calapso_residual",
    "christoffel_transform",
    "clifford",
    "closed_forms",
    "conformal_frame",
    "cross_ratio",
    "darboux",
    "dress",
    "dress_pair_direct",
    "envelope_residual",
    "errors",
    "extended_frame",
    "frame_from_calapso",
    "geometric_product",
    "h_surface_invariant",
    "io",
    "is_vahlen",
    "isothermic_residual",
    "lightcone_embed",
    "loopgroup",
    "make_simple_factor",
    "mobius_apply",
    "permutability_factors",
    "seed_surface",
    "stereo_project",
    "surface",
    "sym_formula",
    "t_transform",
]
