"""Closed-form extended frames and T-transforms of the plane and the cylinder.

The frames are 2x2 Clifford matrices over Cl(3, 0), based at ``(0, 0)``.
"""

from __future__ import annotations

import numpy as np

from .clifford import algebra, mat_identity, mat_mul

_ALG = algebra(3)
_E1, _E2, _E3, _E12 = 1, 2, 4, 3  # blade bitmasks


def _const(entries: dict) -> np.ndarray:
    M = np.zeros((2, 2, _ALG.size))
    for (i, j, blade), c in entries.items():
        M[i, j, blade] = c
    return M


PLANE_E1 = _const({(0, 1, _E1): 1.0, (1, 0, _E1): 1.0})
PLANE_E2 = _const({(0, 1, _E2): 1.0, (1, 0, _E2): -1.0})
CYL_EK = _const({(0, 0, _E12): 1.0, (1, 1, _E12): 1.0})
CYL_EP = _const({(0, 1, _E1): 1.0, (1, 0, _E1): -1.0})
CYL_E3 = _const({(0, 1, _E3): 1.0, (1, 0, _E3): 1.0})


def _combo(a, b, E):
    """``a + b E`` for broadcast scalar arrays ``a``, ``b``."""
    a, b = np.broadcast_arrays(np.asarray(a), np.asarray(b))
    out = mat_identity(_ALG, a.shape, dtype=np.result_type(a, b, float)) * a[..., None, None, None]
    return out + b[..., None, None, None] * E


def plane_extended_frame(X, Y, lam) -> np.ndarray:
    """``(cos lam x + sin lam x E1)(cosh lam y + sinh lam y E2)``."""
    A = _combo(np.cos(lam * X), np.sin(lam * X), PLANE_E1)
    B = _combo(np.cosh(lam * Y), np.sinh(lam * Y), PLANE_E2)
    return mat_mul(_ALG, A, B)


def plane_t_closed_form(X, Y, r: float) -> np.ndarray:
    """Based T-transform of the plane ``x e1 + y e2`` for ``r > 0``."""
    s = np.sqrt(r)
    den = 2.0 * (np.cos(s * X) ** 2 + np.sinh(s * Y) ** 2)
    return np.stack([np.sin(2 * s * X) / den, np.sinh(2 * s * Y) / den, np.zeros_like(X)], axis=-1) / s


def cylinder_extended_frame(X, Y, lam) -> np.ndarray:
    """Based extended frame of the cylinder of radius 1/2 and its parallel dual."""
    s = np.emath.sqrt(complex(lam) ** 2 - 1.0) if np.iscomplexobj(lam) else np.emath.sqrt(lam**2 - 1.0)
    xs = X * s
    sinc = np.where(np.abs(s) > 0, np.sinh(xs) / np.where(np.abs(s) > 0, s, 1.0), X)
    A = _combo(np.cosh(xs), sinc, CYL_EK + lam * CYL_EP)
    B = _combo(np.cos(lam * Y), np.sin(lam * Y), CYL_E3)
    C = _combo(np.cos(X), -np.sin(X), CYL_EK)
    out = mat_mul(_ALG, mat_mul(_ALG, A, B), C)
    if not np.iscomplexobj(lam) and np.isrealobj(lam):
        out = np.real_if_close(out, tol=1e6)
        out = out.real if np.iscomplexobj(out) else out
    return out


def cylinder_t_closed_form(X, Y, r: float) -> np.ndarray:
    """Based T-transform ``F_r . 0`` of the cylinder pair for ``r > 0``."""
    lam = np.sqrt(r)
    F = cylinder_extended_frame(X, Y, lam)
    num = F[..., 0, 1, :]
    den = F[..., 1, 1, :]
    return _ALG.vector_part(_ALG.mul(num, _ALG.inverse(den))) / lam
