import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from isothermic import closed_forms
from isothermic.clifford import algebra, mat_inverse, mat_mul
from isothermic.errors import (
    AllSingular,
    DegenerateDenominator,
    InsufficientSamples,
    InvalidParameter,
    NotUnitNormal,
    SeedSingular,
)
from isothermic.surface import (
    ChristoffelPair,
    christoffel_transform,
    cylinder_pair,
    envelope_residual,
    isothermic_residual,
    masked_max,
    plane_pair,
    polarisation,
)
from isothermic.transform import (
    admissible_h_seed,
    bianchi_cube,
    bianchi_fourth,
    cross_ratio_deviation,
    cylinder_normal,
    darboux,
    dual_fourth,
    gauge_R,
    h_surface_invariant,
    hopf_pairing,
    max_workers,
    pair_frame_forms,
    parallel_dual_residual,
    riccati_rhs,
    sym_formula,
    t_transform,
)

SMALL = (-0.5, 0.5, -0.5, 0.5)
CYL = (0.0, 1.0, -0.5, 0.5)


def small_plane(n=41):
    return plane_pair(box=SMALL, shape=(n, n))


def small_cylinder(n=41):
    return cylinder_pair(box=CYL, shape=(n, n), base_point=(0.0, 0.0))


# -- Darboux ---------------------------------------------------------------


def test_darboux_validation():
    pair = small_plane(11)
    with pytest.raises(InvalidParameter):
        darboux(pair, 0.0, [0, 0, 1.0])
    with pytest.raises(SeedSingular):
        darboux(pair, 1.0, pair.f.base_value)


def test_darboux_all_singular():
    # g(o) = 1e9 e3 starts outside the admissible range at every node
    with pytest.raises(AllSingular):
        darboux(small_plane(5), 1.0, [0.0, 0.0, 1e9])


def test_riccati_rhs_by_hand():
    # e3 e1 e3 = e1, so r g df^c g - df = r e1 - df for g = e3
    alg = algebra(3)
    g = np.array([[0.0, 0.0, 1.0]])
    rhs = riccati_rhs(alg, 2.0, g, np.array([[1.0, 0, 0]]), np.array([[0.0, 1.0, 0]]))
    assert np.allclose(rhs, [[2.0, -1.0, 0.0]])
    # g = e1 reflects: e1 e2 e1 = e2
    rhs = riccati_rhs(alg, 1.0, np.array([[1.0, 0, 0]]), np.array([[0.0, 1.0, 0]]), np.zeros((1, 3)))
    assert np.allclose(rhs, [[0.0, 1.0, 0.0]])


def test_darboux_result_fields():
    pair = small_plane(11)
    res = darboux(pair, 1.0, [0.0, 0.0, 1.0])
    assert res.unmasked_fraction == 1.0
    assert res.q == pair.q and res.r == 1.0
    assert np.allclose(res.fhat.values - pair.f.values, res.g.values)
    inv = algebra(3).vec_inverse(res.g.values)
    assert np.allclose(res.fhat_c.values, pair.fc.values + inv)


@pytest.mark.parametrize("make", [small_plane, small_cylinder])
def test_darboux_pair_is_isothermic_and_envelopes(make):
    pair = make(41)
    v = pair.f.base_value + np.array([0.5, -0.6, 0.8])
    res = darboux(pair, 0.7, v)
    assert envelope_residual(pair.f, res.fhat, 4, 3)[1] < 1e-6
    assert np.abs(polarisation(res.as_pair()) - pair.q).max() < 1e-10
    beta, gamma = pair_frame_forms(pair, res)
    # gamma = -r df^c, so the pairing is -r q
    assert np.abs(hopf_pairing(beta, gamma) + 0.7 * pair.q).max() < 1e-10


def test_darboux_residual_is_second_order():
    res = []
    for n in (21, 41, 81):
        pair = small_cylinder(n)
        d = darboux(pair, 0.7, pair.f.base_value + np.array([0.5, -0.6, 0.8]))
        f, fc = d.fhat.with_values(d.fhat.values), d.fhat_c.with_values(d.fhat_c.values)
        res.append(isothermic_residual(f, fc, 2, 1)[1])
    assert res[0] / res[1] > 3.5 and res[1] / res[2] > 3.5


def test_darboux_step_halving_is_fourth_order():
    sols = []
    for n in (21, 41, 81):
        pair = small_cylinder(n)
        sols.append(darboux(pair, 0.7, pair.f.base_value + np.array([0.5, -0.6, 0.8])).fhat.values)
    d1 = np.abs(sols[0] - sols[1][::2, ::2]).max()
    d2 = np.abs(sols[1][::2, ::2] - sols[2][::4, ::4]).max()
    assert 12.0 < d1 / d2 < 20.0


def test_darboux_commutes_with_christoffel():
    errs = []
    for n in (21, 41):
        pair = small_cylinder(n)
        d = darboux(pair, 0.7, pair.f.base_value + np.array([0.5, -0.6, 0.8]))
        ct = christoffel_transform(d.fhat.with_values(d.fhat.values), pair.q, order=4)
        errs.append(np.abs(ct.fc.values - (d.fhat_c.values - d.fhat_c.base_value)).max())
    assert errs[1] < 1e-3 and errs[0] / errs[1] > 3.5


def test_darboux_involution_small_domain():
    pair = small_plane(51)
    v = pair.f.base_value + np.array([0.5, -0.6, 0.8])
    res = darboux(pair, 0.5, v)
    back = darboux(res.as_pair(), 0.5, pair.f.base_value)
    valid = ~(res.singular_mask | back.singular_mask)
    err = np.linalg.norm(back.fhat.values - pair.f.values, axis=-1)
    assert masked_max(err, valid) < 1e-6


@given(
    st.floats(0.2, 1.5),
    st.sampled_from([1.0, -1.0]),
    st.tuples(*(st.floats(-1, 1),) * 3),
)
def test_darboux_involution_property(r_abs, sign, w):
    w = np.array(w)
    assume(np.linalg.norm(w) > 0.6)
    pair = small_plane(21)
    r = sign * r_abs
    res = darboux(pair, r, pair.f.base_value + w)
    gn = np.linalg.norm(res.g.values, axis=-1)
    assume(np.nanmin(gn) > 0.3 and np.nanmax(gn) < 3.0)
    back = darboux(res.as_pair(), r, pair.f.base_value)
    valid = ~(res.singular_mask | back.singular_mask)
    err = np.linalg.norm(back.fhat.values - pair.f.values, axis=-1)
    assert masked_max(err, valid) < 1e-4


# -- T-transforms ----------------------------------------------------------


def test_t_transform_zero_is_identity():
    pair = small_cylinder(21)
    out, frame = t_transform(pair, 0.0)
    assert np.abs(out.f.values - (pair.f.values - pair.f.base_value)).max() < 1e-12
    assert np.abs(frame.pseudo_det() - 1).max() < 1e-12


def test_plane_t_transform_matches_closed_form():
    pair = plane_pair(shape=(41, 41))
    out, frame = t_transform(pair, 0.8)
    X, Y = pair.f.mesh()
    assert np.abs(out.f.values - closed_forms.plane_t_closed_form(X, Y, 0.8)).max() < 1e-12
    assert np.abs(frame.pseudo_det() - 1).max() < 1e-12


def test_cylinder_t_transform_converges():
    errs = []
    for n in (41, 81):
        pair = cylinder_pair(box=(0.0, 1.0, -0.5, 0.5), shape=(n, n), base_point=(0.0, 0.0))
        out, _ = t_transform(pair, 0.8)
        X, Y = pair.f.mesh()
        errs.append(np.abs(out.f.values - closed_forms.cylinder_t_closed_form(X, Y, 0.8)).max())
    assert errs[1] < 1e-5 and errs[0] / errs[1] > 3.5


def test_t_transform_composition():
    pair = small_plane(41)
    a, _ = t_transform(pair, 0.6)
    b, _ = t_transform(a, 0.5)
    c, _ = t_transform(pair, 1.1)
    assert np.abs(b.f.values - c.f.values).max() < 1e-8
    assert np.abs(b.fc.values - c.fc.values).max() < 1e-8


def test_t_transform_pair_is_isothermic():
    pair = small_cylinder(41)
    out, frame = t_transform(pair, 0.6)
    _, mx = isothermic_residual(out.f.with_values(out.f.values), out.fc.with_values(out.fc.values), 4, 3)
    assert mx < 1e-4
    partner = frame.partner()
    assert partner.node_mask[pair.f.base_index]
    _, env = envelope_residual(out.f, partner.with_values(partner.values, mask=partner.node_mask), 4, 4)
    assert env < 1e-3


def test_t_duality_gauge():
    pair = small_plane(21)
    alg = algebra(3)
    _, fr = t_transform(pair, 0.6)
    _, frc = t_transform(ChristoffelPair(pair.fc, pair.f, pair.q), 0.6)
    R = gauge_R(0.6, 3)
    pred = mat_mul(alg, mat_mul(alg, mat_inverse(alg, R), fr.frames), R)
    assert np.abs(pred - frc.frames).max() < 1e-12


# -- Bianchi permutability -----------------------------------------------------


def _bianchi_setup(n=51):
    pair = small_plane(n)
    v1 = pair.f.base_value + np.array([0.5, -0.6, 0.8])
    v2 = pair.f.base_value + np.array([-0.4, 0.3, 0.9])
    return pair, darboux(pair, 0.7, v1), darboux(pair, -0.4, v2)


def test_bianchi_fourth_cross_ratio_and_ode():
    pair, d1, d2 = _bianchi_setup()
    fh = bianchi_fourth(pair.f, d1.fhat, d2.fhat, 0.7, -0.4)
    dev = cross_ratio_deviation(pair.f.values, d1.fhat.values, fh.values, d2.fhat.values, -0.4 / 0.7)
    assert masked_max(dev, ~fh.node_mask) < 1e-8
    ode = darboux(d1.as_pair(), -0.4, fh.base_value)
    err = np.linalg.norm(ode.fhat.values - fh.values, axis=-1)
    assert masked_max(err, ~(fh.node_mask | ode.singular_mask)) < 1e-6
    sym = darboux(d2.as_pair(), 0.7, fh.base_value)
    err = np.linalg.norm(sym.fhat.values - fh.values, axis=-1)
    assert masked_max(err, ~(fh.node_mask | sym.singular_mask)) < 1e-6


def test_bianchi_dual_quadrilateral():
    pair, d1, d2 = _bianchi_setup()
    fh = bianchi_fourth(pair.f, d1.fhat, d2.fhat, 0.7, -0.4)
    fhc = dual_fourth(pair, d1, d2, fh)
    dev = cross_ratio_deviation(pair.fc.values, d1.fhat_c.values, fhc.values, d2.fhat_c.values, -0.4 / 0.7)
    assert masked_max(dev, ~fhc.node_mask) < 1e-8


def test_bianchi_degenerate():
    pair, d1, _ = _bianchi_setup(11)
    with pytest.raises(InvalidParameter):
        bianchi_fourth(pair.f, d1.fhat, d1.fhat, 0.7, 0.7)
    # r2 g1^{-1} = r1 g2^{-1} makes every denominator vanish
    g1 = d1.fhat.values - pair.f.values
    f2 = pair.f.with_values(pair.f.values + (0.7 / -0.4) * g1)
    with pytest.raises(DegenerateDenominator):
        bianchi_fourth(pair.f, d1.fhat, f2, 0.7, -0.4)
    partial = f2.values.copy()
    partial[0, 0] = d1.fhat.values[0, 0] + 1.0
    out = bianchi_fourth(pair.f, d1.fhat, f2.with_values(partial), 0.7, -0.4)
    assert not out.node_mask[0, 0] and out.node_mask[1:, 1:].all()


def test_bianchi_cube_faces(monkeypatch):
    monkeypatch.setenv("ISOTHERMIC_THREADS", "3")
    assert max_workers() == 3
    pair = small_plane(21)
    base = pair.f.base_value
    cube = bianchi_cube(
        pair, 0.7, -0.4, 1.3,
        base + np.array([0.5, -0.6, 0.8]), base + np.array([-0.4, 0.3, 0.9]), base + np.array([0.2, 0.7, -0.6]),
    )
    assert cube.max_face_deviation() < 1e-8
    assert np.nanmax(cube.sphere_residual) < 1e-10
    with pytest.raises(InvalidParameter):
        bianchi_cube(pair, 0.7, 0.7, 1.0, base + 1, base + 2, base + 3)


def test_thread_cap_parsing(monkeypatch):
    monkeypatch.setenv("ISOTHERMIC_THREADS", "zero")
    assert max_workers() == 1
    monkeypatch.delenv("ISOTHERMIC_THREADS")
    assert max_workers() == 1


# -- H-surfaces ------------------------------------------------------------------


def test_h_surface_trivial_seed():
    pair = cylinder_pair(shape=(41, 41))
    N = cylinder_normal(pair.f)
    v = pair.f.base_value + N.base_value
    res = darboux(pair, 1.0, v)
    _, mx = h_surface_invariant(pair, res, N, 1.0)
    assert mx < 1e-8
    # the parallel dual of the cylinder is f + N - e2 = f^c
    assert np.abs(pair.f.values + N.values - [0, 1, 0] - pair.fc.values).max() < 1e-12


def test_h_surface_admissible_seed():
    pair = cylinder_pair(box=(0.0, 1.0, -0.5, 0.5), shape=(51, 51))
    N = cylinder_normal(pair.f)
    v = admissible_h_seed(pair.f.base_value, N.base_value, 1.0, -1.0, [0, 0, 1.0])
    res = darboux(pair, -1.0, v)
    drift, mx = h_surface_invariant(pair, res, N, 1.0)
    assert drift[pair.f.base_index] < 1e-14
    assert mx < 1e-6
    assert parallel_dual_residual(res, N, 1.0)[1] < 1e-6


def test_h_surface_errors():
    pair = cylinder_pair(shape=(11, 11))
    N = cylinder_normal(pair.f)
    with pytest.raises(InvalidParameter):
        admissible_h_seed(pair.f.base_value, N.base_value, 1.0, 0.5)
    with pytest.raises(InvalidParameter):
        admissible_h_seed(pair.f.base_value, N.base_value, 0.0, 2.0)
    res = darboux(pair, 1.0, pair.f.base_value + N.base_value)
    with pytest.raises(NotUnitNormal):
        h_surface_invariant(pair, res, N.with_values(2 * N.values), 1.0)


# -- Sym formula -----------------------------------------------------------------


def test_sym_formula_on_plane_frames():
    pair = plane_pair(shape=(21, 21))
    X, Y = pair.f.mesh()
    eps = 1e-3
    samples = {lam: closed_forms.plane_extended_frame(X, Y, lam) for lam in (0.0, eps, -eps, 2 * eps, -2 * eps)}
    pf = sym_formula(samples, pair.f)
    # d/dlam of the plane frame at 0 has off-diagonal blocks x e1 + y e2 and x e1 - y e2
    assert np.abs(pf.f0.values[..., :2] - np.stack([X, Y], -1)).max() < 1e-10
    assert np.abs(pf.f0c.values[..., :2] - np.stack([X, -Y], -1)).max() < 1e-10
    assert pf.flatness_residual() < 1e-9


def test_sym_formula_needs_samples():
    pair = plane_pair(shape=(5, 5))
    frame = np.zeros((5, 5, 2, 2, 8))
    with pytest.raises(InsufficientSamples):
        sym_formula({0.1: frame, -0.1: frame}, pair.f)
    with pytest.raises(InsufficientSamples):
        sym_formula({0.0: frame, 0.1: frame}, pair.f)
    pf = sym_formula({0.0: frame, 0.1: frame, -0.1: frame}, pair.f)
    assert np.all(pf.f0.values == 0)
