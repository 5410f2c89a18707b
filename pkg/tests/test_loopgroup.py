import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isothermic.clifford import algebra, lorentz_inner, lorentz_metric
from isothermic.closed_forms import cylinder_extended_frame, plane_extended_frame
from isothermic.errors import (
    DegenerateLine,
    EqualParameters,
    InsufficientSamples,
    InvalidAlpha,
    InvalidParameter,
    MissingAlphaSample,
    NullSeed,
    OutOfChart,
    PoleEvaluation,
)
from isothermic.loopgroup import (
    SimpleFactor,
    complex_embed,
    default_lambdas,
    dress,
    dress_pair_direct,
    evaluate_factor,
    extended_frame,
    factor_from_line,
    lc_to_matrix,
    make_simple_factor,
    matrix_to_lc,
    permutability_factors,
    twist,
)
from isothermic.surface import cylinder_pair, plane_pair
from isothermic.transform import darboux

BOX = (-0.5, 0.5, -0.5, 0.5)
V = np.array([0.3, 0.2, 0.5])
LINEAR = [0.1, 0.2, 0.3, 0.4, 0.5]


def small_plane(n=31):
    return plane_pair(box=BOX, shape=(n, n))


def test_factor_parameter_and_projections():
    p = make_simple_factor(1.0, V, np.zeros(3))
    assert p.t(0.0) == 1.0
    pp, p0, pm = p.projections()
    I = np.eye(5)
    assert np.allclose(pp + p0 + pm, I)
    for P in (pp, p0, pm):
        assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(pp @ pm, 0, atol=1e-12)
    # the line itself is the +1 eigenspace of pi_+
    assert np.allclose(pp @ p.u, p.u)


@pytest.mark.parametrize("alpha", [1.0, 1j, 0.5, 2j])
def test_factor_is_orthogonal_and_trivial_at_zero(alpha):
    p = make_simple_factor(alpha, V, np.array([0.1, 0.0, -0.1]))
    G = lorentz_metric(3)
    for lam in (0.37 + 0.2j, -0.8, 0.25j):
        M = evaluate_factor(p, lam)
        assert np.abs(M.T @ G @ M - G).max() < 1e-12
    assert np.abs(evaluate_factor(p, 0.0) - np.eye(5)).max() < 1e-12


def test_factor_inverse_is_reflected_parameter():
    # p(lam) p(-lam) = 1 since t(-lam) = 1 / t(lam)
    p = make_simple_factor(0.8, V, np.zeros(3))
    lam = 0.3 + 0.1j
    assert np.abs(evaluate_factor(p, lam) @ evaluate_factor(p, -lam) - np.eye(5)).max() < 1e-12


def test_factor_line_is_null():
    u = complex_embed(1j * V)
    assert abs(lorentz_inner(u, u)) < 1e-14


def test_factor_json_roundtrip():
    p = make_simple_factor(1j, V, np.array([0.0, 0.1, 0.0]))
    q = SimpleFactor.from_json(p.to_json())
    assert q.alpha == p.alpha and np.allclose(q.u, p.u)
    r = factor_from_line(0.5, complex_embed(V))
    s = SimpleFactor.from_json(r.to_json())
    assert np.allclose(s.u, r.u)


def test_factor_errors():
    with pytest.raises(InvalidAlpha):
        make_simple_factor(0.0, V, np.zeros(3))
    with pytest.raises(InvalidAlpha):
        make_simple_factor(1 + 1j, V, np.zeros(3))
    with pytest.raises(NullSeed):
        make_simple_factor(1.0, V, V)
    p = make_simple_factor(1.0, V, np.zeros(3))
    with pytest.raises(PoleEvaluation):
        evaluate_factor(p, 1.0)
    with pytest.raises(PoleEvaluation):
        evaluate_factor(p, -1.0)
    with pytest.raises(DegenerateLine):
        factor_from_line(1.0, np.array([0, 0, 0, 0, 1.0]))
    with pytest.raises(DegenerateLine):
        factor_from_line(1.0, np.array([0, 0, 0, 1.0, 0]))


def test_light_cone_matrix_roundtrip():
    alg = algebra(3)
    w = np.array([[0.1, -0.2, 0.3, 0.4, -0.5], [1.0, 0.0, 0.0, 2.0, 3.0]])
    assert np.allclose(matrix_to_lc(alg, lc_to_matrix(alg, w)), w)


def test_default_lambdas_closed_under_symmetries():
    lams = default_lambdas(1j)
    for lam in lams:
        assert any(abs(-lam - m) < 1e-14 for m in lams)
        assert any(abs(np.conj(lam) - m) < 1e-14 for m in lams)
    assert 0 in lams


@pytest.mark.parametrize("lam", [0.5, 1.0])
def test_plane_frame_matches_closed_form(lam):
    pair = plane_pair(shape=(41, 41))
    phi = extended_frame(pair, [0, lam, -lam])
    X, Y = pair.f.mesh()
    assert np.abs(phi.frame(lam) - plane_extended_frame(X, Y, lam)).max() < 1e-6


@pytest.mark.parametrize("lam", [0.5, 1.0])
def test_cylinder_frame_matches_closed_form(lam):
    pair = cylinder_pair(shape=(201, 201))
    phi = extended_frame(pair, [0, lam, -lam])
    X, Y = pair.f.mesh()
    assert np.abs(phi.frame(lam) - cylinder_extended_frame(X, Y, lam)).max() < 1e-6


def test_frame_symmetries_and_base():
    phi = extended_frame(small_plane(), default_lambdas(1j))
    assert phi.base_defect() < 1e-14
    assert phi.reality_defect() < 1e-12
    assert phi.twisting_defect() < 1e-12


def test_twist_is_involution():
    F = np.random.default_rng(1).normal(size=(2, 2, 8))
    assert np.array_equal(twist(twist(F)), F)


def test_sym_recovers_cylinder_pair():
    pair = cylinder_pair(shape=(101, 101))
    phi = extended_frame(pair, default_lambdas())
    S = phi.sym()
    for got, want in ((S.f0, pair.f), (S.f0c, pair.fc)):
        d = got.values - want.values
        assert np.abs(d - d[pair.f.base_index]).max() < 1e-5


def test_extended_frame_errors():
    pair = small_plane(11)
    with pytest.raises(InsufficientSamples):
        extended_frame(pair, [0.5, -0.5])
    with pytest.raises(InvalidParameter):
        extended_frame(pair, [0, 0.5])
    with pytest.raises(InvalidParameter):
        extended_frame(pair, [0, 0.5j, -0.5j, 0.3 + 0.1j, -0.3 - 0.1j])
    phi = extended_frame(pair, default_lambdas())
    with pytest.raises(InsufficientSamples):
        phi.flatness_residual([0.1, 0.2])
    with pytest.raises(MissingAlphaSample):
        phi.frame(0.77)


@pytest.mark.parametrize("alpha", [1.0, 1j])
def test_dressing_matches_darboux(alpha):
    pair = small_plane()
    p = make_simple_factor(alpha, V, pair.f.base_value)
    direct = dress_pair_direct(p, pair)
    d = darboux(pair, float(np.real(alpha * alpha)), V)
    assert np.nanmax(np.abs(direct.f.values - d.fhat.values)) < 1e-6
    assert np.nanmax(np.abs(direct.fc.values - d.fhat_c.values)) < 1e-6
    assert direct.diagnostics["lightcone_drift"] < 1e-9
    assert direct.diagnostics["imaginary_part"] < 1e-9


@pytest.mark.parametrize("alpha", [1.0, 1j])
def test_dressed_frame_properties(alpha):
    pair = small_plane()
    p = make_simple_factor(alpha, V, pair.f.base_value)
    phi = extended_frame(pair, default_lambdas(alpha))
    out = dress(p, phi)
    assert not out.has(alpha) and not out.has(-alpha)
    assert out.base_defect() < 1e-12
    assert out.reality_defect() < 1e-10
    assert out.twisting_defect() < 1e-10
    assert out.flatness_residual(LINEAR) < 1e-8
    # the Sym formula of the dressed frame is the Darboux pair up to translation
    S = out.sym()
    d = darboux(pair, float(np.real(alpha * alpha)), V)
    diff = S.f0.values - d.fhat.values
    assert np.nanmax(np.abs(diff - diff[pair.f.base_index])) < 1e-4


def test_dress_errors():
    pair = small_plane(11)
    p = make_simple_factor(1.0, V, pair.f.base_value)
    with pytest.raises(MissingAlphaSample):
        dress(p, extended_frame(pair, default_lambdas()))
    phi = extended_frame(pair, default_lambdas(1.0))
    with pytest.raises(OutOfChart):
        dress(p, phi, chart_tol=2.0)


def test_flatness_of_seed_frames():
    for pair in (small_plane(21), cylinder_pair(shape=(21, 21))):
        phi = extended_frame(pair, default_lambdas())
        assert phi.flatness_residual(LINEAR) < 1e-12


def test_factor_permutability():
    p1 = make_simple_factor(1.0, V, np.zeros(3))
    p2 = make_simple_factor(0.7j, np.array([-0.2, 0.4, 0.1]), np.zeros(3))
    q1, q2, res = permutability_factors(p1, p2)
    assert res < 1e-10
    assert q1.alpha == p1.alpha and q2.alpha == p2.alpha
    with pytest.raises(EqualParameters):
        permutability_factors(p1, make_simple_factor(-1.0, V, np.ones(3)))


@given(
    st.floats(0.3, 2.0),
    st.floats(0.3, 2.0),
    st.booleans(),
    st.lists(st.floats(-1, 1), min_size=6, max_size=6),
)
def test_factor_permutability_property(s1, s2, imag2, coords):
    a2 = 1j * s2 if imag2 else s2
    if abs(s1 * s1 - (a2 * a2).real) < 0.05:
        return
    x1, x2 = np.array(coords[:3]), np.array(coords[3:])
    if np.linalg.norm(x1) < 0.1 or np.linalg.norm(x2) < 0.1:
        return
    p1 = make_simple_factor(s1, x1, np.zeros(3))
    p2 = make_simple_factor(a2, x2, np.zeros(3))
    try:
        _, _, res = permutability_factors(p1, p2)
    except DegenerateLine:
        return
    assert res < 1e-8


def test_frame_level_permutability():
    pair = small_plane()
    p1 = make_simple_factor(1.0, V, pair.f.base_value)
    p2 = make_simple_factor(0.7j, np.array([-0.2, 0.4, 0.1]), pair.f.base_value)
    q1, q2, _ = permutability_factors(p1, p2)
    phi = extended_frame(pair, default_lambdas() + [1, -1, 0.7j, -0.7j])
    A = dress(q1, dress(p2, phi))
    B = dress(q2, dress(p1, phi))
    mask = A.mask | B.mask
    common = [lam for lam in A.samples if B.has(lam)]
    assert len(common) >= 5
    worst = max(np.nanmax(np.abs(A.samples[lam] - B.frame(lam))[~mask]) for lam in common)
    assert worst < 1e-6
    assert A.flatness_residual(LINEAR) < 1e-8
