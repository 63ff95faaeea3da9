import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bihol import atlas
from bihol import hermitian as H
from bihol.errors import UnsupportedDimensionError
from bihol.geometry import Chart
from bihol.hermitian import HermitianGeometry

from helpers import flat


def amax(x):
    return float(np.max(np.abs(np.asarray(x))))


CONF = atlas.make_conformal_c2().charts["conformal"]
CONTROL = atlas.make_conformal_c2(1.0, 2.0).charts["conformal"]
CONE = atlas.make_sasakian_cone().charts["cone"]
INOUE2 = atlas.make_inoue_family(2).charts["inoue"]
INOUE3 = atlas.make_inoue_family(3).charts["inoue"]

P4 = [0.6, -0.3, 0.4, 0.5]
CONE_P = [1.2, 0.6, 0.3, -0.8]
INOUE_P = {4: [0.3, 1.4, 0.2, -0.5], 6: [0.3, 1.4, 0.2, -0.5, 0.7, 0.1]}

LCK_CHARTS = [(CONF, P4), (CONTROL, P4), (CONE, CONE_P), (INOUE2, INOUE_P[4]), (INOUE3, INOUE_P[6])]
LCK_IDS = ["conformal", "control", "cone", "inoue_n2", "inoue_n3"]

KAHLER_CHARTS = [
    (flat("flat", ["x1", "x2"]), [0.2, 0.3]),
    (flat("flat", ["x1", "x2", "x3", "x4"]), P4),
    (flat("flat", [f"x{i}" for i in range(1, 7)]), INOUE_P[6]),
    (atlas.make_inoue_family(2).charts["kahler_base"], INOUE_P[4]),
    (atlas.make_inoue_family(3).charts["kahler_base"], INOUE_P[6]),
    (atlas.make_inoue_family(4).charts["kahler_base"], [0.3, 1.4, 0.2, -0.5, 0.7, 0.1, 0.0, 0.4]),
    (atlas.make_sasakian_cone().charts["kahler_cone"], CONE_P),
]
KAHLER_IDS = ["flat_c1", "flat_c2", "flat_c3", "base_n2", "base_n3", "base_n4", "kahler_cone"]


# -------------------------------------------------------- structure checks
def test_flat_structure_residuals_vanish():
    r = H.validate_structure(flat("f", ["x1", "x2", "x3", "x4"]), P4)
    assert r == {"j_square_residual": 0.0, "compat_residual": 0.0, "nijenhuis_residual": 0.0}


def test_scaled_structure_reports_square_residual():
    J = [["0", "-1.1"], ["1.1", "0"]]
    r = H.validate_structure(Chart("bad", ["a", "b"], [["1", "0"], ["0", "1"]], (), J), [0, 0])
    assert r["j_square_residual"] == pytest.approx(0.21, abs=1e-14)


def test_cone_structure_is_integrable():
    r = H.validate_structure(CONE, CONE_P)
    assert max(r.values()) <= 1e-9


def test_non_integrable_structure_has_nijenhuis_torsion():
    # the first pairing is stretched by a factor depending on x3
    Jx = [["0", "-(1 + x3^2)", "0", "0"], ["1/(1 + x3^2)", "0", "0", "0"],
          ["0", "0", "0", "-1"], ["0", "0", "1", "0"]]
    chart = Chart("twisted", ["x1", "x2", "x3", "x4"], atlas._diag(["1"] * 4), (), Jx)
    geo = HermitianGeometry(chart, P4, 1)
    assert geo.structure_residuals()["j_square_residual"] <= 1e-15
    assert amax(geo.nijenhuis.value) > 1e-2


# -------------------------------------------------------- classes and forms
@pytest.mark.parametrize("chart,p", KAHLER_CHARTS, ids=KAHLER_IDS)
def test_kahler_charts(chart, p):
    geo = HermitianGeometry(chart, p, 2)
    assert amax(geo.d_kahler_form.value) <= 1e-9
    assert geo.norm(geo.sigma) <= 1e-9
    assert amax(geo.nabla_J.value) <= 1e-9
    classes = H.kahler_form_and_classes(chart, p)
    assert classes["one_two_symplectic_residual"] <= 1e-9
    assert classes["cosymplectic_residual"] <= 1e-9


def test_conformal_chart_is_lck_not_kahler():
    r = H.kahler_form_and_classes(CONF, [1.0, 0.0, 0.0, 0.0])
    assert r["kahler_residual"] > 1
    assert r["lck_residual"] <= 1e-8
    assert r["dtheta_residual"] <= 1e-8
    assert r["cosymplectic_residual"] > 1


@pytest.mark.parametrize("chart,p", LCK_CHARTS, ids=LCK_IDS)
def test_lck_charts(chart, p):
    r = H.kahler_form_and_classes(chart, p)
    scale = max(1.0, amax(r["dOmega"].value))
    assert r["lck_residual"] <= 1e-8 * scale
    assert r["dtheta_residual"] <= 1e-8 * scale


def test_one_two_symplectic_detects_synthetic_perturbation():
    eps = 0.3
    g = [["1 + 0.3*x3", "0", "0", "0"], ["0", "1 + 0.3*x3", "0", "0"], ["0", "0", "1", "0"],
         ["0", "0", "0", "1"]]
    c = Chart("perturbed", ["x1", "x2", "x3", "x4"], g, (), atlas.standard_j(4))
    r = H.kahler_form_and_classes(c, [0.1, 0.2, 0.0, 0.3])
    assert r["kahler_residual"] == pytest.approx(eps)
    assert r["one_two_symplectic_residual"] > 1e-2


def test_conformal_rescaling_rule_for_d_omega():
    geo = HermitianGeometry(CONTROL, P4, 1)
    p = np.array(P4)
    q = 0.5 * (p[0] ** 2 + p[1] ** 2) + (p[2] ** 2 + p[3] ** 2)
    dgamma = -np.array([p[0], p[1], 2 * p[2], 2 * p[3]]) / q
    om = geo.kahler_form.value
    wedge = (np.einsum("i,jk->ijk", dgamma, om) + np.einsum("j,ki->ijk", dgamma, om)
             + np.einsum("k,ij->ijk", dgamma, om))
    np.testing.assert_allclose(geo.d_kahler_form.value, 2 * wedge, atol=1e-12)


# --------------------------------------------------------------- Lee data
def test_lee_field_of_conformally_kahler_metric():
    """B = 2 e^{-2 gamma} grad_0 gamma for g = e^{2 gamma} g_0 with g_0 flat."""
    for chart, a in ((CONF, (1.0, 1.0)), (CONTROL, (0.5, 1.0))):
        p = np.array(P4)
        q = a[0] * (p[0] ** 2 + p[1] ** 2) + a[1] * (p[2] ** 2 + p[3] ** 2)
        grad0 = -2 * np.array([a[0] * p[0], a[0] * p[1], a[1] * p[2], a[1] * p[3]]) / q
        e2g = q ** -2
        data = H.lee_data(chart, p)
        np.testing.assert_allclose(data.B.value, 2 / e2g * grad0, rtol=1e-12)
        np.testing.assert_allclose(data.theta.value, 2 * grad0, rtol=1e-12)


def test_lee_form_at_unit_radius():
    p = [1.0, 0.0, 0.0, 0.0]
    theta = H.lee_data(CONF, p).theta.value
    np.testing.assert_allclose(theta, [-4.0, 0, 0, 0], atol=1e-13)  # -2 d ln|z|^2


@pytest.mark.parametrize("chart,p", LCK_CHARTS, ids=LCK_IDS)
def test_sigma_is_scalar_multiple_of_lee_field(chart, p):
    geo = HermitianGeometry(chart, p, 1)
    m = geo.dim
    np.testing.assert_allclose(geo.sigma.data, (2 - m) / 2 * geo.lee_vector.data, rtol=1e-14, atol=1e-15)


def test_lee_field_needs_dimension_above_two():
    geo = HermitianGeometry(flat("f", ["a", "b"]), [0, 0], 1)
    with pytest.raises(UnsupportedDimensionError):
        geo.lee_vector


def test_plain_chart_is_not_hermitian():
    with pytest.raises(ValueError):
        HermitianGeometry(flat("f", ["a", "b"], hermitian=False), [0, 0], 1)


# ----------------------------------------------------------------- nabla J
@pytest.mark.parametrize("chart,p", KAHLER_CHARTS[:4], ids=KAHLER_IDS[:4])
def test_nabla_J_vanishes_on_kahler(chart, p):
    m = chart.dim
    X, Y = np.linspace(-1, 1, m), np.cos(np.arange(m))
    assert amax(H.nabla_J(chart, p, X, Y).value) <= 1e-12


@pytest.mark.parametrize("chart,p", LCK_CHARTS, ids=LCK_IDS)
def test_nabla_J_along_lee_field_vanishes(chart, p):
    geo = HermitianGeometry(chart, p, 1)
    B = geo.lee_vector.value
    JB = geo.J.value @ B
    scale = max(1.0, amax(geo.nabla_J.value) * float(B @ B))
    assert amax(geo.nabla_J_apply(B, B).value) <= 1e-10 * scale
    assert amax(geo.nabla_J_apply(JB, JB).value) <= 1e-10 * scale


@pytest.mark.parametrize("chart,p", LCK_CHARTS, ids=LCK_IDS)
def test_nabla_J_identity_on_lck(chart, p):
    geo = HermitianGeometry(chart, p, 1)
    rng = np.random.default_rng(11)
    for _ in range(20):
        X, Y = rng.normal(size=(2, geo.dim))
        direct = geo.nabla_J_apply(X, Y).value
        rhs = geo.naj_rhs(X, Y).value
        assert amax(direct - rhs) <= 1e-7 * max(1.0, amax(direct))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=12, max_size=12), st.sampled_from(range(len(LCK_CHARTS))))
def test_D_operator_is_J_invariant(xs, k):
    chart, p = LCK_CHARTS[k]
    geo = HermitianGeometry(chart, p, 2)
    m = geo.dim
    X = np.array(xs[:m])
    J = geo.J.value
    D = geo.D_operator(geo.sigma).value
    lhs, rhs = D @ (J @ X), J @ (D @ X)
    assert amax(lhs - rhs) <= 1e-7 * max(1.0, amax(D) * amax(X))


# ---------------------------------------------------------- star curvature
def test_flat_star_curvature():
    r = H.star_curvature(flat("f", ["x1", "x2", "x3", "x4"]), P4)
    assert r["s"] == 0 and r["s_star"] == 0 and amax(r["ric_star"].value) == 0


@pytest.mark.parametrize("chart,p", KAHLER_CHARTS[3:], ids=KAHLER_IDS[3:])
def test_star_scalar_equals_scalar_on_kahler(chart, p):
    r = H.star_curvature(chart, p)
    assert r["s"] == pytest.approx(r["s_star"], rel=1e-9, abs=1e-9)


def test_star_scalar_on_curved_kahler_base_is_nonzero():
    r = H.star_curvature(KAHLER_CHARTS[3][0], INOUE_P[4])
    assert abs(r["s"]) > 0.1


@pytest.mark.parametrize("chart,p", [c for c in LCK_CHARTS if c[0].dim == 4],
                         ids=[i for i, c in zip(LCK_IDS, LCK_CHARTS) if c[0].dim == 4])
def test_scalar_minus_star_scalar_identity(chart, p):
    geo = HermitianGeometry(chart, p, 2)
    s, s_star = float(geo.scalar_curvature.value), float(np.real(geo.star_scalar.value))
    delta = float(geo.codifferential_lee.value)
    th2 = float(geo.inner(geo.lee_vector, geo.lee_vector).value)
    scale = max(1.0, abs(s), abs(s_star), abs(delta), th2)
    assert abs(s - s_star - 2 * delta - th2) <= 1e-7 * scale


# ------------------------------------------------------- Hermitian frames
@pytest.mark.parametrize("chart,p", LCK_CHARTS, ids=LCK_IDS)
def test_hermitian_frame_is_unitary_and_of_type_10(chart, p):
    geo = HermitianGeometry(chart, p, 1)
    Z, frame = geo.hermitian_frame(order=0)
    Z0 = Z.value
    J, g = geo.J.value, geo.metric.value
    np.testing.assert_allclose(Z0 @ J.T, 1j * Z0, atol=1e-10)
    np.testing.assert_allclose(Z0 @ g @ np.conj(Z0).T, np.eye(geo.dim // 2), atol=1e-10)
    np.testing.assert_allclose(Z0 @ g @ Z0.T, 0, atol=1e-10)


def test_prime_parts_split_a_vector():
    geo = HermitianGeometry(CONF, P4, 1)
    X = np.array([0.3, -1.0, 2.0, 0.5])
    Xp, Xpp = H.prime(geo.J.value, X), H.double_prime(geo.J.value, X)
    np.testing.assert_allclose(Xp + Xpp, X, atol=1e-15)
    np.testing.assert_allclose(geo.J.value @ Xp, 1j * Xp, atol=1e-14)
