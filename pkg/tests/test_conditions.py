import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bihol import atlas
from bihol import conditions as C
from bihol.atlas import _diag, flat_chart, standard_j
from bihol.errors import PreconditionError, UnsupportedDimensionError
from bihol.geometry import Chart
from bihol.maps import MapGeometry, SmoothMap

from helpers import random_hermitian_chart, small_point

X4 = ["x1", "x2", "x3", "x4"]
CONF = atlas.make_conformal_c2()
CONTROL = atlas.make_conformal_c2(1.0, 2.0)
CONE = atlas.make_sasakian_cone()
INOUE = {n: atlas.make_inoue_family(n) for n in (2, 3, 4)}
# l.c.K. fails here (dtheta != 0) while J stays integrable and compatible
NOT_LCK = Chart("not_lck", X4, _diag(["1 + x1*x3", "1 + x1*x3", "1", "1"]), (), standard_j(4))
NOT_LCK_POINT = [0.3, 0.1, 0.5, 0.2]

THEOREM_CHECKS = [C.check_theorem_real, C.check_theorem_complex, C.check_lck, C.check_theta_form,
                  C.check_dim4]


def reports_by_id(*groups):
    return {r.condition: r for g in groups for r in g}


def all_lck_reports(chart, point):
    return reports_by_id(*(f(chart, point) for f in THEOREM_CHECKS))


# ----------------------------------------------------------- report record
@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(1e-12, 1e-1))
def test_report_verdict_invariant(residual, scale, tol):
    r = C.ConditionReport("x", (0.0,), residual, scale, tol)
    assert r.residual >= 0 and r.scale >= 0
    assert r.verdict == (r.residual <= tol * r.scale)


# ------------------------------------------------------------ Kaehler charts
@pytest.mark.parametrize("n", [2, 3])
def test_kahler_chart_gives_zero_residuals(n):
    chart = flat_chart(f"c{n}", [f"x{i}" for i in range(1, 2 * n + 1)])
    p = np.linspace(0.1, 0.7, 2 * n)
    checks = THEOREM_CHECKS if n == 2 else THEOREM_CHECKS[:4]
    for f in checks:
        for rep in f(chart, p):
            assert rep.residual == 0.0
            assert rep.verdict


def test_curved_kahler_base_passes():
    chart = INOUE[2].charts["kahler_base"]
    for p in INOUE[2].sample_points(3, 1):
        for rep in all_lck_reports(chart, p).values():
            assert rep.verdict, rep.condition


# --------------------------------------------------- conformal example family
@pytest.mark.parametrize("p", CONF.sample_points(5, 11))
def test_conformal_example_passes_everything(p):
    reps = all_lck_reports(CONF.charts["conformal"], p)
    for rep in reps.values():
        assert rep.residual <= 1e-7 * rep.scale, rep.condition
    for rep in C.check_gck(CONF.charts["flat_base"], "-ln(x1^2 + x2^2 + x3^2 + x4^2)", p):
        assert rep.residual <= 1e-7 * rep.scale


CONTROL_FAILS = {"theorem_real_B", "theorem_complex_B", "lck_B", "theta_B", "dim4_2"}


@pytest.mark.parametrize("p", CONTROL.sample_points(5, 12))
def test_control_fails_exactly_the_scalar_and_vector_conditions(p):
    reps = all_lck_reports(CONTROL.charts["conformal"], p)
    failing = {cid for cid, r in reps.items() if not r.verdict}
    assert failing == CONTROL_FAILS
    for cid in ("theorem_real_B", "dim4_2"):
        assert reps[cid].residual > 1e-3 * reps[cid].scale
    assert reps["dim4_3"].verdict


def test_gck_control_scalar_equation_fails():
    gamma = CONTROL.conditions[-1].gamma
    for p in CONTROL.sample_points(5, 13):
        a, b = C.check_gck(CONTROL.charts["flat_base"], gamma, p)
        assert a.verdict
        assert b.residual > 1e-3 * b.scale


# ------------------------------------------------- real and complex forms
EQUIV_CASES = [(CONF.charts["conformal"], p) for p in CONF.sample_points(2, 1)] + \
    [(CONTROL.charts["conformal"], p) for p in CONTROL.sample_points(3, 2)] + \
    [(CONE.charts["cone"], p) for p in CONE.sample_points(2, 3)] + \
    [(INOUE[3].charts["inoue"], p) for p in INOUE[3].sample_points(2, 4)] + \
    [(NOT_LCK, NOT_LCK_POINT)]


def assert_equivalent(chart, p):
    real = reports_by_id(C.check_theorem_real(chart, p))
    cplx = reports_by_id(C.check_theorem_complex(chart, p))
    for part in "AB":
        r, c = real[f"theorem_real_{part}"], cplx[f"theorem_complex_{part}"]
        assert c.residual == pytest.approx(r.residual, rel=1e-7, abs=1e-7 * max(r.scale, c.scale))
        assert r.verdict == c.verdict
    assert cplx["theorem_complex_B"].terms["imaginary_consistency"] <= 1e-9 * cplx["theorem_complex_B"].scale


@pytest.mark.parametrize("case", range(len(EQUIV_CASES)))
def test_real_and_complex_forms_agree(case):
    assert_equivalent(*EQUIV_CASES[case])


@pytest.mark.parametrize("seed", range(6))
def test_real_and_complex_forms_agree_on_random_hermitian_charts(seed):
    rng = np.random.default_rng(seed)
    chart = random_hermitian_chart(rng, "rand", X4, 0.3)
    p = small_point(rng, 4)
    real = reports_by_id(C.check_theorem_real(chart, p))
    assert real["theorem_real_A"].residual > 1e-4
    assert_equivalent(chart, p)


def test_real_and_complex_forms_raise_below_dimension_four():
    c = flat_chart("c1", ["x", "y"])
    for f in (C.check_theorem_real, C.check_theorem_complex):
        with pytest.raises(UnsupportedDimensionError):
            f(c, [0.1, 0.2])


# ------------------------------------------- l.c.K. and theta-form criteria
LCK_CASES = [(CONF.charts["conformal"], CONF), (CONTROL.charts["conformal"], CONTROL),
             (CONE.charts["cone"], CONE)] + [(b.charts["inoue"], b) for b in INOUE.values()]


@pytest.mark.parametrize("chart,bundle", LCK_CASES, ids=[b.name for _, b in LCK_CASES])
def test_lck_and_theta_verdicts_agree(chart, bundle):
    for p in bundle.sample_points(3, 21):
        lck = reports_by_id(C.check_lck(chart, p))
        theta = reports_by_id(C.check_theta_form(chart, p))
        assert lck["lck_A"].verdict == theta["theta_A"].verdict
        assert lck["lck_B"].verdict == theta["theta_B"].verdict


@pytest.mark.parametrize("chart,bundle", LCK_CASES, ids=[b.name for _, b in LCK_CASES])
def test_lck_verdicts_match_theorem_verdicts(chart, bundle):
    for p in bundle.sample_points(3, 22):
        reps = reports_by_id(C.check_theorem_real(chart, p), C.check_lck(chart, p))
        assert reps["lck_A"].verdict == reps["theorem_real_A"].verdict
        if reps["lck_A"].verdict:
            assert reps["lck_B"].verdict == reps["theorem_real_B"].verdict


@pytest.mark.parametrize("n", [2, 3, 4])
def test_inoue_charts_pass_lck_criterion(n):
    b = INOUE[n]
    for p in b.sample_points(3, 23):
        for rep in C.check_lck(b.charts["inoue"], p):
            assert rep.residual <= 1e-7 * rep.scale


@pytest.mark.parametrize("check", [C.check_lck, C.check_theta_form, C.check_dim4],
                         ids=["lck", "theta", "dim4"])
def test_non_lck_chart_is_a_precondition_error(check):
    with pytest.raises(PreconditionError) as info:
        check(NOT_LCK, NOT_LCK_POINT)
    assert info.value.residual_name == "dtheta_residual"
    assert info.value.value > 0.1


def test_non_lck_chart_still_has_theorem_residuals():
    reps = reports_by_id(C.check_theorem_real(NOT_LCK, NOT_LCK_POINT))
    assert not reps["theorem_real_A"].verdict


def test_lck_residuals_of_conformal_chart():
    from bihol.hermitian import HermitianGeometry
    res = C.lck_residuals(HermitianGeometry(CONF.charts["conformal"], [0.5, 0.2, -0.4, 0.3], 2))
    assert res["d_kahler_form"] > 0.1
    assert max(res[k] for k in ("lck_residual", "dtheta_residual", "nijenhuis_residual")) <= 1e-10


# -------------------------------------------------------- dimension four
def test_dim4_rejects_other_dimensions():
    chart = INOUE[3].charts["inoue"]
    with pytest.raises(UnsupportedDimensionError):
        C.check_dim4(chart, INOUE[3].sample_points(1, 0)[0])


@pytest.mark.parametrize("chart,bundle", [c for c in LCK_CASES if c[1].dim == 4],
                         ids=[b.name for _, b in LCK_CASES if b.dim == 4])
def test_dim4_identity_holds_on_every_lck_surface(chart, bundle):
    for p in bundle.sample_points(4, 24):
        r3 = reports_by_id(C.check_dim4(chart, p))["dim4_3"]
        assert r3.residual <= 1e-7 * r3.scale


# ------------------------------------------------------------ g.c.K.
R2 = "x1^2 + x2^2 + x3^2 + x4^2"


def test_gck_at_unit_radius():
    a, b = C.check_gck(flat_chart("flat", X4), f"-ln({R2})", [1.0, 0.0, 0.0, 0.0])
    assert b.residual <= 1e-14
    assert b.terms["laplacian"] == pytest.approx(-4.0)
    assert b.terms["gradient_term"] == pytest.approx(4.0)
    assert a.residual <= 1e-8


@pytest.mark.parametrize("gamma,killing", [
    (f"-ln({R2})", True),
    ("-ln(0.5*(x1^2 + x2^2) + x3^2 + x4^2)", True),
    ("x1^2 - x3^2", False),
    ("x1*x3", False),
    ("0.3*x1 + x4", False),
    ("-ln(x1^2 + x2^2)", True),
])
def test_gck_hessian_form_agrees_with_killing_form(gamma, killing):
    p = [0.4, -0.3, 0.6, 0.2]
    a, _ = C.check_gck(flat_chart("flat", X4), gamma, p)
    assert a.verdict == killing
    assert bool(a.terms["hessian_verdict"]) == a.verdict


def test_gck_six_dimensional_branch():
    b = INOUE[3]
    task = next(t for t in b.conditions if t.group == "gck")
    for p in b.sample_points(3, 25):
        a, rb = C.check_gck(b.charts["kahler_base"], task.gamma, p)
        assert a.verdict and rb.verdict
        assert a.terms["hessian_verdict"] == 1.0


def test_gck_on_cone():
    for p in CONE.sample_points(3, 26):
        for rep in C.check_gck(CONE.charts["kahler_cone"], "-ln(r^2)", p):
            assert rep.residual <= 1e-7 * rep.scale


def test_gck_needs_kahler_base():
    with pytest.raises(PreconditionError) as info:
        C.check_gck(CONF.charts["conformal"], "0", [0.5, 0.2, -0.4, 0.3])
    assert info.value.residual_name == "kahler_residual"


# ------------------------------------------------------ implication chain
CHAIN_CASES = [(CONF, "conformal", "flat_base"), (CONE, "cone", "kahler_cone")] + \
    [(INOUE[n], "inoue", "kahler_base") for n in (2, 3, 4)]


@pytest.mark.parametrize("bundle,chart,base", CHAIN_CASES, ids=[c[0].name for c in CHAIN_CASES])
def test_gck_implies_lck_and_theorem(bundle, chart, base):
    gamma = next(t.gamma for t in bundle.conditions if t.group == "gck")
    points = bundle.sample_points(3, 27)
    assert all(r.verdict for p in points for r in C.check_gck(bundle.charts[base], gamma, p))
    for p in points:
        for f in (C.check_theorem_real, C.check_lck, C.check_theta_form):
            for rep in f(bundle.charts[chart], p):
                assert rep.verdict, rep.condition


SOUND_CASES = [(CONF, "conformal"), (CONE, "cone"), (INOUE[2], "inoue"), (INOUE[3], "inoue")]


@pytest.mark.parametrize("bundle,chart", SOUND_CASES, ids=[c[0].name for c in SOUND_CASES])
def test_theorem_passing_implies_biharmonic_maps(bundle, chart):
    points = bundle.sample_points(3, 28)
    assert all(r.verdict for p in points for r in C.check_theorem_real(bundle.charts[chart], p))
    for name in bundle.holomorphic_maps:
        smap = bundle.maps[name]
        if smap.domain is not bundle.charts[chart]:
            continue
        for p in points:
            mg = MapGeometry(smap, p, 4)
            assert mg.section_norm(mg.bitension) <= 1e-6 * mg.scale, name


# ------------------------------------------------------------ submersions
def test_flat_projection_submersion():
    c = flat_chart("plane", ["x1", "x2"], False)
    line = flat_chart("line", ["u"], False)
    a, b = C.check_submersion(SmoothMap("pr", c, line, ["x1"]), ["0", "1"], "x2", [0.3, -0.7])
    assert b.residual == 0.0
    assert b.terms["div_V"] == 0.0
    assert a.terms["product"] == pytest.approx(1.0)


def test_cone_radial_projection():
    task = next(t for t in CONE.conditions if t.group == "submersion")
    for p in CONE.sample_points(4, 29):
        for rep in C.check_submersion(CONE.maps[task.map], task.V, task.F, p):
            assert rep.residual <= 1e-7 * max(1.0, rep.scale), rep.condition


@pytest.mark.parametrize("n", [2, 3, 4])
def test_inoue_projection(n):
    b = INOUE[n]
    task = next(t for t in b.conditions if t.group == "submersion")
    for p in b.sample_points(4, 30):
        a, rb = C.check_submersion(b.maps[task.map], task.V, task.F, p)
        assert a.residual <= 1e-7 * a.scale
        assert rb.residual <= 1e-7 * rb.scale
        if n == 3:
            assert "literal_2F_form" in a.terms


def test_submersion_rejects_non_gradient():
    c = flat_chart("plane", ["x1", "x2"], False)
    line = flat_chart("line", ["u"], False)
    with pytest.raises(PreconditionError) as info:
        C.check_submersion(SmoothMap("pr", c, line, ["x1"]), ["0", "2"], "x2", [0.3, -0.7])
    assert info.value.residual_name == "gradient_residual"


def test_submersion_rejects_field_outside_kernel():
    c = flat_chart("plane", ["x1", "x2"], False)
    line = flat_chart("line", ["u"], False)
    with pytest.raises(PreconditionError) as info:
        C.check_submersion(SmoothMap("pr", c, line, ["x1"]), ["1", "0"], "x1", [0.3, -0.7])
    assert info.value.residual_name == "kernel_residual"


def test_submersion_rejects_degenerate_differential():
    c = flat_chart("space", ["x1", "x2", "x3"], False)
    line = flat_chart("line", ["u"], False)
    with pytest.raises(PreconditionError) as info:
        C.check_submersion(SmoothMap("pr", c, line, ["x1"]), ["0", "0", "1"], "x3", [0.3, -0.7, 0.1])
    assert info.value.residual_name == "rank"


# ------------------------------------------------------------ registry
def test_every_condition_belongs_to_a_group():
    groups = {c.group for c in C.CONDITIONS.values()}
    assert set(C.GROUPS) <= groups
    assert groups - set(C.GROUPS) == {"gck", "submersion"}
    assert len(C.CONDITIONS) == 15


@pytest.mark.parametrize("cid", sorted(C.CONDITIONS))
def test_explain_mentions_equation_and_norm(cid):
    text = C.explain(cid)
    info = C.CONDITIONS[cid]
    assert text.startswith(cid)
    assert info.equation in text and info.norm in text
    assert "tol" in text


def test_explain_specific_texts():
    assert "Delta gamma + (m-2)/2 |grad gamma|^2 = 0" in C.explain("gck_B")
    assert "g(nabla_X B, Y) - g(nabla_{JX} B, JY) = (2-m)/4" in C.explain("lck_A")


def test_explain_unknown():
    with pytest.raises(KeyError, match="unknown condition 'nope'; valid ids: dim4_1"):
        C.explain("nope")


@pytest.mark.parametrize("check", [C.check_lck, C.check_theta_form,
                                   lambda c, p: C.check_gck(c, "0", p)], ids=["lck", "theta", "gck"])
def test_surface_charts_are_unsupported(check):
    with pytest.raises(UnsupportedDimensionError):
        check(flat_chart("c1", ["x", "y"]), [0.1, 0.2])
