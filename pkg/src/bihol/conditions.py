"""Pointwise residual checkers for the sufficient conditions for biharmonicity.

Every checker returns :class:`ConditionReport` objects: a non-negative
residual, a scale built from the magnitudes of the terms that enter the
residual, and the verdict ``residual <= tol * scale``.  Violated hypotheses
raise :class:`~bihol.errors.PreconditionError` instead of producing a failed
verdict.

Residual norms: tensor equations use the max over coordinate components;
vector equations use the g-norm at the point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import jets
from .errors import PreconditionError, UnsupportedDimensionError
from .expr import Expr, eval_field, parse
from .geometry import Chart
from .hermitian import HermitianGeometry, double_prime, prime
from .jets import Jet, contract
from .maps import MapGeometry, SmoothMap

DEFAULT_TOL = 1e-6
LCK_TOL = 1e-7
KAHLER_TOL = 1e-8
GRADIENT_TOL = 1e-8


@dataclass
class ConditionReport:
    condition: str
    point: tuple
    residual: float
    scale: float
    tol: float = DEFAULT_TOL
    terms: dict = field(default_factory=dict)
    chart: str = ""
    map: Optional[str] = None

    def __post_init__(self):
        self.residual = float(abs(self.residual))
        self.scale = float(max(self.scale, 0.0))
        self.point = tuple(float(v) for v in self.point)

    @property
    def verdict(self) -> bool:
        return self.residual <= self.tol * self.scale

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale else float("inf")


def _amax(x) -> float:
    v = np.asarray(jets.value(x))
    return float(np.max(np.abs(v))) if v.size else 0.0


def _scale(*mags) -> float:
    return max([1.0] + [float(m) for m in mags])


def _hgeo(hchart: Chart, point, order: int) -> HermitianGeometry:
    if isinstance(point, HermitianGeometry) and point.order >= order:
        return point
    return HermitianGeometry(hchart, point, order)


def _require_dim(geo, minimum=4, exact=None):
    m = geo.dim
    if exact is not None and m != exact:
        raise UnsupportedDimensionError(f"condition needs real dimension {exact}, chart has {m}")
    if m < minimum:
        raise UnsupportedDimensionError(f"condition needs real dimension >= {minimum}, chart has {m}")


def _report(cid, geo, residual, scale, tol, terms, map_name=None):
    return ConditionReport(cid, tuple(geo.point), residual, scale, tol,
                           {k: float(v) for k, v in terms.items()}, geo.chart.name, map_name)


def _j_defect(T: np.ndarray, J: np.ndarray) -> np.ndarray:
    """T(X, Y) - T(JX, JY) for a (0,2)-tensor matrix."""
    return T - J.T @ T @ J


def _frame_norm2(T: np.ndarray, ginv: np.ndarray) -> float:
    """Frobenius norm of a (0,2)-tensor in a g-orthonormal frame."""
    return float(np.sqrt(max(np.real(np.einsum("ik,jl,ij,kl->", ginv, ginv, T, np.conj(T))), 0.0)))


# ------------------------------------------------------- general Hermitian
def _theorem_vector_terms(geo: HermitianGeometry) -> dict:
    s = geo.sigma
    return {
        "rough_laplacian": geo.rough_laplacian(s),
        "ricci": geo.ricci_apply(s),
        "nabla_sigma_sigma": -geo.covariant(s, s),
    }


def check_theorem_real(hchart: Chart, point, tol: float = DEFAULT_TOL):
    """Real forms of the two general conditions on sigma = J div J."""
    geo = _hgeo(hchart, point, 3)
    _require_dim(geo)
    J = geo.J.value
    s = geo.sigma
    sflat = geo.lower(s).value
    lie = geo.lie_derivative_metric(s).value
    quad = np.outer(sflat, sflat)
    lie_d, quad_d = _j_defect(lie, J), _j_defect(quad, J)
    T = lie_d - quad_d
    rep_a = _report("theorem_real_A", geo, _amax(T), _scale(_amax(lie_d), _amax(quad_d)), tol, {
        "lie_term": _amax(lie_d),
        "sigma_term": _amax(quad_d),
        "frame_norm": _frame_norm2(T, geo.inverse.value),
        "sigma_norm": geo.norm(s),
    })

    parts = _theorem_vector_terms(geo)
    Js = geo.apply_J(s)
    parts["nabla_J_sigma"] = 0.5 * geo.apply_J(geo.nabla_J_apply(s, s) + geo.nabla_J_apply(Js, Js))
    nJ, D = geo.nabla_J, geo.D_operator(s)
    parts["trace_D"] = 0.5 * (contract("ij,kpi,pj->k", geo.inverse, nJ, D)
                              - contract("ij,kjq,qi->k", geo.inverse, nJ, D))
    total = sum(parts.values())
    norms = {k: geo.norm(v) for k, v in parts.items()}
    rep_b = _report("theorem_real_B", geo, geo.norm(total), _scale(*norms.values()), tol, norms)
    return rep_a, rep_b


def check_theorem_complex(hchart: Chart, point, tol: float = DEFAULT_TOL):
    """Complex forms over a Hermitian frame.

    Report A evaluates C(Z, W) = g(nabla_Z s, W) + g(nabla_W s, Z) - g(s, Z) g(s, W)
    on the frame, then expands the coordinate (1,0)-vectors d_i - iJd_i in the
    frame so the residual is measured in the same components as the real form.
    Report B takes the (1,0)-part W' of the vector equation and measures the
    real vector 2 Re W'.
    """
    geo = _hgeo(hchart, point, 3)
    _require_dim(geo)
    m = geo.dim
    J = geo.J
    s = geo.sigma
    g0 = geo.metric.value
    Z, _ = geo.hermitian_frame(order=1)
    Z0 = Z.value  # (n, m)
    ns0 = geo.nabla(s, "u").value  # [k, i]
    s0 = s.value

    def gb(u, v):
        return np.einsum("ij,...i,...j->...", g0, u, v)

    nZ = Z0 @ ns0.T  # rows: nabla_{Z_j} s
    C_lie = np.einsum("ij,ai,bj->ab", g0, nZ, Z0) + np.einsum("ij,bi,aj->ab", g0, nZ, Z0)
    C_quad = np.outer(gb(s0, Z0), gb(s0, Z0))
    C = C_lie - C_quad
    coord = np.eye(m) - 1j * J.value.T  # rows: d_i - i J d_i
    c = np.einsum("ij,ai,bj->ab", g0, coord, np.conj(Z0))
    C_coord = c @ C @ c.T
    scale = _scale(_amax((c @ C_lie @ c.T).real), _amax((c @ C_quad @ c.T).real))
    rep_a = _report("theorem_complex_A", geo, _amax(C_coord.real), scale, tol, {
                        "frame_max": _amax(C),
                        "imaginary_part": _amax(C_coord.imag),
                        "frame_norm": 2 * np.sqrt(2) * float(np.sqrt(np.sum(np.abs(C) ** 2))),
                    })

    parts = _theorem_vector_terms(geo)
    acc = 0
    for j in range(Z.shape[0]):
        Zj = Z[j]
        Zb = Zj.conj()
        acc = acc + geo.covariant(Zj, double_prime(J, geo.covariant(Zb, s))) \
            + geo.covariant(prime(J, geo.covariant(Zj, s)), Zb)
    parts["frame_correction"] = -2 * (acc - geo.covariant(prime(J, s), double_prime(J, s)))
    real_parts = {k: 2 * prime(J, v).truncate(0).real for k, v in parts.items()}
    total = sum(real_parts.values())
    norms = {k: geo.norm(v) for k, v in real_parts.items()}
    W1 = prime(J, sum(parts.values())).value
    norms["imaginary_consistency"] = _amax(W1 - 0.5 * (total.value - 1j * J.value @ total.value))
    scale = _scale(*(v for k, v in norms.items() if k != "imaginary_consistency"))
    rep_b = _report("theorem_complex_B", geo, geo.norm(total), scale, tol, norms)
    return rep_a, rep_b


# ------------------------------------------------------------------ l.c.K.
def lck_residuals(geo: HermitianGeometry) -> dict:
    dO = geo.d_kahler_form
    return {
        "lck_residual": _amax(dO - geo.theta_wedge_omega),
        "dtheta_residual": _amax(geo.d_lee_form),
        "nijenhuis_residual": _amax(geo.nijenhuis),
        "d_kahler_form": _amax(dO),
    }


def require_lck(geo: HermitianGeometry, tol: float = LCK_TOL) -> dict:
    res = lck_residuals(geo)
    bound = tol * _scale(res["d_kahler_form"])
    for name in ("lck_residual", "dtheta_residual", "nijenhuis_residual"):
        if res[name] > bound:
            raise PreconditionError(
                f"chart {geo.chart.name!r} is not locally conformally Kaehler at "
                f"{geo.point.tolist()}: {name} = {res[name]:.3e}", name, res[name])
    return res


def check_lck(hchart: Chart, point, tol: float = DEFAULT_TOL):
    """Lee-field conditions on an l.c.K. chart."""
    geo = _hgeo(hchart, point, 3)
    _require_dim(geo)
    require_lck(geo)
    m = geo.dim
    J = geo.J.value
    B = geo.lee_vector
    th = geo.lee_form.value
    nB = geo.nabla(B, "u").value  # [k, i]
    N = nB.T @ geo.metric.value  # N[i, j] = g(nabla_i B, d_j)
    quad = np.outer(th, th)
    c = (2 - m) / 4
    T = _j_defect(N, J) - c * _j_defect(quad, J)
    rep_a = _report("lck_A", geo, _amax(T), _scale(_amax(N), abs(c) * _amax(quad)), tol, {
        "nabla_B_term": _amax(_j_defect(N, J)),
        "theta_term": abs(c) * _amax(_j_defect(quad, J)),
    })

    divB = geo.divergence(B)
    parts = {
        "rough_laplacian": geo.rough_laplacian(B),
        "ricci": geo.ricci_apply(B),
        "nabla_B_B": (m - 6) / 2 * geo.covariant(B, B),
        "div_B": divB * B,
        "norm_B": -(m - 2) / 4 * geo.inner(B, B) * B,
    }
    norms = {k: geo.norm(v) for k, v in parts.items()}
    rep_b = _report("lck_B", geo, geo.norm(sum(parts.values())), _scale(*norms.values()), tol, norms)
    return rep_a, rep_b


def check_theta_form(hchart: Chart, point, tol: float = DEFAULT_TOL):
    """The same l.c.K. conditions written with the Lee form."""
    geo = _hgeo(hchart, point, 3)
    _require_dim(geo)
    require_lck(geo)
    m = geo.dim
    J = geo.J.value
    th = geo.lee_form
    nth = geo.nabla(th, "l").value.T  # [i, j] = (nabla_i theta)_j
    c = (m - 2) / 4
    quad = c * np.outer(th.value, th.value)
    T = nth + quad
    rep_a = _report("theta_A", geo, _amax(_j_defect(T, J)), _scale(_amax(nth), _amax(quad)), tol, {
        "nabla_theta": _amax(nth),
        "theta_theta": _amax(quad),
    })
    delta = float(geo.codifferential_lee.value)
    sq = c * float(geo.inner(geo.lee_vector, geo.lee_vector).value)
    rep_b = _report("theta_B", geo, delta + sq, _scale(abs(delta), abs(sq)), tol, {
        "codifferential": delta,
        "theta_norm_term": sq,
    })
    return rep_a, rep_b


# ------------------------------------------------------------ conformal Kaehler
def require_kahler(geo: HermitianGeometry, tol: float = KAHLER_TOL) -> float:
    r = _amax(geo.d_kahler_form)
    n = _amax(geo.nijenhuis)
    for name, v in (("kahler_residual", r), ("nijenhuis_residual", n)):
        if v > tol:
            raise PreconditionError(
                f"chart {geo.chart.name!r} is not Kaehler at {geo.point.tolist()}: "
                f"{name} = {v:.3e}", name, v)
    return r


def check_gck(kahler_chart: Chart, gamma, point, tol: float = DEFAULT_TOL):
    """Conformal factor e^{2 gamma} on a Kaehler chart.

    Report A: residual of the Killing equation for J(e^{(m-6)gamma/2} grad gamma);
    the J-invariance defect of the Hessian of e^{(m-6)gamma/2} (of gamma when
    m = 6) is an equivalent formulation and is returned as a term.
    Report B: Delta gamma + (m-2)/2 |grad gamma|^2.
    """
    geo = _hgeo(kahler_chart, point, 2)
    _require_dim(geo)
    require_kahler(geo)
    m = geo.dim
    J = geo.J.value
    expr = gamma if isinstance(gamma, Expr) else parse(gamma, kahler_chart.coords)
    gam = eval_field(expr, geo.x)
    grad = geo.grad(gam)
    k = (m - 6) / 2
    weight = jets.exp(gam * k) if m != 6 else Jet.constant(1.0, geo.dim, geo.order)
    xi = geo.apply_J(weight * grad)
    lie = geo.lie_derivative_metric(xi).value
    potential = jets.exp(gam * k) if m != 6 else gam
    hess = geo.hessian(potential).value
    hess_defect = _amax(_j_defect(hess, J))
    nabla_xi = _amax(geo.nabla(xi, "u").value)
    rep_a = _report("gck_A", geo, _amax(lie), _scale(_amax(geo.metric.value) * nabla_xi), tol, {
        "killing_residual": _amax(lie),
        "hessian_defect": hess_defect,
        "hessian_scale": _scale(_amax(hess)),
        "hessian_verdict": float(hess_defect <= tol * _scale(_amax(hess))),
    })
    lap = float(geo.laplacian(gam).value)
    sq = (m - 2) / 2 * float(geo.inner(grad, grad).value)
    rep_b = _report("gck_B", geo, lap + sq, _scale(abs(lap), abs(sq)), tol, {
        "laplacian": lap,
        "gradient_term": sq,
    })
    return rep_a, rep_b


# ------------------------------------------------------------- dimension four
def check_dim4(hchart: Chart, point, tol: float = DEFAULT_TOL):
    """J-invariance of Ric, s = s*, and the identity s - s* = 2 delta(theta) + |theta|^2."""
    geo = _hgeo(hchart, point, 2)
    _require_dim(geo, exact=4)
    require_lck(geo)
    J = geo.J.value
    ric = geo.ricci.value
    s = float(geo.scalar_curvature.value)
    s_star = float(np.real(geo.star_scalar.value))
    delta = float(geo.codifferential_lee.value)
    th2 = float(geo.inner(geo.lee_vector, geo.lee_vector).value)
    r1 = _report("dim4_1", geo, _amax(_j_defect(ric, J)), _scale(_amax(ric)), tol,
                 {"ricci": _amax(ric)})
    r2 = _report("dim4_2", geo, s - s_star, _scale(abs(s), abs(s_star)), tol,
                 {"s": s, "s_star": s_star})
    r3 = _report("dim4_3", geo, s - s_star - 2 * delta - th2,
                 _scale(abs(s), abs(s_star), 2 * abs(delta), th2), tol,
                 {"s_minus_s_star": s - s_star, "two_delta_theta": 2 * delta, "theta_sq": th2})
    return r1, r2, r3


# --------------------------------------------------------------- submersions
def product_of_eigenvalues(mg: MapGeometry, V: Jet) -> Jet:
    """prod lambda_i as sqrt det(g^-1 phi*h + V (x) V^flat / |V|^2)."""
    dom = mg.dom
    h = mg.target_metric
    pull = contract("ab,ai,bj->ij", h, mg.dphi, mg.dphi)
    A = contract("ik,kj->ij", dom.inverse, pull)
    Vflat = dom.lower(V)
    proj = contract("i,j->ij", V, Vflat) / dom.inner(V, V)
    return jets.sqrt(jets.det(A + proj))


def check_submersion(smap: SmoothMap, V, F, point, tol: float = DEFAULT_TOL):
    """Eigenvalue conditions for a submersion whose fibres are spanned by V = grad F.

    Report A compares prod lambda_i with F^{4/(m-6)} |grad F| (m != 6) or with
    e^{2F} |grad F| (m = 6; the literal 2F |grad F| is returned as a term).
    Report B is div V + V(ln(prod lambda_i / |V|)).
    """
    mg = MapGeometry(smap, point, order=2)
    dom = mg.dom
    m = dom.dim
    coords = smap.domain.coords
    x = dom.x
    Vj = Jet.stack([eval_field(v if isinstance(v, Expr) else parse(v, coords), x) for v in V])
    Fe = F if isinstance(F, Expr) else parse(F, coords)
    Fj = eval_field(Fe, jets.seed_jets(dom.point, 2))
    gradF = contract("ij,j->i", dom.inverse.value, Fj.partials().value)
    Vn = dom.norm(Vj)

    g_res = float(np.max(np.abs(Vj.value - gradF)))
    if g_res > GRADIENT_TOL * _scale(Vn):
        raise PreconditionError(f"V is not grad F at {dom.point.tolist()} (residual {g_res:.3e})",
                                "gradient_residual", g_res)
    d0 = mg.dphi.value
    sv = np.linalg.svd(d0, compute_uv=False)
    if len(sv) < m - 1 or sv[m - 2] <= 1e-8 * _scale(sv[0]):
        raise PreconditionError("differential kernel is not one-dimensional", "rank", float(len(sv)))
    k_res = mg.section_norm(mg.push(Vj.value))
    if k_res > GRADIENT_TOL * _scale(Vn * sv[0]):
        raise PreconditionError(f"V is not in the kernel of the differential (residual {k_res:.3e})",
                                "kernel_residual", k_res)
    if dom.chart.is_hermitian:
        require_kahler(dom)
        killing = _amax(dom.lie_derivative_metric(dom.apply_J(Vj)))
        if killing > GRADIENT_TOL * _scale(_amax(dom.nabla(Vj, "u"))):
            raise PreconditionError(f"JV is not Killing (residual {killing:.3e})",
                                    "jv_killing_residual", killing)

    prod = product_of_eigenvalues(mg, Vj)
    p0 = float(np.real(prod.value))
    Fv = float(Fj.value)
    if m != 6:
        target = Fv ** (4.0 / (m - 6)) * Vn
        terms = {"product": p0, "target": target}
    else:
        target = float(np.exp(2 * Fv)) * Vn
        literal = 2 * Fv * Vn
        terms = {"product": p0, "target": target, "literal_2F_form": literal,
                 "literal_residual": abs(p0 - literal)}
    rep_a = _report("submersion_A", dom, p0 - target, _scale(p0, target), tol, terms, smap.name)

    ln_ratio = jets.log(prod / jets.sqrt(dom.inner(Vj, Vj)))
    div = float(dom.divergence(Vj).value)
    along = float(np.real(contract("i,i->", Vj, ln_ratio.partials()).value))
    rep_b = _report("submersion_B", dom, div + along, _scale(abs(div), abs(along)), tol,
                    {"div_V": div, "V_ln_ratio": along}, smap.name)
    return rep_a, rep_b


# ----------------------------------------------------------------- registry
@dataclass(frozen=True)
class ConditionInfo:
    id: str
    group: str
    summary: str
    equation: str
    norm: str


CONDITIONS = {c.id: c for c in [
    ConditionInfo("theorem_real_A", "theorem_real",
                  "J-anti-invariant part of L_s g matches that of s^b (x) s^b, s = J div J",
                  "(L_s g)(X,Y) - (L_s g)(JX,JY) = s^b(X) s^b(Y) - s^b(JX) s^b(JY)",
                  "max over coordinate pairs (X,Y) = (d_i, d_j)"),
    ConditionInfo("theorem_real_B", "theorem_real",
                  "fourth-order vector equation on s = J div J",
                  "tr nabla^2 s + Ric s - nabla_s s + 1/2 J((nabla_s J)s + (nabla_{Js} J)Js)"
                  " + 1/2 tr((nabla_. J) o D(.) - (nabla_{D(.)} J)(.)) = 0,"
                  " D(X) = nabla_{JX} s + J nabla_X s",
                  "g-norm of the vector"),
    ConditionInfo("theorem_complex_A", "theorem_complex",
                  "symmetrized complex Hessian condition on (1,0)-vectors",
                  "g(nabla_Z s, W) + g(nabla_W s, Z) = g(s, Z) g(s, W) for Z, W of type (1,0)",
                  "evaluated on a Hermitian frame Z_j = (e_j - iJe_j)/sqrt 2, reported in"
                  " coordinate components X - iJX"),
    ConditionInfo("theorem_complex_B", "theorem_complex",
                  "(1,0)-part of the frame form of the vector equation",
                  "(tr nabla^2 s + Ric s - nabla_s s - 2(nabla_{Z_j}(nabla_{Zbar_j} s)''"
                  " + nabla_{(nabla_{Z_j} s)'} Zbar_j - nabla_{s'} s''))' = 0",
                  "g-norm of 2 Re of the (1,0)-vector"),
    ConditionInfo("lck_A", "lck", "Lee-field bilinear condition on an l.c.K. chart",
                  "g(nabla_X B, Y) - g(nabla_{JX} B, JY) = (2-m)/4 (theta(X)theta(Y)"
                  " - theta(JX)theta(JY))",
                  "max over coordinate pairs"),
    ConditionInfo("lck_B", "lck", "Lee-field vector equation on an l.c.K. chart",
                  "tr nabla^2 B + Ric B + (m-6)/2 nabla_B B + (div B - (m-2)/4 |B|^2) B = 0",
                  "g-norm of the vector"),
    ConditionInfo("gck_A", "gck", "Killing hypothesis on the conformal factor",
                  "L_xi g = 0 for xi = J(e^{(m-6)gamma/2} grad gamma); equivalently"
                  " Hess(e^{(m-6)gamma/2}) is J-invariant (Hess(gamma) when m = 6)",
                  "max over coordinate components of L_xi g"),
    ConditionInfo("gck_B", "gck", "scalar equation on the conformal factor",
                  "Delta gamma + (m-2)/2 |grad gamma|^2 = 0",
                  "absolute value; Delta = tr nabla d on the Kaehler metric"),
    ConditionInfo("theta_A", "theta", "Lee-form tensor is J-invariant",
                  "nabla theta + (m-2)/4 theta (x) theta is J-invariant",
                  "max over coordinate pairs of T(X,Y) - T(JX,JY)"),
    ConditionInfo("theta_B", "theta", "Lee-form scalar equation",
                  "delta theta + (m-2)/4 |theta|^2 = 0, delta theta = -div theta^#",
                  "absolute value"),
    ConditionInfo("dim4_1", "dim4", "Ricci tensor is J-invariant (m = 4)",
                  "Ric(JX, JY) = Ric(X, Y)", "max over coordinate pairs"),
    ConditionInfo("dim4_2", "dim4", "scalar and star-scalar curvatures agree (m = 4)",
                  "s = s*, s* = tr Ric*, Ric*(X,Y) = tr(Z -> R(X,JZ)JY)", "absolute value"),
    ConditionInfo("dim4_3", "dim4", "curvature identity on l.c.K. surfaces (always expected to hold)",
                  "s - s* = 2 delta theta + |theta|^2", "absolute value"),
    ConditionInfo("submersion_A", "submersion", "eigenvalue product of the pulled-back metric",
                  "prod lambda_i = F^{4/(m-6)} |grad F| (m != 6), = e^{2F} |grad F| (m = 6)",
                  "absolute value; prod lambda_i = sqrt det(g^-1 phi*h + V (x) V^b / |V|^2)"),
    ConditionInfo("submersion_B", "submersion", "divergence identity for a vertical field",
                  "div V + V(ln(prod lambda_i / |V|)) = 0", "absolute value"),
]}

GROUPS = {
    "theorem_real": check_theorem_real,
    "theorem_complex": check_theorem_complex,
    "lck": check_lck,
    "theta": check_theta_form,
    "dim4": check_dim4,
}


def explain(condition_id: str, tol: float = DEFAULT_TOL) -> str:
    if condition_id not in CONDITIONS:
        raise KeyError(f"unknown condition {condition_id!r}; valid ids: {', '.join(sorted(CONDITIONS))}")
    c = CONDITIONS[condition_id]
    return "\n".join([
        f"{c.id}: {c.summary}",
        f"  equation:  {c.equation}",
        f"  residual:  {c.norm}",
        f"  verdict:   pass iff residual <= tol * scale, scale = max(1, magnitudes of the terms);"
        f" default tol = {tol:g}",
        "  conventions: R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y], Ric(V) = sum R(V,e_i)e_i,"
        " Omega(X,Y) = g(X,JY), s = J div J, B = 2/(2-m) s, theta = B^b",
    ])
