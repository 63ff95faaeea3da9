"""Smooth maps between charts: differential, tension, bitension, chain formula.

Sections of the pull-back bundle are jets with one axis indexed by codomain
coordinates.  Codomain quantities (metric, Christoffel symbols, curvature) are
expanded at phi(p) in codomain coordinates and then composed with the jet of
phi, so everything ends up as a jet in domain coordinates.

Order budget for the bitension: map components are evaluated at order 4 and
both metrics at order 3.  The tension is then a jet of order 2 and the
pull-back rough Laplacian consumes the remaining two orders.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import jets
from .errors import CapabilityError, DomainError, NotHolomorphicError
from .expr import Expr, eval_field, evaluate, parse, parse_constraint, to_text
from .geometry import Chart, PointGeometry, constraint_text
from .hermitian import HermitianGeometry
from .jets import Jet, contract

HOLOMORPHY_TOL = 1e-8


@dataclass(frozen=True)
class SmoothMap:
    """phi: domain -> codomain given by codomain coordinates as domain expressions.

    ``where`` lists extra positivity constraints (on domain coordinates) under
    which the formula is valid, e.g. ``x3^2 + x4^2 > 0`` for z1/z2.
    ``declared_holomorphic`` is informational; holomorphy is always measured.
    """

    name: str
    domain: Chart
    codomain: Chart
    components: tuple
    declared_holomorphic: Optional[bool] = None
    where: tuple = ()

    def __post_init__(self):
        comps = tuple(parse(c, self.domain.coords) for c in self.components)
        if len(comps) != self.codomain.dim:
            raise ValueError(
                f"map {self.name!r} has {len(comps)} components, codomain dimension is "
                f"{self.codomain.dim}")
        object.__setattr__(self, "components", comps)
        w = tuple(c if isinstance(c, Expr) else parse_constraint(c, self.domain.coords)
                  for c in self.where)
        object.__setattr__(self, "where", w)

    def image(self, point) -> np.ndarray:
        return np.array([float(evaluate(c, point)) for c in self.components])

    def valid_at(self, point, margin: float = 0.0) -> bool:
        try:
            if any(float(evaluate(c, point)) <= margin for c in self.where):
                return False
            return self.codomain.contains(self.image(point))
        except (ValueError, ZeroDivisionError):
            return False

    def to_dict(self, chart_names: dict) -> dict:
        out = {
            "domain": chart_names.get(self.domain, self.domain.name),
            "codomain": chart_names.get(self.codomain, self.codomain.name),
            "components": [to_text(c) for c in self.components],
        }
        if self.declared_holomorphic is not None:
            out["holomorphic"] = bool(self.declared_holomorphic)
        if self.where:
            out["where"] = [constraint_text(c) for c in self.where]
        return out


def _geometry_for(chart: Chart, point, order: int) -> PointGeometry:
    if chart.is_hermitian:
        return HermitianGeometry(chart, point, order)
    return PointGeometry(chart, point, order)


class MapGeometry:
    """Jet-level data of a map at one domain point.

    ``order`` is the order of the map-component jets; metrics are evaluated at
    ``order - 1``.
    """

    def __init__(self, smap: SmoothMap, point, order: int = 4):
        if order < 2:
            raise CapabilityError("map geometry needs at least order 2")
        self.map = smap
        self.order = order
        self.dom = _geometry_for(smap.domain, point, order - 1)
        self.point = self.dom.point
        self.x = jets.seed_jets(self.point, order)
        self.phi = Jet.stack([eval_field(c, self.x) for c in smap.components])
        self.q = np.asarray(self.phi.value, dtype=float)
        if not smap.codomain.contains(self.q):
            raise DomainError(
                f"image {self.q.tolist()} of map {smap.name!r} leaves chart "
                f"{smap.codomain.name!r}")
        self.cod = _geometry_for(smap.codomain, self.q, order - 1)

    # pulled-back codomain data --------------------------------------------
    @cached_property
    def dphi(self) -> Jet:
        """``dphi[a, i]`` = d_i phi^a."""
        return self.phi.partials()

    @cached_property
    def target_christoffel(self) -> Jet:
        return jets.compose(self.cod.christoffel, self.phi)

    @cached_property
    def target_riemann(self) -> Jet:
        return jets.compose(self.cod.riemann, self.phi)

    @cached_property
    def target_metric(self) -> Jet:
        return jets.compose(self.cod.metric, self.phi)

    # first and second order ---------------------------------------------
    @cached_property
    def second_fundamental_form(self) -> Jet:
        """``sff[a, i, j]`` = (nabla d phi)(d_i, d_j)^a."""
        dphi = self.dphi
        dd = dphi.partials()  # [a, i, j] = d_j d_i phi^a
        S = (dd - contract("kij,ak->aij", self.dom.christoffel, dphi)
             + contract("abc,bi,cj->aij", self.target_christoffel, dphi, dphi))
        # symmetric in exact arithmetic; averaging removes roundoff asymmetry
        return 0.5 * (S + S.transpose(0, 2, 1))

    @cached_property
    def tension(self) -> Jet:
        return contract("ij,aij->a", self.dom.inverse, self.second_fundamental_form)

    def nabla_section(self, v: Jet) -> Jet:
        """``[a, i]`` = (nabla^phi_{d_i} v)^a."""
        return v.partials() + contract("abc,bi,c->ai", self.target_christoffel, self.dphi, v)

    def nabla2_section(self, v: Jet) -> Jet:
        """``[a, i, j]`` = (nabla^phi_j nabla^phi v)(d_i)^a."""
        w = self.nabla_section(v)
        return (w.partials() + contract("abc,bj,ci->aij", self.target_christoffel, self.dphi, w)
                - contract("kji,ak->aij", self.dom.christoffel, w))

    def rough_laplacian(self, v: Jet) -> Jet:
        return contract("ij,aij->a", self.dom.inverse, self.nabla2_section(v))

    def ricci_phi(self, v: Jet) -> Jet:
        """Ric^phi v = sum_i R^N(v, dphi e_i) dphi e_i."""
        return contract("ij,lkab,a,bi,kj->l", self.dom.inverse, self.target_riemann, v,
                        self.dphi, self.dphi)

    def jacobi_like(self, v: Jet) -> Jet:
        return self.rough_laplacian(v) + self.ricci_phi(v)

    @cached_property
    def bitension(self) -> Jet:
        if self.order < 4:
            raise CapabilityError("bitension needs map jets of order 4")
        return self.jacobi_like(self.tension)

    def push(self, V) -> Jet:
        """dphi(V)."""
        return contract("ai,i->a", self.dphi, V)

    def sff_apply(self, X, Y) -> Jet:
        return contract("aij,i,j->a", self.second_fundamental_form, X, Y)

    # norms ----------------------------------------------------------------
    def section_norm(self, v) -> float:
        v0 = jets.value(v)
        h0 = self.cod.metric.value
        return float(np.sqrt(max(np.real(np.einsum("ab,a,b->", h0, v0, np.conj(v0))), 0.0)))

    @cached_property
    def dphi_norm(self) -> float:
        d0 = self.dphi.value
        val = np.einsum("ij,ab,ai,bj->", self.dom.inverse.value, self.cod.metric.value, d0, d0)
        return float(np.sqrt(max(val, 0.0)))

    @cached_property
    def scale(self) -> float:
        dn = self.dphi_norm
        return max(1.0, dn ** 3, self.section_norm(self.tension) * dn)

    @cached_property
    def holomorphy_residual(self) -> float:
        if not (self.map.domain.is_hermitian and self.map.codomain.is_hermitian):
            raise ValueError("holomorphy residual needs complex structures on both charts")
        d0 = self.dphi.value
        return float(np.max(np.abs(d0 @ self.dom.J.value - self.cod.J.value @ d0)))

    def require_holomorphic(self, tol: float = HOLOMORPHY_TOL):
        r = self.holomorphy_residual
        if r > tol:
            raise NotHolomorphicError(
                f"map {self.map.name!r} is not holomorphic at {self.point.tolist()} "
                f"(residual {r:.3e})", "holomorphy_residual", r)
        return r

    # the Hermitian-frame route -------------------------------------------
    def bitension_hermitian_route(self) -> Jet:
        """tau_2 from sigma = J div J over a Hermitian frame.

        Valid for holomorphic maps into (1,2)-symplectic targets, where
        tau = -dphi(sigma).  Returns a complex order-0 jet; its imaginary part
        should vanish.
        """
        self.require_holomorphic()
        dom = self.dom
        sigma = dom.sigma
        L = dom.rough_laplacian(sigma) + dom.ricci_apply(sigma) - dom.covariant(sigma, sigma)
        Z, _ = dom.hermitian_frame(order=0)
        nsig = dom.nabla(sigma, "u")  # [k, i]
        trace = 0
        for j in range(len(Z)):
            Zj = Z[j].value
            Zb = np.conj(Zj)
            trace = trace + self.sff_apply(Zj, contract("ki,i->k", nsig, Zb)) \
                + self.sff_apply(Zb, contract("ki,i->k", nsig, Zj))
        expr = self.push(L) - self.sff_apply(sigma, sigma) + 2 * trace
        return -expr.truncate(0)


# ------------------------------------------------------------ functional API
def _mg(smap, point, order):
    return point if isinstance(point, MapGeometry) else MapGeometry(smap, point, order)


def differential(smap: SmoothMap, point) -> Jet:
    return _mg(smap, point, 2).dphi


def holomorphy_residual(smap: SmoothMap, point) -> float:
    return _mg(smap, point, 2).holomorphy_residual


def second_fundamental_form(smap: SmoothMap, point) -> Jet:
    return _mg(smap, point, 2).second_fundamental_form


def tension(smap: SmoothMap, point) -> Jet:
    return _mg(smap, point, 2).tension


def bitension(smap: SmoothMap, point) -> Jet:
    return _mg(smap, point, 4).bitension


def chain_formula_residual(smap: SmoothMap, point, V, order: int = 3) -> dict:
    """LHS - RHS of the commutation formula for (tr nabla^2 + Ric^phi)(dphi V).

    Returns the residual section, the four constituent terms, their norms and
    a scale (sum of term norms, at least 1).
    """
    mg = _mg(smap, point, order)
    dom = mg.dom
    Vj = Jet.stack([eval_field(parse(v, smap.domain.coords), mg.x) for v in V]) \
        if not isinstance(V, Jet) else V
    lhs = mg.jacobi_like(mg.push(Vj))
    t_domain = mg.push(dom.rough_laplacian(Vj) + dom.ricci_apply(Vj))
    t_tension = contract("ai,i->a", mg.nabla_section(mg.tension), Vj)
    nV = dom.nabla(Vj, "u")  # [k, i]
    t_trace = 2 * contract("ij,aik,kj->a", dom.inverse, mg.second_fundamental_form, nV)
    residual = lhs - t_domain - t_tension - t_trace
    terms = {
        "lhs": lhs.truncate(0),
        "dphi_jacobi_V": t_domain.truncate(0),
        "nabla_V_tension": t_tension.truncate(0),
        "trace_sff_nabla_V": t_trace.truncate(0),
    }
    norms = {k: mg.section_norm(v) for k, v in terms.items()}
    return {
        "residual": residual.truncate(0),
        "residual_norm": mg.section_norm(residual),
        "terms": terms,
        "term_norms": norms,
        "scale": max(1.0, sum(norms.values())),
    }
