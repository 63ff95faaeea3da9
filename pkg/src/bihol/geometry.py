"""Riemannian calculus on a single coordinate chart, evaluated in jets at a point.

Index conventions (all arrays are jets with the listed batch axes):

* ``g[i, j]`` metric, ``ginv[i, j]`` inverse metric.
* ``christoffel[k, i, j]`` = Gamma^k_ij, so that nabla_i d_j = Gamma^k_ij d_k.
* ``riemann[l, k, i, j]`` with R(d_i, d_j) d_k = R^l_kij d_l and
  R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z.
* Covariant derivatives append the derivative index last:
  ``nabla(V, "u")[k, i]`` = (nabla_i V)^k.
* The Ricci operator is Ric(V) = sum_i R(V, e_i) e_i, which is +(m-1) Id on
  the unit sphere under the curvature sign above.  Textbooks differ; this is
  the convention every formula in :mod:`bihol.maps` and
  :mod:`bihol.conditions` assumes.
* Laplacian on functions is ``tr nabla d f`` (negative spectrum).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import jets
from .errors import DegenerateMetricError, DomainError, PreconditionError
from .expr import Expr, Sub, evaluate, eval_field, eval_many, parse, parse_constraint, to_text
from .jets import Jet, contract

DEFAULT_MARGIN = 0.1
FRAME_COMPAT_TOL = 1e-8


def _matrix(entries, coords, what):
    rows = tuple(tuple(parse(e, coords) for e in row) for row in entries)
    m = len(coords)
    if len(rows) != m or any(len(r) != m for r in rows):
        raise ValueError(f"{what} must be a {m}x{m} matrix")
    return rows


@dataclass(frozen=True)
class Chart:
    """A coordinate chart with a metric and, optionally, an almost complex structure.

    ``domain`` holds expressions that must all be strictly positive at valid
    points.  ``complex_structure[i][j]`` is the component J^i_j, i.e.
    J d_j = J^i_j d_i.
    """

    name: str
    coords: tuple
    metric: tuple
    domain: tuple = ()
    complex_structure: Optional[tuple] = None

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        if len(coords) < 1:
            raise ValueError("chart needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        metric = _matrix(self.metric, coords, "metric")
        for i in range(len(coords)):
            for j in range(i):
                if metric[i][j] != metric[j][i]:
                    raise ValueError(
                        f"metric of chart {self.name!r} is not symmetric at ({i},{j})")
        object.__setattr__(self, "metric", metric)
        dom = tuple(
            d if isinstance(d, Expr) else parse_constraint(d, coords) for d in self.domain
        )
        object.__setattr__(self, "domain", dom)
        if self.complex_structure is not None:
            object.__setattr__(self, "complex_structure",
                               _matrix(self.complex_structure, coords, "complex_structure"))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def is_hermitian(self) -> bool:
        return self.complex_structure is not None

    def parse(self, text) -> Expr:
        return parse(text, self.coords)

    def domain_values(self, point) -> np.ndarray:
        return np.array([float(evaluate(d, point)) for d in self.domain])

    def contains(self, point, margin: float = 0.0) -> bool:
        try:
            return bool(np.all(self.domain_values(point) > margin))
        except (ValueError, ZeroDivisionError):
            return False

    def with_complex_structure(self, J) -> "Chart":
        return Chart(self.name, self.coords, self.metric, self.domain, J)

    def renamed(self, name: str) -> "Chart":
        return Chart(name, self.coords, self.metric, self.domain, self.complex_structure)

    def to_dict(self) -> dict:
        out = {
            "coords": list(self.coords),
            "domain": [constraint_text(d) for d in self.domain],
            "metric": [[to_text(e) for e in row] for row in self.metric],
        }
        if self.complex_structure is not None:
            out["complex_structure"] = [[to_text(e) for e in row] for row in self.complex_structure]
        return out


def constraint_text(e: Expr) -> str:
    """Inverse of ``parse_constraint`` for an expression that must stay positive."""
    if isinstance(e, Sub):
        return f"{to_text(e.left)} > {to_text(e.right)}"
    return f"{to_text(e)} > 0"


def inverse_metric(g: Jet) -> Jet:
    """Jet inverse: numeric inverse at order 0, then the nilpotent Neumann series."""
    g0 = g.value
    m = g0.shape[0]
    g0inv = np.linalg.solve(g0, np.eye(m))
    nil = g - g0
    step = -contract("ij,jk->ik", g0inv, nil)
    term = Jet.constant(g0inv, g.dim, g.order)
    total = term
    for _ in range(g.order):
        term = contract("ij,jk->ik", step, term)
        total = total + term
    return total


class PointGeometry:
    """Metric quantities of ``chart`` as jets of the given order at ``point``.

    Everything is computed lazily and cached; instances are read-only.
    """

    def __init__(self, chart: Chart, point, order: int = 3):
        self.chart = chart
        self.point = np.asarray(point, dtype=float).ravel()
        if self.point.shape != (chart.dim,):
            raise ValueError(f"point must have {chart.dim} coordinates")
        if not chart.contains(self.point):
            raise DomainError(f"point {self.point.tolist()} is outside chart {chart.name!r}")
        self.order = order
        self.dim = chart.dim
        self.x = jets.seed_jets(self.point, order)
        g0 = self.metric.value
        try:
            np.linalg.cholesky(g0)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError(
                f"metric of {chart.name!r} is not positive definite at {self.point.tolist()}"
            ) from None

    # field evaluation ---------------------------------------------------
    def eval(self, e) -> Jet:
        if not isinstance(e, Expr):
            e = self.chart.parse(e)
        return eval_field(e, self.x)

    def eval_vector(self, exprs) -> Jet:
        if isinstance(exprs, Jet):
            return exprs
        return Jet.stack([self.eval(e) for e in exprs])

    # metric & connection ------------------------------------------------
    @cached_property
    def metric(self) -> Jet:
        return eval_many(self.chart.metric, self.x)

    @cached_property
    def inverse(self) -> Jet:
        return inverse_metric(self.metric)

    @cached_property
    def dmetric(self) -> Jet:
        """``dmetric[i, j, l]`` = d_l g_ij."""
        return self.metric.partials()

    @cached_property
    def christoffel(self) -> Jet:
        dg = self.dmetric
        combo = contract("jli->lij", dg) + contract("ilj->lij", dg) - contract("ijl->lij", dg)
        return 0.5 * contract("kl,lij->kij", self.inverse, combo)

    @cached_property
    def riemann(self) -> Jet:
        G = self.christoffel
        dG = G.partials()  # dG[k, i, j, l] = d_l Gamma^k_ij
        return (contract("ljki->lkij", dG) - contract("likj->lkij", dG)
                + contract("lip,pjk->lkij", G, G) - contract("ljp,pik->lkij", G, G))

    @cached_property
    def ricci_operator_matrix(self) -> Jet:
        """Ric^l_a with Ric(V)^l = Ric^l_a V^a."""
        return contract("ij,ljai->la", self.inverse, self.riemann)

    @cached_property
    def ricci(self) -> Jet:
        """Ricci tensor Ric(X, Y) = g(Ric(X), Y) as ``ricci[a, b]``."""
        return contract("lb,la->ab", self.metric, self.ricci_operator_matrix)

    @cached_property
    def scalar_curvature(self) -> Jet:
        return contract("ll->", self.ricci_operator_matrix)

    def lowered_riemann(self) -> Jet:
        """R_{wkij} = g(R(d_i, d_j) d_k, d_w)."""
        return contract("wl,lkij->wkij", self.metric, self.riemann)

    # algebra ------------------------------------------------------------
    def inner(self, u, v) -> Jet:
        """g(u, v) for vector jets (plain arrays are treated as constants)."""
        return contract("ij,i,j->", self.metric, u, v)

    def norm(self, v) -> float:
        """Pointwise g-norm of a (real or complex) vector; Hermitian for complex."""
        v0 = jets.value(v)
        g0 = self.metric.value
        return float(np.sqrt(max(np.real(np.einsum("ij,i,j->", g0, v0, np.conj(v0))), 0.0)))

    def lower(self, v) -> Jet:
        return contract("ij,j->i", self.metric, v)

    def raise_index(self, w) -> Jet:
        return contract("ij,j->i", self.inverse, w)

    # differential operators --------------------------------------------
    def nabla(self, T: Jet, variance: str) -> Jet:
        """Covariant derivative of a tensor whose slots are 'u' (upper) / 'l' (lower).

        The derivative index is appended as the last axis.
        """
        if len(variance) != len(T.shape):
            raise ValueError(f"variance {variance!r} does not match tensor rank {len(T.shape)}")
        letters = "abcdefgh"[: len(variance)]
        out = T.partials()
        G = self.christoffel
        for s, kind in enumerate(variance):
            src = letters[:s] + "y" + letters[s + 1:]
            if kind == "u":
                out = out + contract(f"{letters[s]}zy,{src}->{letters}z", G, T)
            elif kind == "l":
                out = out - contract(f"yz{letters[s]},{src}->{letters}z", G, T)
            else:
                raise ValueError(f"bad variance letter {kind!r}")
        return out

    def covariant(self, X, Y: Jet) -> Jet:
        """nabla_X Y for vector jets."""
        return contract("ki,i->k", self.nabla(Y, "u"), X)

    def grad(self, f: Jet) -> Jet:
        return contract("ij,j->i", self.inverse, f.partials())

    def hessian(self, f: Jet) -> Jet:
        return self.nabla(f.partials(), "l")

    def laplacian(self, f: Jet) -> Jet:
        return contract("ij,ij->", self.inverse, self.hessian(f))

    def divergence(self, V: Jet) -> Jet:
        return contract("ii->", self.nabla(V, "u"))

    def rough_laplacian(self, V: Jet) -> Jet:
        """tr nabla^2 V = g^ij (nabla^2 V)(d_i, d_j)."""
        second = self.nabla(self.nabla(V, "u"), "ul")  # [k, i, j] = nabla_j nabla_i V^k
        return contract("ij,kij->k", self.inverse, second)

    def ricci_apply(self, V) -> Jet:
        return contract("la,a->l", self.ricci_operator_matrix, V)

    def lie_derivative_metric(self, V: Jet) -> Jet:
        """(L_V g)(d_i, d_j) = g(nabla_i V, d_j) + g(nabla_j V, d_i)."""
        low = contract("jk,ki->ij", self.metric, self.nabla(V, "u"))
        return low + low.T

    # frames -------------------------------------------------------------
    def orthonormal_frame(self, J: Optional[Jet] = None, order: Optional[int] = None) -> Jet:
        """Gram-Schmidt over the coordinate basis; ``frame[a]`` is e_a.

        With ``J`` the frame is (e_1, J e_1, e_2, J e_2, ...).
        """
        order = self.order if order is None else order
        g = self.metric.truncate(order)
        Jt = None if J is None else J.truncate(order)
        if Jt is not None:
            J0, g0 = Jt.value, g.value
            compat = float(np.max(np.abs(J0.T @ g0 @ J0 - g0)))
            if compat > FRAME_COMPAT_TOL * max(1.0, float(np.max(np.abs(g0)))):
                raise PreconditionError(
                    f"complex structure is not compatible with the metric of {self.chart.name!r} "
                    f"(residual {compat:.3e})", "compat_residual", compat)
        m = self.dim
        built = []
        for k in range(m):
            if len(built) == m:
                break
            cand = np.zeros(m)
            cand[k] = 1.0
            v = Jet.constant(cand, self.dim, order)
            for e in built:
                v = v - contract("ij,i,j->", g, v, e) * e
            n2 = contract("ij,i,j->", g, v, v)
            if n2.value <= 1e-16:
                continue
            e = v / jets.sqrt(n2)
            built.append(e)
            if Jt is not None:
                built.append(contract("ij,j->i", Jt, e))
        if len(built) != m:
            raise DegenerateMetricError("could not complete an orthonormal frame")
        return Jet.stack(built)


# ------------------------------------------------------------------ functional API
def _geom(chart, point, order):
    return point if isinstance(point, PointGeometry) else PointGeometry(chart, point, order)


def christoffel(chart: Chart, point, order: int = 2) -> Jet:
    return _geom(chart, point, order).christoffel


def curvature(chart: Chart, point, order: int = 2) -> Jet:
    return _geom(chart, point, order).riemann


def ricci_operator(chart: Chart, point, V, order: int = 2) -> Jet:
    geo = _geom(chart, point, order)
    return geo.ricci_apply(geo.eval_vector(V))


def differential_ops(chart: Chart, point, f, V=None, order: int = 2) -> dict:
    geo = _geom(chart, point, order)
    fj = geo.eval(f)
    out = {
        "grad": geo.grad(fj),
        "hess": geo.hessian(fj),
        "laplacian": geo.laplacian(fj),
    }
    if V is not None:
        out["divergence"] = geo.divergence(geo.eval_vector(V))
    return out


def rough_laplacian(chart: Chart, point, V, order: int = 2) -> Jet:
    geo = _geom(chart, point, order)
    return geo.rough_laplacian(geo.eval_vector(V))


def lie_derivative_metric(chart: Chart, point, V, order: int = 1) -> Jet:
    geo = _geom(chart, point, order)
    return geo.lie_derivative_metric(geo.eval_vector(V))


def orthonormal_frame(chart: Chart, point, J=None, order: int = 0) -> Jet:
    geo = _geom(chart, point, order)
    if J is True:
        J = eval_many(chart.complex_structure, geo.x)
    elif J is not None and not isinstance(J, Jet):
        J = eval_many([[chart.parse(e) for e in row] for row in J], geo.x)
    return geo.orthonormal_frame(J)


def sectional_curvature(geo: PointGeometry, X, Y) -> float:
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    Rl = geo.lowered_riemann().value  # [w,k,i,j] = g(R(d_i,d_j)d_k, d_w)
    num = np.einsum("wkij,i,j,k,w->", Rl, X, Y, Y, X)
    g0 = geo.metric.value
    den = (X @ g0 @ X) * (Y @ g0 @ Y) - (X @ g0 @ Y) ** 2
    return float(num / den)
