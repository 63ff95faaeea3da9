"""Evaluate every item of a bundle at sample points and compare with expectations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import conditions as cond
from . import jets
from .atlas import FAIL, MEASURE, PASS, ExampleBundle, IdentityTask
from .errors import BiholError
from .expr import eval_field, evaluate, parse
from .hermitian import HermitianGeometry
from .maps import HOLOMORPHY_TOL, MapGeometry

IDENTITY_TOL = 1e-9


@dataclass
class Item:
    example: str
    kind: str
    id: str
    chart: str
    point_index: int
    point: tuple
    residual: float
    scale: float
    verdict: str  # pass | fail | error
    expected: str
    terms: dict = field(default_factory=dict)
    map: Optional[str] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        if self.verdict == "error":
            return False
        return self.expected == MEASURE or self.expected == self.verdict

    def to_dict(self) -> dict:
        out = {
            "example": self.example,
            "kind": self.kind,
            "id": self.id,
            "chart": self.chart,
        }
        if self.map is not None:
            out["map"] = self.map
        out.update({
            "point_index": self.point_index,
            "point": [float(v) for v in self.point],
            "residual": float(self.residual),
            "scale": float(self.scale),
            "verdict": self.verdict,
            "expected": self.expected,
            "ok": self.ok,
            "terms": {k: float(v) for k, v in sorted(self.terms.items())},
        })
        if self.error is not None:
            out["error"] = self.error
        return out


def _verdict(residual, scale, tol):
    return PASS if residual <= tol * scale else FAIL


# ----------------------------------------------------------------- identities
def _ode_residuals(task: IdentityTask, point, coords):
    p = task.p
    var = p["variable"]
    t = float(point[coords.index(var)])
    seedj = jets.seed_jets([t], 2)[0]
    values = {}
    for letter, text in dict(p["functions"]).items():
        f = eval_field(parse(text, [var]), [seedj])
        for k in range(3):
            values[f"{letter}{k}"] = float(jets.derivative(f, (k,)))
    symbols = sorted(values) + [var]
    vec = [values[s] for s in sorted(values)] + [t]
    return [abs(float(evaluate(parse(e, symbols), vec))) for e in p["exprs"]]


def evaluate_identity(bundle: ExampleBundle, task: IdentityTask, point):
    """(chart name, residual, terms) of one identity at one point."""
    p = task.p
    if task.kind == "ode":
        res = _ode_residuals(task, point, list(bundle.charts[bundle.base].coords))
        return bundle.base, max(res), {f"equation_{i}": r for i, r in enumerate(res)}
    if task.kind == "structure":
        chart = bundle.charts[p["chart"]]
        geo = HermitianGeometry(chart, point, 1 if p["residual"] != "lck" else 2)
        which = p["residual"]
        if which == "kahler":
            r = cond._amax(geo.d_kahler_form)
            terms = {}
        elif which == "nijenhuis":
            r = cond._amax(geo.nijenhuis)
            terms = {}
        elif which == "lck":
            terms = cond.lck_residuals(geo)
            r = max(terms["lck_residual"], terms["dtheta_residual"], terms["nijenhuis_residual"])
        else:
            raise BiholError(f"unknown structure residual {which!r}")
        return p["chart"], r, terms
    if task.kind == "metric_match":
        smap = bundle.maps[p["map"]]
        mg = MapGeometry(smap, point, order=2)
        pulled = np.einsum("ab,ai,bj->ij", mg.cod.metric.value, mg.dphi.value, mg.dphi.value)
        g = mg.dom.metric.value
        return smap.domain.name, cond._amax(g - pulled), {"metric_max": cond._amax(g)}
    raise BiholError(f"unknown identity kind {task.kind!r}")


# ------------------------------------------------------------------- bitension
def bitension_item(smap, point):
    mg = MapGeometry(smap, point, order=4)
    t2 = mg.bitension
    terms = {
        "tension_norm": mg.section_norm(mg.tension),
        "dphi_norm": mg.dphi_norm,
    }
    if smap.domain.is_hermitian and smap.codomain.is_hermitian:
        terms["holomorphy_residual"] = mg.holomorphy_residual
    return mg.section_norm(t2), mg.scale, terms


# ------------------------------------------------------------------------ run
def _condition_reports(bundle, task, point, tol):
    if task.group in cond.GROUPS:
        return cond.GROUPS[task.group](bundle.charts[task.chart], point, tol)
    if task.group == "gck":
        return cond.check_gck(bundle.charts[task.chart], task.gamma, point, tol)
    if task.group == "submersion":
        return cond.check_submersion(bundle.maps[task.map], task.V, task.F, point, tol)
    raise BiholError(f"unknown condition group {task.group!r}")


def _group_ids(task):
    return sorted(c.id for c in cond.CONDITIONS.values() if c.group == task.group)


def run_bundle(bundle: ExampleBundle, points, tol: float = cond.DEFAULT_TOL, groups=None) -> list:
    """All items of ``bundle`` at ``points``, sorted by (id, point index)."""
    items = []
    for idx, point in enumerate(points):
        pt = tuple(float(v) for v in point)

        def add(kind, iid, chart, residual, scale, verdict, terms, smap=None, error=None):
            items.append(Item(bundle.name, kind, iid, chart, idx, pt, residual, scale, verdict,
                              bundle.expected(iid), terms, smap, error))

        for task in bundle.conditions:
            if groups is not None and task.group not in groups:
                continue
            chart = task.chart or bundle.maps[task.map].domain.name
            try:
                for rep in _condition_reports(bundle, task, point, tol):
                    add("condition", rep.condition, rep.chart or chart, rep.residual, rep.scale,
                        PASS if rep.verdict else FAIL, rep.terms, rep.map)
            except BiholError as exc:
                for cid in _group_ids(task):
                    add("condition", cid, chart, float("nan"), float("nan"), "error", {},
                        task.map, f"{type(exc).__name__}: {exc}")

        for name, smap in bundle.maps.items():
            if smap.declared_holomorphic is None:
                continue
            iid = f"bitension:{name}"
            try:
                res, scale, terms = bitension_item(smap, point)
                add("bitension", iid, smap.domain.name, res, scale, _verdict(res, scale, tol),
                    terms, name)
                if smap.declared_holomorphic and "holomorphy_residual" in terms:
                    h = terms["holomorphy_residual"]
                    add("identity", f"holomorphy:{name}", smap.domain.name, h, 1.0,
                        _verdict(h, 1.0, HOLOMORPHY_TOL), {}, name)
            except BiholError as exc:
                add("bitension", iid, smap.domain.name, float("nan"), float("nan"), "error", {},
                    name, f"{type(exc).__name__}: {exc}")

        for task in bundle.identities:
            iid = f"identity:{task.name}"
            try:
                chart, res, terms = evaluate_identity(bundle, task, point)
                add("identity", iid, chart, res, 1.0, _verdict(res, 1.0, IDENTITY_TOL), terms)
            except BiholError as exc:
                add("identity", iid, bundle.base, float("nan"), float("nan"), "error", {}, None,
                    f"{type(exc).__name__}: {exc}")
    items.sort(key=lambda it: (it.id, it.point_index))
    return items
