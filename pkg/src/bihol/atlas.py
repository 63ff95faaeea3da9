"""Built-in example bundles: charts, holomorphic maps, controls, sampling.

A bundle groups charts that share one coordinate system (the sampling
chart), maps out of them, the condition checks to run, extra scalar
identities, and the expected verdict of every item.  Bundles round-trip
through plain dictionaries, which is also the inline config format.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError
from .expr import evaluate, parse_constraint
from .geometry import DEFAULT_MARGIN, Chart
from .maps import SmoothMap

PASS, FAIL, MEASURE = "pass", "fail", "measure"
VERDICTS = (PASS, FAIL, MEASURE)


@dataclass(frozen=True)
class Region:
    """Sampling box plus extra positivity constraints on the sampling chart."""

    box: tuple
    constraints: tuple = ()
    margin: float = DEFAULT_MARGIN

    def to_dict(self) -> dict:
        out = {"box": [[float(a), float(b)] for a, b in self.box], "margin": float(self.margin)}
        if self.constraints:
            out["constraints"] = list(self.constraints)
        return out


@dataclass(frozen=True)
class ConditionTask:
    group: str
    chart: Optional[str] = None
    gamma: Optional[str] = None
    map: Optional[str] = None
    V: Optional[tuple] = None
    F: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"group": self.group}
        for key in ("chart", "gamma", "map", "F"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.V is not None:
            out["V"] = list(self.V)
        return out


@dataclass(frozen=True)
class IdentityTask:
    """A scalar identity evaluated at each sample point.

    kinds:
      ``ode``: ``variable`` is a coordinate, ``functions`` maps a letter to an
      expression in that coordinate, ``exprs`` are expressions in the letters
      suffixed with the derivative order (``g0``, ``g1``, ``g2``) that must vanish.
      ``structure``: ``chart`` and ``residual`` in {kahler, nijenhuis, lck}.
      ``metric_match``: ``map`` must be an isometry onto its codomain chart.
    """

    name: str
    kind: str
    params: tuple = ()

    @property
    def p(self) -> dict:
        return dict(self.params)

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        for k, v in self.params:
            out[k] = dict(v) if isinstance(v, tuple) and v and isinstance(v[0], tuple) else (
                list(v) if isinstance(v, tuple) else v)
        return out


@dataclass
class ExampleBundle:
    name: str
    description: str
    base: str
    charts: dict
    maps: dict
    region: Region
    conditions: list = field(default_factory=list)
    identities: list = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    builtin: Optional[str] = None
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.charts[self.base].dim

    @property
    def holomorphic_maps(self) -> list:
        return [k for k, m in self.maps.items() if m.declared_holomorphic]

    @property
    def control_maps(self) -> list:
        return [k for k, m in self.maps.items() if m.declared_holomorphic is False]

    def expected(self, item_id: str) -> str:
        return self.expect.get(item_id, PASS)

    def sample_points(self, count: int, seed: int) -> list:
        return sample_points(self, count, seed)

    def to_config(self) -> dict:
        names = {c: n for n, c in self.charts.items()}
        return {
            "name": self.name,
            "description": self.description,
            "base": self.base,
            "charts": {n: c.to_dict() for n, c in self.charts.items()},
            "maps": {n: m.to_dict(names) for n, m in self.maps.items()},
            "region": self.region.to_dict(),
            "conditions": [t.to_dict() for t in self.conditions],
            "identities": [t.to_dict() for t in self.identities],
            "expect": dict(sorted(self.expect.items())),
        }


# ------------------------------------------------------------------ helpers
def _names(prefix, n):
    return [f"{prefix}{i}" for i in range(1, n + 1)]


def _diag(entries):
    m = len(entries)
    return [[entries[i] if i == j else "0" for j in range(m)] for i in range(m)]


def standard_j(m: int):
    """J d_{2k-1} = d_{2k}."""
    J = [["0"] * m for _ in range(m)]
    for k in range(0, m, 2):
        J[k + 1][k] = "1"
        J[k][k + 1] = "-1"
    return J


def flat_chart(name, coords, hermitian=True):
    m = len(coords)
    return Chart(name, coords, _diag(["1"] * m), (), standard_j(m) if hermitian else None)


def fubini_study_chart(name="fubini_study"):
    w = "(1 + u^2 + v^2)^(-2)"
    return Chart(name, ["u", "v"], _diag([w, w]), (), standard_j(2))


def _num(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


def _theorem_tasks(chart, dim4):
    tasks = [ConditionTask(g, chart) for g in ("theorem_real", "theorem_complex", "lck", "theta")]
    if dim4:
        tasks.append(ConditionTask("dim4", chart))
    return tasks


# ---------------------------------------------------------------- bundles
def make_flat_cn(n: int = 2) -> ExampleBundle:
    if not 1 <= n <= 4:
        raise ValueError("flat C^n bundle needs 1 <= n <= 4")
    m = 2 * n
    x = _names("x", m)
    flat = flat_chart("flat", x)
    c1 = flat_chart("flat_c1", ["u", "v"])
    charts = {"flat": flat, "flat_c1": c1}
    sq = ["x1^2 - x2^2", "2*x1*x2"] + x[2:]
    maps = {
        "identity": SmoothMap("identity", flat, flat, x, True),
        "square_first": SmoothMap("square_first", flat, flat, sq, True),
        "project_first": SmoothMap("project_first", flat, c1, x[:2], True),
        "conjugate_first": SmoothMap("conjugate_first", flat, flat, [x[0], f"-{x[1]}"] + x[2:], False),
    }
    if n >= 2:
        maps["product"] = SmoothMap("product", flat, c1,
                                    ["x1*x3 - x2*x4", "x1*x4 + x2*x3"], True)
    conds = _theorem_tasks("flat", n == 2) if n >= 2 else []
    if n >= 2:
        conds.append(ConditionTask("gck", "flat", gamma="0"))
    idents = [IdentityTask("kahler", "structure", (("chart", "flat"), ("residual", "kahler")))]
    expect = {"bitension:conjugate_first": MEASURE}
    return ExampleBundle(f"flat_c{n}", f"flat C^{n} with the standard complex structure", "flat",
                         charts, maps, Region(tuple((-1.5, 1.5) for _ in range(m))), conds, idents,
                         expect, "flat_cn", {"n": n})


def make_conformal_c2(alpha1: float = 2.0, alpha2: float = 2.0) -> ExampleBundle:
    """C^2 minus the origin with metric e^{2 gamma} can, gamma = -ln q,
    q = alpha1/2 |z1|^2 + alpha2/2 |z2|^2."""
    if alpha1 <= 0 or alpha2 <= 0:
        raise ValueError("alpha parameters must be positive")
    x = _names("x", 4)
    a1, a2 = _num(alpha1 / 2), _num(alpha2 / 2)
    q = f"({a1}*(x1^2 + x2^2) + {a2}*(x3^2 + x4^2))"
    conf = Chart("conformal", x, _diag([f"{q}^(-2)"] * 4), (f"{q} > 0",), standard_j(4))
    base = flat_chart("flat_base", x)
    c2 = flat_chart("flat_c2", ["y1", "y2", "y3", "y4"])
    c1 = flat_chart("flat_c1", ["u", "v"])
    fs = fubini_study_chart()
    charts = {"conformal": conf, "flat_base": base, "flat_c2": c2, "flat_c1": c1, "fubini_study": fs}
    d = "(x3^2 + x4^2)"
    maps = {
        "identity": SmoothMap("identity", conf, c2, x, True),
        "project_first": SmoothMap("project_first", conf, c1, ["x1", "x2"], True),
        "project_second": SmoothMap("project_second", conf, c1, ["x3", "x4"], True),
        "ratio": SmoothMap("ratio", conf, fs, [f"(x1*x3 + x2*x4)/{d}", f"(x2*x3 - x1*x4)/{d}"],
                           True, (f"{d} > 0",)),
        "square_first": SmoothMap("square_first", conf, c2,
                                  ["x1^2 - x2^2", "2*x1*x2", "x3", "x4"], True),
    }
    r2 = "(x1^2 + x2^2 + x3^2 + x4^2)"
    constraints = [f"{r2} > 0.25", f"{r2} < 4"]
    equal = math.isclose(alpha1, alpha2)
    if not equal:
        # the scalar residual factors through (alpha1 |z1|^2 - alpha2 |z2|^2); stay off its zero set
        constraints.append(f"({_num(alpha1)}*(x1^2 + x2^2) - {_num(alpha2)}*(x3^2 + x4^2))^2 > 0.01")
    conds = _theorem_tasks("conformal", True)
    conds.append(ConditionTask("gck", "flat_base", gamma=f"-ln{q}"))
    idents = [IdentityTask("lck", "structure", (("chart", "conformal"), ("residual", "lck"))),
              IdentityTask("nijenhuis", "structure", (("chart", "conformal"), ("residual", "nijenhuis")))]
    expect = {}
    if not equal:
        for cid in ("theorem_real_B", "theorem_complex_B", "lck_B", "theta_B", "dim4_2", "gck_B"):
            expect[cid] = FAIL
        for name in maps:
            expect[f"bitension:{name}"] = MEASURE
    label = "conformal_c2" if equal and math.isclose(alpha1, 2.0) else \
        f"conformal_c2_{_num(alpha1)}_{_num(alpha2)}".replace(".", "p")
    desc = f"C^2 minus 0 with metric q^-2 can, alpha = ({_num(alpha1)}, {_num(alpha2)})"
    if not equal:
        desc += "; negative control"
    return ExampleBundle(label, desc, "conformal", charts, maps,
                         Region(tuple((-2.0, 2.0) for _ in range(4)), tuple(constraints)),
                         conds, idents, expect, "conformal_c2",
                         {"alpha1": float(alpha1), "alpha2": float(alpha2)})


def make_conformal_control() -> ExampleBundle:
    b = make_conformal_c2(1.0, 2.0)
    b.name = "conformal_c2_control"
    return b


CONE_COORDS = ["r", "t", "s1", "s2"]


def cone_metric_entries(factor="1"):
    f = f"({factor})"
    return _diag([f, f"{f}*r^2", f"{f}*r^2*cos(t)^2", f"{f}*r^2*sin(t)^2"])


def cone_complex_structure():
    """Cone J for the round Sasakian 3-sphere in Hopf-type angles.

    The sphere is (cos t e^{i s1}, sin t e^{i s2}); the Reeb field is
    -(d_s1 + d_s2) with the sign fixed so that the cone isometry to C^2 is
    holomorphic for the standard structure.  Columns are J d_r, J d_t,
    J d_s1, J d_s2.
    """
    cols = [
        ["0", "0", "1/r", "1/r"],
        ["0", "0", "-tan(t)", "1/tan(t)"],
        ["-r*cos(t)^2", "sin(t)*cos(t)", "0", "0"],
        ["-r*sin(t)^2", "-sin(t)*cos(t)", "0", "0"],
    ]
    return [[cols[j][i] for j in range(4)] for i in range(4)]


def make_sasakian_cone() -> ExampleBundle:
    domain = ("r > 0", "t > 0", "1.5707963267948966 - t > 0")
    J = cone_complex_structure()
    kc = Chart("kahler_cone", CONE_COORDS, cone_metric_entries(), domain, J)
    cone = Chart("cone", CONE_COORDS, cone_metric_entries("r^(-4)"), domain, J)
    sphere = Chart("sphere", ["t", "s1", "s2"], _diag(["1", "cos(t)^2", "sin(t)^2"]),
                   ("t > 0", "1.5707963267948966 - t > 0"))
    x = _names("x", 4)
    r2 = "(x1^2 + x2^2 + x3^2 + x4^2)"
    conf = Chart("conformal_c2", x, _diag([f"{r2}^(-2)"] * 4), (f"{r2} > 0",), standard_j(4))
    c2 = flat_chart("flat_c2", ["y1", "y2", "y3", "y4"])
    c1 = flat_chart("flat_c1", ["u", "v"])
    charts = {"cone": cone, "kahler_cone": kc, "sphere": sphere, "conformal_c2": conf,
              "flat_c2": c2, "flat_c1": c1}
    iso = ["r*cos(t)*cos(s1)", "r*cos(t)*sin(s1)", "r*sin(t)*cos(s2)", "r*sin(t)*sin(s2)"]
    maps = {
        "isometry": SmoothMap("isometry", cone, conf, iso, None),
        "to_c2": SmoothMap("to_c2", cone, c2, iso, True),
        "project_first": SmoothMap("project_first", cone, c1, iso[:2], True),
        "project_second": SmoothMap("project_second", cone, c1, iso[2:], True),
        "radial": SmoothMap("radial", kc, sphere, ["t", "s1", "s2"], None),
    }
    conds = _theorem_tasks("cone", True) + [
        ConditionTask("gck", "kahler_cone", gamma="-ln(r^2)"),
        ConditionTask("submersion", map="radial", V=("4*r", "0", "0", "0"), F="2*r^2"),
    ]
    idents = [
        IdentityTask("nijenhuis", "structure", (("chart", "cone"), ("residual", "nijenhuis"))),
        IdentityTask("kahler", "structure", (("chart", "kahler_cone"), ("residual", "kahler"))),
        IdentityTask("radial_ode", "ode", (("variable", "r"), ("functions", (("g", "-ln(r^2)"),)),
                                           ("exprs", ("g2 + 3*g1/r + g1^2",)))),
        IdentityTask("metric_match", "metric_match", (("map", "isometry"),)),
    ]
    region = Region(((0.5, 2.0), (0.0, 1.5707963267948966), (-3.0, 3.0), (-3.0, 3.0)))
    return ExampleBundle("sasakian_cone", "Kaehler cone over the round 3-sphere with metric r^-4 (dr^2 + r^2 g)",
                         "cone", charts, maps, region, conds, idents, {}, "sasakian_cone", {})


def inoue_submersion_data(n: int):
    """(F, V) for the projection along the second half-plane coordinate."""
    m = 2 * n
    zeros = ["0"] * (m - 2)
    if n == 3:
        return "0.5*ln(2*w2)", tuple(["0", "0.5"] + zeros)
    c = ((n - 1) / abs(n - 3)) ** ((n - 3) / (n - 1))
    e = (n - 3) / (n - 1)
    # grad F = w2^{2/(n-1)} F'(w2) d_w2, a constant multiple of d_w2
    v = c * e
    return f"{_num(c)}*w2^({_num(e)})", tuple(["0", _num(v)] + zeros)


def make_inoue_family(n: int = 2) -> ExampleBundle:
    """H x C^{n-1} with metric dw^2 + w2^{2/(n-1)} can."""
    if not 2 <= n <= 4:
        raise ValueError("Inoue-type bundle needs 2 <= n <= 4")
    m = 2 * n
    k = _names("x", m - 2)
    coords = ["w1", "w2"] + k
    a = _num(2 / (n - 1))
    domain = ("w2 > 0",)
    J = standard_j(m)
    base = Chart("kahler_base", coords, _diag([f"w2^(-{a})"] * 2 + ["1"] * (m - 2)), domain, J)
    ino = Chart("inoue", coords, _diag(["1", "1"] + [f"w2^({a})"] * (m - 2)), domain, J)
    flat = flat_chart("flat_product", [f"y{i}" for i in range(1, m + 1)])
    prod = Chart("product", ["w1"] + k, _diag(["1"] * (m - 1)))
    half = flat_chart("flat_c1", ["u", "v"])
    kf = flat_chart("flat_k", [f"z{i}" for i in range(1, m - 1)])
    charts = {"inoue": ino, "kahler_base": base, "flat_product": flat, "product": prod,
              "flat_c1": half, "flat_k": kf}
    maps = {
        "identity": SmoothMap("identity", ino, flat, coords, True),
        "project_h": SmoothMap("project_h", ino, half, ["w1", "w2"], True),
        "project_k": SmoothMap("project_k", ino, kf, k, True),
        "square_h": SmoothMap("square_h", ino, half, ["w1^2 - w2^2", "2*w1*w2"], True),
        "projection": SmoothMap("projection", base, prod, ["w1"] + k, None),
    }
    F, V = inoue_submersion_data(n)
    conds = _theorem_tasks("inoue", n == 2) + [
        ConditionTask("gck", "kahler_base", gamma=f"ln(w2)/{n - 1}"),
        ConditionTask("submersion", map="projection", V=V, F=F),
    ]
    fexpr = f"w2^(-1/{n - 1})"
    gexpr = f"ln(w2)/{n - 1}"
    if n == 3:
        funcs = (("f", fexpr), ("g", gexpr))
        exprs = ("f0*g2 - 2*f1*g1", "g2 + 2*g1^2")
    else:
        funcs = (("f", fexpr), ("F", f"exp({n - 3}*{gexpr})"))
        exprs = ("f0*F2 - 2*f1*F1", f"{n - 3}*F0*F2 + 2*F1^2")
    idents = [
        IdentityTask("kahler", "structure", (("chart", "kahler_base"), ("residual", "kahler"))),
        IdentityTask("lck", "structure", (("chart", "inoue"), ("residual", "lck"))),
        IdentityTask("profile_ode", "ode", (("variable", "w2"), ("functions", funcs), ("exprs", exprs))),
    ]
    box = [(-2.0, 2.0), (0.0, 3.0)] + [(-1.5, 1.5)] * (m - 2)
    return ExampleBundle(f"inoue_n{n}", f"H x C^{n - 1} with metric dw^2 + w2^(2/{n - 1}) can",
                         "inoue", charts, maps, Region(tuple(box)), conds, idents, {},
                         "inoue", {"n": n})


REGISTRY = {
    "conformal_c2": (make_conformal_c2, {"alpha1": 2.0, "alpha2": 2.0}),
    "conformal_c2_control": (make_conformal_control, {}),
    "flat_c2": (make_flat_cn, {"n": 2}),
    "inoue_n2": (make_inoue_family, {"n": 2}),
    "inoue_n3": (make_inoue_family, {"n": 3}),
    "inoue_n4": (make_inoue_family, {"n": 4}),
    "sasakian_cone": (make_sasakian_cone, {}),
}

CONSTRUCTORS = {"flat_cn": make_flat_cn, "conformal_c2": make_conformal_c2,
                "sasakian_cone": make_sasakian_cone, "inoue": make_inoue_family}


def builtin(name: str, **params) -> ExampleBundle:
    if name in REGISTRY:
        ctor, defaults = REGISTRY[name]
        merged = {**defaults, **params}
    elif name in CONSTRUCTORS:
        ctor, merged = CONSTRUCTORS[name], params
    else:
        raise KeyError(f"unknown example {name!r}; known: {', '.join(sorted(REGISTRY))}")
    return ctor(**merged)


def list_examples() -> list:
    return [builtin(name) for name in sorted(REGISTRY)]


# ----------------------------------------------------------------- sampling
def _admissible(bundle: ExampleBundle, point, constraints) -> bool:
    margin = bundle.region.margin
    try:
        if any(float(evaluate(c, point)) <= 0 for c in constraints):
            return False
    except (ValueError, ZeroDivisionError):
        return False
    for chart in bundle.charts.values():
        if chart.coords == bundle.charts[bundle.base].coords and not chart.contains(point, margin):
            return False
    for smap in bundle.maps.values():
        if smap.domain.coords == bundle.charts[bundle.base].coords and not smap.valid_at(point, margin):
            return False
    return True


def sample_points(bundle: ExampleBundle, count: int, seed: int, max_tries: int = 100000) -> list:
    """Deterministic rejection sampling in the bundle region."""
    if count < 1:
        raise ValueError("count must be >= 1")
    coords = bundle.charts[bundle.base].coords
    constraints = [parse_constraint(c, coords) for c in bundle.region.constraints]
    lo = np.array([a for a, _ in bundle.region.box], float)
    hi = np.array([b for _, b in bundle.region.box], float)
    rng = np.random.default_rng(seed)
    out = []
    tries = 0
    while len(out) < count:
        if tries >= max_tries:
            raise DomainError(f"sampling region of {bundle.name!r} is empty after margin")
        tries += 1
        p = lo + (hi - lo) * rng.random(len(lo))
        if _admissible(bundle, p, constraints):
            out.append(p)
    return out


# -------------------------------------------------------------- from config
def _get(d, key, where, default=...):
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError(f"{where}: missing key {key!r}")
    return default


def bundle_from_dict(d: dict) -> ExampleBundle:
    """Inverse of :meth:`ExampleBundle.to_config`."""
    name = _get(d, "name", "example")
    where = f"example {name!r}"
    charts = {}
    for cname, c in _get(d, "charts", where).items():
        charts[cname] = Chart(cname, _get(c, "coords", f"chart {cname!r}"),
                              _get(c, "metric", f"chart {cname!r}"), tuple(c.get("domain", ())),
                              c.get("complex_structure"))
    maps = {}
    for mname, mdef in d.get("maps", {}).items():
        for role in ("domain", "codomain"):
            ref = _get(mdef, role, f"map {mname!r}")
            if ref not in charts:
                raise ConfigError(f"map {mname!r} references unknown chart {ref!r}")
        maps[mname] = SmoothMap(mname, charts[mdef["domain"]], charts[mdef["codomain"]],
                                _get(mdef, "components", f"map {mname!r}"),
                                mdef.get("holomorphic"), tuple(mdef.get("where", ())))
    base = _get(d, "base", where)
    if base not in charts:
        raise ConfigError(f"{where}: base chart {base!r} is not defined")
    reg = _get(d, "region", where)
    region = Region(tuple(tuple(b) for b in _get(reg, "box", f"{where} region")),
                    tuple(reg.get("constraints", ())), float(reg.get("margin", DEFAULT_MARGIN)))
    if len(region.box) != charts[base].dim:
        raise ConfigError(f"{where}: region box has {len(region.box)} ranges, "
                          f"base chart has dimension {charts[base].dim}")
    conds = []
    for t in d.get("conditions", []):
        task = ConditionTask(_get(t, "group", where), t.get("chart"), t.get("gamma"), t.get("map"),
                             tuple(t["V"]) if "V" in t else None, t.get("F"))
        if task.chart is not None and task.chart not in charts:
            raise ConfigError(f"{where}: condition references unknown chart {task.chart!r}")
        if task.map is not None and task.map not in maps:
            raise ConfigError(f"{where}: condition references unknown map {task.map!r}")
        conds.append(task)
    idents = []
    for t in d.get("identities", []):
        params = []
        for k, v in t.items():
            if k in ("name", "kind"):
                continue
            if isinstance(v, dict):
                v = tuple(v.items())
            elif isinstance(v, list):
                v = tuple(v)
            params.append((k, v))
        idents.append(IdentityTask(_get(t, "name", where), _get(t, "kind", where), tuple(params)))
    expect = dict(d.get("expect", {}))
    bad = {k: v for k, v in expect.items() if v not in VERDICTS}
    if bad:
        raise ConfigError(f"{where}: expected verdicts must be one of {VERDICTS}, got {bad}")
    return ExampleBundle(name, d.get("description", ""), base, charts, maps, region, conds, idents,
                         expect)
