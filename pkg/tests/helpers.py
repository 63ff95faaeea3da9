"""Shared builders for the test-suite: random expressions, charts and maps."""
from __future__ import annotations

import mpmath
import numpy as np

from bihol import expr as E
from bihol.atlas import flat_chart, standard_j
from bihol.geometry import Chart
from bihol.maps import SmoothMap

MP_FUNCS = {"exp": mpmath.exp, "ln": mpmath.log, "log": mpmath.log, "sqrt": mpmath.sqrt,
            "sin": mpmath.sin, "cos": mpmath.cos, "tan": mpmath.tan}


def mp_eval(e: E.Expr, point):
    """Evaluate an expression tree with mpmath, independently of the engine."""
    if isinstance(e, E.Const):
        return mpmath.mpf(e.value)
    if isinstance(e, E.Var):
        return point[e.index]
    if isinstance(e, E.Neg):
        return -mp_eval(e.arg, point)
    if isinstance(e, E.Func):
        return MP_FUNCS[e.name](mp_eval(e.arg, point))
    if isinstance(e, E.Pow):
        return mpmath.power(mp_eval(e.base, point), mp_eval(e.exponent, point))
    a, b = mp_eval(e.left, point), mp_eval(e.right, point)
    if isinstance(e, E.Add):
        return a + b
    if isinstance(e, E.Sub):
        return a - b
    if isinstance(e, E.Mul):
        return a * b
    if isinstance(e, E.Div):
        return a / b
    raise TypeError(type(e))


def random_expr(rng: np.random.Generator, names, depth: int = 3) -> E.Expr:
    """A random tree that is smooth and well defined on all of R^m.

    Arguments of ln and sqrt, and denominators, are kept positive by
    construction (1 + square or exp of something).
    """
    def leaf():
        if rng.random() < 0.7:
            i = int(rng.integers(len(names)))
            return E.Var(names[i], i)
        return E.Const(float(np.round(rng.uniform(-2, 2), 2)))

    def positive(d):
        return 1 + node(d) ** 2

    def node(d):
        if d == 0:
            return leaf()
        op = int(rng.integers(11))
        a = node(d - 1)
        if op == 0:
            return a + node(d - 1)
        if op == 1:
            return a - node(d - 1)
        if op in (2, 3):
            return a * node(d - 1)
        if op == 4:
            return a / positive(d - 1)
        if op == 5:
            return E.exp(0.5 * E.sin(a))
        if op == 6:
            return E.ln(positive(d - 1))
        if op == 7:
            return E.sqrt(positive(d - 1))
        if op == 8:
            return E.sin(a)
        if op == 9:
            return E.cos(a)
        return a ** int(rng.integers(2, 4))

    return node(depth)


def perturbed_flat_metric(rng, names, amplitude=0.2):
    """Symmetric metric delta + small polynomial perturbation, positive near the origin."""
    m = len(names)
    rows = [["0"] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            a, b = rng.integers(m, size=2)
            c = np.round(rng.uniform(-amplitude, amplitude, size=3), 3)
            p = f"{c[0]}*{names[a]} + {c[1]}*{names[a]}*{names[b]} + {c[2]}*{names[b]}^2"
            rows[i][j] = rows[j][i] = f"1 + {p}" if i == j else f"0.5*({p})"
    return rows


def random_chart(rng, name, names, amplitude=0.2, hermitian=False):
    J = standard_j(len(names)) if hermitian else None
    return Chart(name, names, perturbed_flat_metric(rng, names, amplitude), (), J)


def random_polynomial(rng, names, degree=3, terms=4, amplitude=0.5):
    out = [f"{np.round(rng.uniform(-1, 1), 3)}"]
    for _ in range(terms):
        powers = rng.integers(0, 2, size=len(names))
        if powers.sum() == 0 or powers.sum() > degree:
            powers = np.zeros(len(names), int)
            powers[int(rng.integers(len(names)))] = int(rng.integers(1, degree + 1))
        mono = "*".join(f"{names[i]}^{int(p)}" for i, p in enumerate(powers) if p)
        out.append(f"{np.round(rng.uniform(-amplitude, amplitude), 3)}*{mono}")
    return " + ".join(out)


def random_map(rng, m, n, amplitude=0.2):
    """A random polynomial map between perturbed-flat charts of dimensions m and n."""
    xs = [f"x{i}" for i in range(1, m + 1)]
    ys = [f"y{i}" for i in range(1, n + 1)]
    dom = random_chart(rng, "domain", xs, amplitude)
    cod = random_chart(rng, "codomain", ys, amplitude)
    comps = []
    for a in range(n):
        lin = xs[a % m]
        comps.append(f"{lin} + {random_polynomial(rng, xs, amplitude=0.3)}")
    return SmoothMap("random", dom, cod, comps), xs


def small_point(rng, m, radius=0.3):
    return rng.uniform(-radius, radius, size=m)


def flat(name, coords, hermitian=True):
    return flat_chart(name, coords, hermitian)


def sphere_chart():
    """Round unit 2-sphere in spherical coordinates away from the poles."""
    return Chart("sphere", ["t", "p"], [["1", "0"], ["0", "sin(t)^2"]], ("t > 0", "3.141592653589793 - t > 0"))


def s3_chart():
    """Round unit 3-sphere in Hopf-type angles."""
    return Chart("s3", ["t", "a", "b"], [["1", "0", "0"], ["0", "cos(t)^2", "0"], ["0", "0", "sin(t)^2"]],
                 ("t > 0", "1.5707963267948966 - t > 0"))


def hyperbolic_chart():
    return Chart("hyperbolic", ["w1", "w2"], [["w2^(-2)", "0"], ["0", "w2^(-2)"]], ("w2 > 0",))


def polar_chart():
    return Chart("polar", ["r", "th"], [["1", "0"], ["0", "r^2"]], ("r > 0",))


def random_hermitian_chart(rng, name, names, amplitude=0.2):
    """Perturbed-flat metric averaged with its J-conjugate, so g(J., J.) = g for the standard J."""
    m = len(names)
    g = perturbed_flat_metric(rng, names, amplitude)
    perm = [k + 1 if k % 2 == 0 else k - 1 for k in range(m)]
    sign = [1 if k % 2 == 0 else -1 for k in range(m)]
    rows = [[""] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            s = "+" if sign[i] * sign[j] > 0 else "-"
            rows[i][j] = rows[j][i] = f"0.5*(({g[i][j]}) {s} ({g[perm[i]][perm[j]]}))"
    return Chart(name, names, rows, (), standard_j(m))
