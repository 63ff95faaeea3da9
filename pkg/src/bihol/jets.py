"""Truncated multivariate Taylor arithmetic ("jets") up to order 4.

A jet of order ``k`` in ``m`` variables stores the divided Taylor
coefficients ``f_alpha = d^alpha f(p) / alpha!`` for all multi-indices
``|alpha| <= k``, densely, in graded-lexicographic order: degree first, and
within a degree by exponent tuple descending, so ``(1,0)`` precedes ``(0,1)``.
Because lower degrees come first, truncating to a lower order is a slice.

A :class:`Jet` may carry a batch shape (``data.shape[:-1]``), which is how
tensor-valued quantities (metric, Christoffel symbols, curvature) are stored:
``g[i, j]`` is itself a jet.  All arithmetic broadcasts over the batch shape.
"""
from __future__ import annotations

import functools
import itertools
import math
from typing import Sequence

import numpy as np

from .errors import CapabilityError, JetDomainError

MAX_ORDER = 4

# Reserved subscript letter for the coefficient-pair axis in contractions.
_PAIR = "Z"


def _exponents(degree: int, dim: int):
    if dim == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _exponents(degree - first, dim - 1):
            yield (first,) + rest


class Layout:
    """Index bookkeeping for jets of a given (dim, order)."""

    def __init__(self, dim: int, order: int):
        self.dim = dim
        self.order = order
        indices = []
        self.sizes = []
        for d in range(order + 1):
            indices.extend(_exponents(d, dim))
            self.sizes.append(len(indices))
        self.indices = tuple(indices)
        self.rank = {a: i for i, a in enumerate(indices)}
        self.size = len(indices)
        self.factorials = np.array(
            [math.prod(math.factorial(e) for e in a) for a in indices], dtype=float
        )

        left, right, starts = [], [], []
        for a in indices:
            starts.append(len(left))
            for b in itertools.product(*(range(e + 1) for e in a)):
                left.append(self.rank[b])
                right.append(self.rank[tuple(x - y for x, y in zip(a, b))])
        self.left = np.array(left, dtype=np.intp)
        self.right = np.array(right, dtype=np.intp)
        self.starts = np.array(starts, dtype=np.intp)

        # d/dx_i maps the order-k layout onto the order-(k-1) layout.
        self.diff_src = []
        self.diff_fac = []
        if order > 0:
            lower = indices[: self.sizes[order - 1]]
            for i in range(dim):
                src, fac = [], []
                for b in lower:
                    up = list(b)
                    up[i] += 1
                    src.append(self.rank[tuple(up)])
                    fac.append(b[i] + 1.0)
                self.diff_src.append(np.array(src, dtype=np.intp))
                self.diff_fac.append(np.array(fac))


@functools.lru_cache(maxsize=None)
def layout(dim: int, order: int) -> Layout:
    if order > MAX_ORDER:
        raise CapabilityError(f"jet order {order} exceeds the cap of {MAX_ORDER}")
    if order < 0:
        raise CapabilityError("no derivative orders remain (order < 0)")
    if dim < 1:
        raise ValueError("jet dimension must be >= 1")
    return Layout(dim, order)


def _product_data(a: np.ndarray, b: np.ndarray, lay: Layout, subscripts=None):
    pa = a[..., lay.left]
    pb = b[..., lay.right]
    if subscripts is None:
        prod = pa * pb
    else:
        sa, sb, so = subscripts
        prod = np.einsum(f"{sa}{_PAIR},{sb}{_PAIR}->{so}{_PAIR}", pa, pb)
    return np.add.reduceat(prod, lay.starts, axis=-1)


class Jet:
    """A (possibly batched) truncated Taylor polynomial. Immutable by convention."""

    __slots__ = ("data", "dim", "order")
    __array_priority__ = 100

    def __init__(self, data, dim: int, order: int):
        data = np.asarray(data)
        if data.dtype.kind not in "fc":
            data = data.astype(float)
        lay = layout(dim, order)
        if data.shape[-1:] != (lay.size,):
            raise ValueError(
                f"coefficient axis has length {data.shape[-1:]}, expected {lay.size}"
            )
        self.data = data
        self.dim = dim
        self.order = order

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, order: int) -> "Jet":
        value = np.asarray(value)
        lay = layout(dim, order)
        dtype = complex if value.dtype.kind == "c" else float
        data = np.zeros(value.shape + (lay.size,), dtype=dtype)
        data[..., 0] = value
        return cls(data, dim, order)

    @classmethod
    def zeros(cls, shape, dim: int, order: int) -> "Jet":
        return cls.constant(np.zeros(shape), dim, order)

    @classmethod
    def stack(cls, jets: Sequence["Jet"], axis: int = 0) -> "Jet":
        jets = list(jets)
        dim = jets[0].dim
        order = min(j.order for j in jets)
        if any(j.dim != dim for j in jets):
            raise ValueError("cannot stack jets of different dimensions")
        if axis < 0:
            axis -= 1
        return cls(np.stack([j.truncate(order).data for j in jets], axis=axis), dim, order)

    # basic properties --------------------------------------------------
    @property
    def shape(self):
        return self.data.shape[:-1]

    @property
    def value(self):
        """Order-0 part (the function values at the base point)."""
        return self.data[..., 0]

    @property
    def layout(self) -> Layout:
        return layout(self.dim, self.order)

    def coeff(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise CapabilityError(f"|alpha|={sum(alpha)} exceeds jet order {self.order}")
        return self.data[..., self.layout.rank[alpha]]

    def coeffs(self) -> dict:
        """Map multi-index -> coefficient (scalar jets only)."""
        if self.shape:
            raise ValueError("coeffs() is defined for scalar jets only")
        return {a: self.data[i].item() for i, a in enumerate(self.layout.indices)}

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise CapabilityError(
                f"requested order {order} but only {self.order} orders are available"
            )
        lay = layout(self.dim, order)
        return Jet(self.data[..., : lay.size], self.dim, order)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if Ellipsis not in key:
            key = key + (Ellipsis,)
        return Jet(self.data[key + (slice(None),)], self.dim, self.order)

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def transpose(self, *axes) -> "Jet":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        n = len(self.shape)
        if not axes:
            axes = tuple(reversed(range(n)))
        return Jet(np.transpose(self.data, tuple(axes) + (n,)), self.dim, self.order)

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.data.reshape(tuple(shape) + (self.data.shape[-1],)), self.dim, self.order)

    @property
    def real(self) -> "Jet":
        return Jet(self.data.real.copy(), self.dim, self.order)

    @property
    def imag(self) -> "Jet":
        return Jet(self.data.imag.copy(), self.dim, self.order)

    def conj(self) -> "Jet":
        return Jet(np.conj(self.data), self.dim, self.order)

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape})"

    # arithmetic --------------------------------------------------------
    def _align(self, other: "Jet"):
        if other.dim != self.dim:
            raise ValueError(f"jet dimension mismatch: {self.dim} vs {other.dim}")
        order = min(self.order, other.order)
        return self.truncate(order), other.truncate(order), order

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b, order = self._align(other)
            return Jet(a.data + b.data, self.dim, order)
        other = np.asarray(other)
        data = np.array(np.broadcast_to(self.data, np.broadcast_shapes(self.data.shape, other.shape + (1,))),
                        dtype=np.result_type(self.data, other))
        data[..., 0] += other
        return Jet(data, self.dim, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.data, self.dim, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b, order = self._align(other)
            return Jet(_product_data(a.data, b.data, layout(self.dim, order)), self.dim, order)
        other = np.asarray(other)
        return Jet(self.data * other[..., None], self.dim, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other)
        return Jet(self.data / other[..., None], self.dim, self.order)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer() and abs(p) < 64):
            return self._int_power(int(p))
        return power(self, float(p))

    def _int_power(self, n: int) -> "Jet":
        if n < 0:
            return self.reciprocal()._int_power(-n)
        result = Jet.constant(np.ones(self.shape, dtype=self.data.dtype), self.dim, self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def reciprocal(self) -> "Jet":
        a0 = self.value
        if np.any(a0 == 0):
            raise JetDomainError("division by a jet with zero constant term")
        coeffs = [(-1.0) ** k / a0 ** (k + 1) for k in range(self.order + 1)]
        return _apply_series(self, coeffs)

    # calculus ----------------------------------------------------------
    def partial(self, i: int) -> "Jet":
        if self.order == 0:
            raise CapabilityError("cannot differentiate an order-0 jet")
        lay = self.layout
        data = self.data[..., lay.diff_src[i]] * lay.diff_fac[i]
        return Jet(data, self.dim, self.order - 1)

    def partials(self) -> "Jet":
        """All first partials; the derivative index is appended as the last batch axis."""
        if self.order == 0:
            raise CapabilityError("cannot differentiate an order-0 jet")
        lay = self.layout
        data = np.stack(
            [self.data[..., lay.diff_src[i]] * lay.diff_fac[i] for i in range(self.dim)],
            axis=-2,
        )
        return Jet(data, self.dim, self.order - 1)

    def derivative(self, alpha) -> np.ndarray:
        return derivative(self, alpha)


def _apply_series(a: Jet, coeffs) -> Jet:
    """Evaluate sum_k coeffs[k] * (a - a0)^k; ``coeffs[k]`` broadcast over the batch."""
    h = Jet(a.data.copy(), a.dim, a.order)
    h.data[..., 0] = 0
    out = Jet.constant(np.asarray(coeffs[0]) * np.ones(a.shape), a.dim, a.order)
    hk = None
    for k in range(1, a.order + 1):
        hk = h if hk is None else hk * h
        out = out + hk * np.asarray(coeffs[k])
    return out


def _real_value(a: Jet, what: str) -> np.ndarray:
    if a.data.dtype.kind == "c":
        raise JetDomainError(f"{what} is defined for real jets only")
    return a.value


def exp(a: Jet) -> Jet:
    e = np.exp(_real_value(a, "exp"))
    return _apply_series(a, [e / math.factorial(k) for k in range(a.order + 1)])


def log(a: Jet) -> Jet:
    a0 = _real_value(a, "ln")
    if np.any(a0 <= 0):
        raise JetDomainError("ln of a jet with non-positive constant term")
    coeffs = [np.log(a0)] + [(-1.0) ** (k + 1) / (k * a0**k) for k in range(1, a.order + 1)]
    return _apply_series(a, coeffs)


def power(a: Jet, p: float) -> Jet:
    """Real power a**p for a jet with positive constant term."""
    a0 = _real_value(a, "non-integer power")
    if np.any(a0 <= 0):
        raise JetDomainError(f"power {p} of a jet with non-positive constant term")
    coeffs = []
    binom = 1.0
    for k in range(a.order + 1):
        coeffs.append(binom * a0 ** (p - k))
        binom *= (p - k) / (k + 1)
    return _apply_series(a, coeffs)


def sqrt(a: Jet) -> Jet:
    a0 = _real_value(a, "sqrt")
    if np.any(a0 <= 0):
        raise JetDomainError("sqrt of a jet with non-positive constant term")
    return power(a, 0.5)


def sin(a: Jet) -> Jet:
    s, c = np.sin(_real_value(a, "sin")), np.cos(a.value)
    cycle = [s, c, -s, -c]
    return _apply_series(a, [cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])


def cos(a: Jet) -> Jet:
    s, c = np.sin(_real_value(a, "cos")), np.cos(a.value)
    cycle = [c, -s, -c, s]
    return _apply_series(a, [cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])


def seed_jets(point, order: int) -> list[Jet]:
    """Coordinate jets x_i = point_i + (x_i - point_i) at the given order."""
    point = np.asarray(point, dtype=float).ravel()
    dim = len(point)
    lay = layout(dim, order)
    jets = []
    for i, p in enumerate(point):
        data = np.zeros(lay.size)
        data[0] = p
        if order >= 1:
            e = [0] * dim
            e[i] = 1
            data[lay.rank[tuple(e)]] = 1.0
        jets.append(Jet(data, dim, order))
    return jets


def seed(point, order: int) -> Jet:
    """Same as :func:`seed_jets` but stacked into one jet of shape ``(m,)``."""
    return Jet.stack(seed_jets(point, order))


def derivative(jet: Jet, alpha) -> np.ndarray:
    """Raw partial derivative d^alpha f(p) = alpha! * f_alpha."""
    alpha = tuple(alpha)
    if len(alpha) != jet.dim:
        raise ValueError(f"multi-index {alpha} has wrong length for dim {jet.dim}")
    if sum(alpha) > jet.order:
        raise CapabilityError(f"|alpha| = {sum(alpha)} exceeds jet order {jet.order}")
    lay = jet.layout
    k = lay.rank[alpha]
    out = jet.data[..., k] * lay.factorials[k]
    return out.item() if out.ndim == 0 else out


def _as_operand(x):
    return x if isinstance(x, Jet) else np.asarray(x)


def _pair_contract(sa, a, sb, b, so):
    if isinstance(a, Jet) and isinstance(b, Jet):
        a, b, order = a._align(b)
        lay = layout(a.dim, order)
        return Jet(_product_data(a.data, b.data, lay, (sa, sb, so)), a.dim, order)
    if isinstance(a, Jet):
        return Jet(np.einsum(f"{sa}{_PAIR},{sb}->{so}{_PAIR}", a.data, b), a.dim, a.order)
    if isinstance(b, Jet):
        return Jet(np.einsum(f"{sa},{sb}{_PAIR}->{so}{_PAIR}", a, b.data), b.dim, b.order)
    return np.einsum(f"{sa},{sb}->{so}", a, b)


def contract(subscripts: str, *operands):
    """``np.einsum`` over batch axes, with jet multiplication on the coefficients.

    Operands may mix jets and plain arrays; explicit ``->`` output is required.
    The letter ``Z`` is reserved.
    """
    inputs, out = subscripts.replace(" ", "").split("->")
    subs = inputs.split(",")
    if len(subs) != len(operands):
        raise ValueError("number of subscripts does not match operands")
    if _PAIR in subscripts:
        raise ValueError(f"subscript letter {_PAIR!r} is reserved")
    ops = [_as_operand(x) for x in operands]
    if len(ops) == 1:
        (a,) = ops
        if isinstance(a, Jet):
            return Jet(np.einsum(f"{subs[0]}{_PAIR}->{out}{_PAIR}", a.data), a.dim, a.order)
        return np.einsum(f"{subs[0]}->{out}", a)
    cur_s, cur = subs[0], ops[0]
    for k in range(1, len(ops)):
        later = set(out).union(*subs[k + 1:])
        nxt = subs[k]
        if k == len(ops) - 1:
            keep = out
        else:
            keep = "".join(dict.fromkeys(c for c in cur_s + nxt if c in later))
        cur = _pair_contract(cur_s, cur, nxt, ops[k], keep)
        cur_s = keep
    return cur


def compose(outer: Jet, inner: Jet) -> Jet:
    """Compose a jet expanded at q = inner.value with the inner map.

    ``outer`` lives in ``n`` variables (any batch shape); ``inner`` has shape
    ``(n,)`` in ``m`` variables.  Returns a jet in ``m`` variables of order
    ``min(outer.order, inner.order)``.
    """
    if inner.shape != (outer.dim,):
        raise ValueError(f"inner jet must have shape ({outer.dim},), got {inner.shape}")
    order = min(outer.order, inner.order)
    inner = inner.truncate(order)
    outer = outer.truncate(order)
    lay_out = layout(outer.dim, order)
    lay_in = layout(inner.dim, order)
    delta = inner.data.copy()
    delta[:, 0] = 0
    deltas = [Jet(delta[i], inner.dim, order) for i in range(outer.dim)]
    monos = [None] * lay_out.size
    monos[0] = Jet.constant(1.0, inner.dim, order)
    for k, beta in enumerate(lay_out.indices[1:], start=1):
        i = next(j for j, e in enumerate(beta) if e > 0)
        prev = list(beta)
        prev[i] -= 1
        monos[k] = monos[lay_out.rank[tuple(prev)]] * deltas[i]
    basis = np.stack([mono.data for mono in monos])  # (n_beta, n_coef_in)
    dtype = np.result_type(outer.data, basis)
    data = np.einsum("...b,bc->...c", outer.data, basis).astype(dtype, copy=False)
    assert data.shape[-1] == lay_in.size
    return Jet(data, inner.dim, order)


def value(x):
    """Order-0 part of a jet, or the argument itself for plain numbers."""
    return x.value if isinstance(x, Jet) else np.asarray(x)


def det(a: Jet) -> Jet:
    """Determinant of a square jet matrix by elimination, pivoting on values."""
    if len(a.shape) != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"det needs a square matrix jet, got shape {a.shape}")
    n = a.shape[0]
    rows = [[a[i, j] for j in range(n)] for i in range(n)]
    result = Jet.constant(1.0, a.dim, a.order)
    for k in range(n):
        piv = max(range(k, n), key=lambda r: abs(rows[r][k].value))
        if rows[piv][k].value == 0:
            return Jet.constant(0.0, a.dim, a.order)
        if piv != k:
            rows[k], rows[piv] = rows[piv], rows[k]
            result = -result
        inv = rows[k][k].reciprocal()
        result = result * rows[k][k]
        for r in range(k + 1, n):
            f = rows[r][k] * inv
            rows[r] = [rows[r][c] - f * rows[k][c] for c in range(n)]
    return result
