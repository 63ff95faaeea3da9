"""Almost-Hermitian calculus: J, Kaehler form, Lee data, class residuals, star curvature.

Conventions on top of :mod:`bihol.geometry`:

* ``J[i, j]`` = J^i_j; ``nabla_J[k, j, i]`` = ((nabla_i J) d_j)^k.
* Kaehler form Omega(X, Y) = g(X, J Y).
* For a 2-form w, (dw)_ijk = d_i w_jk + d_j w_ki + d_k w_ij and
  (t ^ w)_ijk = t_i w_jk + t_j w_ki + t_k w_ij, so that conformal rescaling
  g -> e^{2 gamma} g gives d(Omega) = 2 d(gamma) ^ Omega.
* div J = sum_i (nabla_{e_i} J) e_i, sigma = J div J, Lee field
  B = 2/(2-m) sigma, Lee form theta = B^flat.
* Codifferential on 1-forms: delta theta = -div(theta^sharp).
* Hermitian frame Z_j = (e_j - i J e_j)/sqrt(2) from the J-adapted real frame.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import UnsupportedDimensionError
from .expr import eval_many
from .geometry import Chart, PointGeometry
from .jets import Jet, contract


def prime(J, X):
    """(1,0)-part X' = (X - i J X)/2 of a (complex) vector."""
    return 0.5 * (X - 1j * contract("ij,j->i", J, X))


def double_prime(J, X):
    """(0,1)-part X'' = (X + i J X)/2."""
    return 0.5 * (X + 1j * contract("ij,j->i", J, X))


@dataclass(frozen=True)
class LeeData:
    sigma: Jet
    B: Jet
    theta: Jet


class HermitianGeometry(PointGeometry):
    """:class:`PointGeometry` of a chart that carries a complex structure."""

    def __init__(self, chart: Chart, point, order: int = 3):
        if not chart.is_hermitian:
            raise ValueError(f"chart {chart.name!r} has no complex_structure")
        super().__init__(chart, point, order)

    @cached_property
    def J(self) -> Jet:
        return eval_many(self.chart.complex_structure, self.x)

    def apply_J(self, X):
        return contract("ij,j->i", self.J, X)

    @cached_property
    def nabla_J(self) -> Jet:
        return self.nabla(self.J, "ul")

    @cached_property
    def div_J(self) -> Jet:
        return contract("ab,kba->k", self.inverse, self.nabla_J)

    @cached_property
    def sigma(self) -> Jet:
        return self.apply_J(self.div_J)

    @cached_property
    def lee_vector(self) -> Jet:
        m = self.dim
        if m == 2:
            raise UnsupportedDimensionError("Lee field formula B = 2/(2-m) J div J needs m > 2")
        return self.sigma * (2.0 / (2.0 - m))

    @cached_property
    def lee_form(self) -> Jet:
        return self.lower(self.lee_vector)

    @cached_property
    def kahler_form(self) -> Jet:
        return contract("ip,pj->ij", self.metric, self.J)

    @cached_property
    def d_kahler_form(self) -> Jet:
        dO = self.kahler_form.partials()  # [a, b, c] = d_c Omega_ab
        return contract("jki->ijk", dO) + contract("kij->ijk", dO) + dO

    @cached_property
    def theta_wedge_omega(self) -> Jet:
        th, om = self.lee_form, self.kahler_form
        return (contract("i,jk->ijk", th, om) + contract("j,ki->ijk", th, om)
                + contract("k,ij->ijk", th, om))

    @cached_property
    def d_lee_form(self) -> Jet:
        dth = self.lee_form.partials()  # [j, i] = d_i theta_j
        return contract("ji->ij", dth) - dth

    @cached_property
    def nijenhuis(self) -> Jet:
        """N(d_i, d_j)^k for N(X,Y) = [JX,JY] - J[JX,Y] - J[X,JY] - [X,Y]."""
        J = self.J
        dJ = J.partials()  # [k, j, p] = d_p J^k_j
        return (contract("pi,kjp->kij", J, dJ) - contract("pj,kip->kij", J, dJ)
                + contract("kp,pij->kij", J, dJ) - contract("kp,pji->kij", J, dJ))

    def nabla_J_apply(self, X, Y) -> Jet:
        """(nabla_X J) Y."""
        return contract("kji,i,j->k", self.nabla_J, X, Y)

    def naj_rhs(self, X, Y) -> Jet:
        """1/2 (theta(JY) X - theta(Y) JX + g(X,Y) JB - Omega(X,Y) B)."""
        th, B = self.lee_form, self.lee_vector
        JX, JY = self.apply_J(X), self.apply_J(Y)
        t1 = contract("i,i->", th, JY) * X
        t2 = contract("i,i->", th, Y) * JX
        t3 = self.inner(X, Y) * self.apply_J(B)
        t4 = contract("ij,i,j->", self.kahler_form, X, Y) * B
        return 0.5 * (t1 - t2 + t3 - t4)

    def D_operator(self, V: Jet) -> Jet:
        """D^V(X) = nabla_{JX} V + J nabla_X V as the (1,1) tensor ``D[k, i]``."""
        nV = self.nabla(V, "u")  # [k, i] = (nabla_i V)^k
        return contract("kp,pi->ki", nV, self.J) + contract("kp,pi->ki", self.J, nV)

    @cached_property
    def codifferential_lee(self) -> Jet:
        return -self.divergence(self.lee_vector)

    @cached_property
    def star_ricci(self) -> Jet:
        """Ric*(X, Y) = tr(Z -> R(X, JZ) JY)."""
        return contract("apiq,qa,pj->ij", self.riemann, self.J, self.J)

    @cached_property
    def star_scalar(self) -> Jet:
        return contract("ij,ij->", self.inverse, self.star_ricci)

    def hermitian_frame(self, order=None):
        """(Z_j) for j = 1..n as a complex jet of shape (n, m), with the real frame."""
        order = self.order if order is None else order
        frame = self.orthonormal_frame(self.J, order)
        e = frame[0::2]
        Je = frame[1::2]
        Z = (e - 1j * Je) * (1.0 / np.sqrt(2.0))
        return Z, frame

    # residual summaries --------------------------------------------------
    def structure_residuals(self) -> dict:
        J0 = self.J.value
        g0 = self.metric.value
        m = self.dim
        return {
            "j_square_residual": float(np.max(np.abs(J0 @ J0 + np.eye(m)))),
            "compat_residual": float(np.max(np.abs(J0.T @ g0 @ J0 - g0))),
            "nijenhuis_residual": float(np.max(np.abs(self.nijenhuis.value))) if self.order >= 1
            else float("nan"),
        }

    def one_two_symplectic_residual(self) -> float:
        """max |dOmega(Z, Wbar, Vbar)| over Hermitian-frame vectors."""
        dO = self.d_kahler_form.value
        Z, _ = self.hermitian_frame(order=0)
        Z0 = Z.value
        Zb = np.conj(Z0)
        T = np.einsum("ijk,ai,bj,ck->abc", dO, Z0, Zb, Zb)
        return float(np.max(np.abs(T))) if T.size else 0.0


def _hgeom(hchart, point, order):
    if isinstance(point, HermitianGeometry):
        return point
    return HermitianGeometry(hchart, point, order)


def validate_structure(hchart: Chart, point) -> dict:
    return _hgeom(hchart, point, 1).structure_residuals()


def kahler_form_and_classes(hchart: Chart, point) -> dict:
    geo = _hgeom(hchart, point, 2)
    amax = lambda j: float(np.max(np.abs(j.value))) if j.value.size else 0.0
    # the Lee form is undefined for m = 2, where every Hermitian metric is Kaehler
    lee_defined = geo.dim > 2
    return {
        "Omega": geo.kahler_form,
        "dOmega": geo.d_kahler_form,
        "kahler_residual": amax(geo.d_kahler_form),
        "lck_residual": amax(geo.d_kahler_form - geo.theta_wedge_omega) if lee_defined
        else float("nan"),
        "dtheta_residual": amax(geo.d_lee_form) if lee_defined else float("nan"),
        "cosymplectic_residual": geo.norm(geo.sigma),
        "one_two_symplectic_residual": geo.one_two_symplectic_residual(),
    }


def nabla_J(hchart: Chart, point, X, Y) -> Jet:
    geo = _hgeom(hchart, point, 1)
    return geo.nabla_J_apply(np.asarray(X, float), np.asarray(Y, float))


def lee_data(hchart: Chart, point, order: int = 1) -> LeeData:
    geo = _hgeom(hchart, point, order)
    return LeeData(sigma=geo.sigma, B=geo.lee_vector, theta=geo.lee_form)


def star_curvature(hchart: Chart, point) -> dict:
    geo = _hgeom(hchart, point, 2)
    return {"ric_star": geo.star_ricci, "s_star": float(geo.star_scalar.value),
            "s": float(geo.scalar_curvature.value)}
