"""Geometric objects built on concrete charts.

Canonical forms on the multimomentum bundle, their conformal deformation,
Hamiltonian sections, Ehresmann connections and the reduced connection
induced by a section of J^1pi* -> E.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .forms import (ChartError, ChartSpec, DifferentialForm, FormError, SectionMap, VectorField,
                    contract_connection, exterior_derivative, interior_product, lichnerowicz,
                    pullback, wedge)
from .symexpr import Expr, Poly, as_expr, from_poly


class ValidationError(FormError):
    pass


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeeForm:
    """Closed 1-form on the base, ``theta = theta_i dx^i``."""

    base: tuple
    components: tuple = None

    def __post_init__(self):
        base = tuple(self.base)
        comps = self.components
        if comps is None:
            comps = (0,) * len(base)
        elif isinstance(comps, Mapping):
            comps = tuple(comps.get(b, 0) for b in base)
        comps = tuple(as_expr(c) for c in comps)
        if len(comps) != len(base):
            raise ValidationError("one Lee form component per base coordinate")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, chart: ChartSpec) -> "LeeForm":
        return cls(chart.base)

    @classmethod
    def on(cls, chart: ChartSpec, *components) -> "LeeForm":
        return cls(chart.base, tuple(components))

    def __getitem__(self, i: int) -> Expr:
        return self.components[i]

    @property
    def is_trivial(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def closedness_defect(self) -> list:
        out = []
        for i, bi in enumerate(self.base):
            for j in range(i + 1, len(self.base)):
                r = self.components[i].poly().diff(self.base[j]) - self.components[j].poly().diff(bi)
                if not r.is_zero():
                    out.append(((bi, self.base[j]), from_poly(r)))
        return out

    def is_closed(self) -> bool:
        return not self.closedness_defect()

    def validate(self) -> "LeeForm":
        bad = self.closedness_defect()
        if bad:
            (a, b), r = bad[0]
            raise ValidationError(f"Lee form is not closed: d_{b} theta_{a} - d_{a} theta_{b} = {r}")
        return self

    def as_form(self, coords) -> DifferentialForm:
        return DifferentialForm.from_basis(coords, {(b,): c for b, c in zip(self.base, self.components)})


@dataclass(frozen=True)
class HamiltonianData:
    """Hamiltonian ``H(x, u, p^i_a)`` together with the chart it lives on."""

    chart: ChartSpec
    H: Expr

    def __post_init__(self):
        object.__setattr__(self, "H", as_expr(self.H))
        if "p" in self.H.free_variables():
            raise ValidationError("H must not depend on the energy coordinate p")
        object.__setattr__(self, "chart", self.chart.with_kind("J1*"))

    @property
    def density(self) -> Expr:
        """Coefficient ``p + H`` of the Hamiltonian density."""
        return from_poly(Poly.var("p") + self.H.poly())

    def dH_dp(self, i: int, a: int) -> Poly:
        return self.H.poly().diff(self.chart.momentum(i, a))

    def dH_du(self, a: int) -> Poly:
        return self.H.poly().diff(self.chart.fields[a])


@dataclass(frozen=True)
class ConformalFactor:
    """Local potential ``sigma`` with ``d sigma = theta`` on one chart."""

    sigma: Expr
    theta: LeeForm

    def __post_init__(self):
        object.__setattr__(self, "sigma", as_expr(self.sigma))
        s = self.sigma.poly()
        for b, c in zip(self.theta.base, self.theta.components):
            if not (s.diff(b) - c.poly()).is_zero():
                raise ValidationError(f"d sigma does not match theta in the {b} direction")

    def cocycle(self, other: "ConformalFactor") -> Expr:
        """``lambda_{BA} = exp(sigma_A - sigma_B)`` with ``self = A``."""
        return from_poly(Poly.exp(self.sigma.poly() - other.sigma.poly()))


@dataclass
class Connection:
    """Ehresmann connection on a J1* (or E) chart.

    ``gamma_u[(a, j)]`` are the fibre Christoffels, ``gamma_p[(i, a, j)]``
    the momentum ones (absent on E charts).
    """

    chart: ChartSpec
    gamma_u: dict = field(default_factory=dict)
    gamma_p: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gamma_u = {k: as_expr(v).poly() if not isinstance(v, Poly) else v
                        for k, v in self.gamma_u.items()}
        self.gamma_p = {k: as_expr(v).poly() if not isinstance(v, Poly) else v
                        for k, v in self.gamma_p.items()}
        if self.chart.kind == "E" and any(not v.is_zero() for v in self.gamma_p.values()):
            raise ChartError("momentum Christoffels on an E chart")

    @property
    def coords(self) -> tuple:
        return self.chart.coords

    def christoffel_u(self, a: int, j: int) -> Expr:
        return from_poly(self.gamma_u.get((a, j), Poly()))

    def christoffel_p(self, i: int, a: int, j: int) -> Expr:
        return from_poly(self.gamma_p.get((i, a, j), Poly()))

    def horizontal_lifts(self) -> dict:
        ch = self.chart
        out = {}
        for j, bj in enumerate(ch.base):
            comp = {bj: Poly.const(1)}
            for a, f in enumerate(ch.fields):
                comp[f] = self.gamma_u.get((a, j), Poly())
            if ch.kind != "E":
                for i in range(ch.m):
                    for a in range(ch.N):
                        comp[ch.momentum(i, a)] = self.gamma_p.get((i, a, j), Poly())
            out[bj] = VectorField(ch.coords, {k: from_poly(v) for k, v in comp.items()})
        return out

    def is_zero(self) -> bool:
        return all(v.is_zero() for v in self.gamma_u.values()) and \
            all(v.is_zero() for v in self.gamma_p.values())


# ---------------------------------------------------------------------------
# constructors


def _require_l2(chart: ChartSpec):
    if chart.kind != "L2":
        raise ChartError(f"need a multimomentum chart, got kind {chart.kind!r}")


def canonical_forms(chart: ChartSpec) -> tuple:
    """``(Theta_2, Omega_2)`` on a multimomentum chart."""
    _require_l2(chart)
    co = chart.coords
    theta = DifferentialForm.function(co, "p") * chart.volume_form()
    for i in range(chart.m):
        hook = chart.hook(i)
        for a, f in enumerate(chart.fields):
            theta = theta + wedge(DifferentialForm.function(co, chart.momentum(i, a))
                                  * DifferentialForm.d_coord(co, f), hook)
    return theta, -exterior_derivative(theta)


def lcms_form(chart: ChartSpec, theta: LeeForm) -> DifferentialForm:
    """``Omega_{2,theta} = -d_theta Theta_2 = Omega_2 + theta ^ Theta_2``."""
    _require_l2(chart)
    theta.validate()
    T2, _ = canonical_forms(chart)
    return -lichnerowicz(T2, theta.as_form(chart.coords))


def hamiltonian_section(H: HamiltonianData) -> SectionMap:
    ch = H.chart
    l2 = ch.with_kind("L2")
    return SectionMap(ch.coords, l2.coords, {"p": -H.H}, base=ch.base + ch.fields)


def omega_h(H: HamiltonianData, theta: LeeForm) -> DifferentialForm:
    """``(Omega_theta)_h``, the pullback of the conformal form along ``p = -H``."""
    return pullback(hamiltonian_section(H), lcms_form(H.chart.with_kind("L2"), theta))


def theta_h(H: HamiltonianData) -> DifferentialForm:
    return pullback(hamiltonian_section(H), canonical_forms(H.chart.with_kind("L2"))[0])


def connection_from_hamiltonian(H: HamiltonianData, theta: LeeForm) -> Connection:
    """Connection solving the conformal HDW condition.

    Fibre Christoffels are ``dH/dp^i_a``; the momentum trace
    ``-dH/du^a + theta_k p^k_a`` is spread evenly over the diagonal.
    """
    theta.validate()
    ch = H.chart
    gu, gp = {}, {}
    for a in range(ch.N):
        tr = -H.dH_du(a)
        for k in range(ch.m):
            tr = tr + theta[k].poly() * Poly.var(ch.momentum(k, a))
        for j in range(ch.m):
            gu[(a, j)] = H.dH_dp(j, a)
            gp[(j, a, j)] = tr.scale(1 if ch.m == 1 else _frac(1, ch.m))
    return Connection(ch, gu, gp)


def _frac(a, b):
    from fractions import Fraction
    return Fraction(a, b)


def check_connection_condition(c: Connection, H: HamiltonianData, theta: LeeForm) -> DifferentialForm:
    """Residual ``i_h (Omega_theta)_h - (m-1) (Omega_theta)_h``."""
    om = omega_h(H, theta)
    return contract_connection(c, om) - om * (H.chart.m - 1)


def reduce_connection(c: Connection, gamma: SectionMap, offset: Mapping | None = None) -> Connection:
    """Connection on E induced by ``gamma: E -> J1*``.

    The lift at ``gamma(x, u)`` is projected to TE; ``offset`` optionally
    adds momentum-direction components (vertical over E) to the lift
    before projecting, which must not change the result.
    """
    ch = c.chart
    e_chart = ch.with_kind("E")
    if tuple(gamma.source) != e_chart.coords or tuple(gamma.target) != ch.coords:
        raise ChartError("gamma must map the E chart into the J1* chart")
    sub = gamma.image_polys()
    lifts = c.horizontal_lifts()
    gu = {}
    for j, bj in enumerate(ch.base):
        V = lifts[bj]
        if offset:
            V = V + VectorField(ch.coords, offset.get(bj, {}))
        for a, f in enumerate(ch.fields):
            gu[(a, j)] = V[f].poly().subs(sub)
    return Connection(e_chart, gu, {})


def reduced_connection_curvature(c: Connection) -> list:
    """Curvature components of a connection on E (zero iff flat).

    ``R^a_{ij} = D_i Gamma^a_j - D_j Gamma^a_i`` with
    ``D_i = d/dx^i + Gamma^b_i d/du^b``.
    """
    ch = c.chart
    out = []
    for i, bi in enumerate(ch.base):
        for j in range(i + 1, ch.m):
            bj = ch.base[j]
            for a in range(ch.N):
                gi, gj = c.gamma_u.get((a, i), Poly()), c.gamma_u.get((a, j), Poly())
                r = gj.diff(bi) - gi.diff(bj)
                for b, fb in enumerate(ch.fields):
                    r = r + c.gamma_u.get((b, i), Poly()) * gj.diff(fb) \
                        - c.gamma_u.get((b, j), Poly()) * gi.diff(fb)
                out.append(from_poly(r))
    return out


def local_rescaling_check(omega_theta: DifferentialForm, sigma: ConformalFactor) -> DifferentialForm:
    """``d(exp(-sigma) Omega_theta)``; zero iff the rescaled form is closed."""
    factor = from_poly(Poly.exp(-sigma.sigma.poly()))
    return exterior_derivative(omega_theta * factor)


def gamma_bar_form(gamma_bar: SectionMap, chart: ChartSpec) -> DifferentialForm:
    """The m-form on E encoded by a section of the multimomentum bundle."""
    T2, _ = canonical_forms(chart.with_kind("L2"))
    return pullback(gamma_bar, T2)


def lagrangian_check(gamma_bar: SectionMap, theta: LeeForm, chart: ChartSpec) -> bool:
    """Lagrangian test: the section's form is ``d_theta``-closed."""
    e = chart.with_kind("E")
    form = gamma_bar_form(gamma_bar, chart)
    return lichnerowicz(form, theta.as_form(e.coords)).is_zero()


def gamma_bar_section(chart: ChartSpec, rho, gamma: Mapping) -> SectionMap:
    """Section ``E -> Lambda^m_2 E`` with ``p = rho`` and ``p^i_a = gamma[(i, a)]``."""
    e = chart.with_kind("E")
    l2 = chart.with_kind("L2")
    images = {"p": as_expr(rho)}
    for i in range(chart.m):
        for a in range(chart.N):
            images[chart.momentum(i, a)] = as_expr(gamma.get((i, a), 0))
    return SectionMap(e.coords, l2.coords, images, base=e.coords)


def gamma_section(chart: ChartSpec, gamma: Mapping) -> SectionMap:
    """Section ``E -> J^1 pi*`` with ``p^i_a = gamma[(i, a)]``."""
    e = chart.with_kind("E")
    j = chart.with_kind("J1*")
    images = {chart.momentum(i, a): as_expr(gamma.get((i, a), 0))
              for i in range(chart.m) for a in range(chart.N)}
    return SectionMap(e.coords, j.coords, images, base=e.coords)


def nondegeneracy_rank(omega: DifferentialForm, point: Mapping) -> tuple:
    """``(rank, dim)`` of ``V -> i_V omega`` at a point; full rank means 1-nondegenerate."""
    co = omega.coords
    cols = []
    keys = None
    for name in co:
        img = interior_product(VectorField.coordinate(co, name), omega)
        vals = {k: float(p.eval(point)) for k, p in img._terms.items()}
        cols.append(vals)
    keys = sorted({k for col in cols for k in col})
    if not keys:
        return 0, len(co)
    M = np.array([[col.get(k, 0.0) for col in cols] for k in keys])
    return int(np.linalg.matrix_rank(M)), len(co)
