"""Verifier for the conformal Hamilton-Jacobi equivalence.

A candidate ``gamma: E -> J^1 pi*`` solves the conformal HJ problem when
``h o gamma`` is closed for the Lichnerowicz differential.  The roundtrip
check integrates the reduced connection and evaluates the conformal HDW
residual of ``gamma o sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bundle import (HamiltonianData, LeeForm, connection_from_hamiltonian, gamma_bar_form,
                     gamma_bar_section, gamma_section, reduce_connection)
from .dynamics import Residual, _rk4, _step_count
from .forms import ChartSpec, DifferentialForm, lichnerowicz, wedge
from .symexpr import Expr, Poly, as_expr, from_poly


class ConsistencyError(AssertionError):
    """Two independent evaluations of the same quantity disagree."""


@dataclass(frozen=True)
class GammaSection:
    """``gamma[(i, a)]`` = p^i_a component; optional energy component ``rho``."""

    chart: ChartSpec
    gamma: Mapping
    rho: Expr | None = None

    def __post_init__(self):
        g = {k: as_expr(v) for k, v in dict(self.gamma).items()}
        object.__setattr__(self, "gamma", g)
        if self.rho is not None:
            object.__setattr__(self, "rho", as_expr(self.rho))
        momenta = set(self.chart.momenta) | {"p"}
        for k, v in list(g.items()) + [("rho", self.rho)]:
            if v is not None and v.free_variables() & momenta:
                raise ValueError(f"component {k} must depend on (x, u) only")

    def component(self, i: int, a: int) -> Poly:
        return self.gamma.get((i, a), as_expr(0)).poly()

    def substitution(self) -> dict:
        ch = self.chart
        return {ch.momentum(i, a): self.component(i, a) for i in range(ch.m) for a in range(ch.N)}

    def section(self):
        return gamma_section(self.chart, self.gamma)

    def with_hamiltonian_energy(self, H: HamiltonianData) -> "GammaSection":
        """The lift ``h o gamma``: energy component ``-H o gamma``."""
        rho = from_poly(-H.H.poly().subs(self.substitution()))
        return GammaSection(self.chart, self.gamma, rho)


def check_closed(gbar: GammaSection) -> Residual:
    """d-closedness of ``gamma_bar``: trace and symmetry components."""
    if gbar.rho is None:
        raise ValueError("check_closed needs the energy component rho")
    ch = gbar.chart
    rho = gbar.rho.poly()
    out = {}
    for a, f in enumerate(ch.fields):
        r = rho.diff(f)
        for i, b in enumerate(ch.base):
            r = r - gbar.component(i, a).diff(b)
        out[f"closed[{f}]"] = from_poly(r)
    out.update(_symmetry(gbar))
    return Residual(out)


def _symmetry(g: GammaSection) -> dict:
    ch = g.chart
    out = {}
    for i, b in enumerate(ch.base):
        for a in range(ch.N):
            for c in range(a + 1, ch.N):
                r = g.component(i, a).diff(ch.fields[c]) - g.component(i, c).diff(ch.fields[a])
                out[f"sym[{b};{ch.fields[a]},{ch.fields[c]}]"] = from_poly(r)
    return out


def hj_residual(g: GammaSection, H: HamiltonianData, theta: LeeForm, *, cross_check: bool = True) -> Residual:
    """Coordinate HJ residuals ``r_a`` plus symmetry residuals.

    With ``cross_check`` the same quantities are read off
    ``d_theta(h o gamma)`` and a mismatch raises :class:`ConsistencyError`.
    """
    ch = H.chart
    sub = g.substitution()
    Hp = H.H.poly()
    out = {}
    for a, f in enumerate(ch.fields):
        r = Hp.diff(f).subs(sub)
        for i, b in enumerate(ch.base):
            gia = g.component(i, a)
            r = r + gia.diff(b) - theta[i].poly() * gia
            for c in range(ch.N):
                r = r + Hp.diff(ch.momentum(i, c)).subs(sub) * g.component(i, c).diff(f)
        out[f"r[{f}]"] = from_poly(r)
    out.update(_symmetry(g))
    res = Residual(out)
    if cross_check:
        form = hj_form(g, H, theta)
        expected = _expected_form(ch, res)
        if not (form - expected).is_zero():
            raise ConsistencyError("form and coordinate HJ residuals disagree")
    return res


def hj_form(g: GammaSection, H: HamiltonianData, theta: LeeForm) -> DifferentialForm:
    """``d_theta(h o gamma)`` as an (m+1)-form on E."""
    lifted = g.with_hamiltonian_energy(H)
    ch = H.chart
    sec = gamma_bar_section(ch, lifted.rho, lifted.gamma)
    form = gamma_bar_form(sec, ch)
    return lichnerowicz(form, theta.as_form(ch.with_kind("E").coords))


def _expected_form(ch: ChartSpec, res: Residual) -> DifferentialForm:
    e = ch.with_kind("E")
    co = e.coords
    vol = DifferentialForm(co, ch.m, {tuple(range(ch.m)): Poly.const(1)})
    out = DifferentialForm.zero(co, ch.m + 1)
    for f in ch.fields:
        du = DifferentialForm.d_coord(co, f)
        out = out + wedge(du, vol) * (-res[f"r[{f}]"])
    for i, b in enumerate(ch.base):
        hook = DifferentialForm(co, ch.m - 1, {tuple(j for j in range(ch.m) if j != i): Poly.const((-1) ** i)})
        for a in range(ch.N):
            for c in range(a + 1, ch.N):
                s = res[f"sym[{b};{ch.fields[a]},{ch.fields[c]}]"]
                dd = wedge(DifferentialForm.d_coord(co, ch.fields[c]), DifferentialForm.d_coord(co, ch.fields[a]))
                out = out + wedge(dd, hook) * s
    return out


def reduced_hj_residual(S: Sequence, H: HamiltonianData, f=None) -> Residual:
    """``d_i S^i + H(x, u, dS^i/du^a) - f``.

    Without ``f`` the u-independent remainder is taken as ``f`` and
    reported in ``meta``.
    """
    ch = H.chart
    Sp = [as_expr(s).poly() for s in S]
    if len(Sp) != ch.m:
        raise ValueError("one S^i per base direction")
    sub = {ch.momentum(i, a): Sp[i].diff(fa) for i in range(ch.m) for a, fa in enumerate(ch.fields)}
    r = H.H.poly().subs(sub)
    for i, b in enumerate(ch.base):
        r = r + Sp[i].diff(b)
    res = Residual()
    if f is None:
        free, dep = r.split_by(ch.fields)
        res.components["reduced"] = from_poly(dep)
        res.meta = {"f_inferred": True, "f": from_poly(free)}
    else:
        res.components["reduced"] = from_poly(r - as_expr(f).poly())
        res.meta = {"f_inferred": False, "f": as_expr(f)}
    return res


# ---------------------------------------------------------------------------


@dataclass
class HJReport:
    closed: Residual | None
    hj: Residual
    hj_norm: float
    roundtrip_norm: float
    hj_tol: float = 1e-10
    roundtrip_tol: float = 1e-6
    trajectory: tuple = field(default=None, repr=False)

    @property
    def hj_pass(self) -> bool:
        return self.hj_norm < self.hj_tol

    @property
    def roundtrip_pass(self) -> bool:
        return self.roundtrip_norm < self.roundtrip_tol

    @property
    def consistent(self) -> bool:
        return self.hj_pass == self.roundtrip_pass

    @property
    def passed(self) -> bool:
        return self.hj_pass and self.roundtrip_pass

    def to_text(self) -> str:
        lines = [f"hj_residual: {self.hj_norm:.3e}",
                 f"roundtrip_residual: {self.roundtrip_norm:.3e}",
                 f"hj_pass: {self.hj_pass}",
                 f"roundtrip_pass: {self.roundtrip_pass}",
                 f"equivalence_consistent: {self.consistent}"]
        if self.closed is not None:
            lines.insert(0, f"closed_residual: {self.closed.max_norm():.3e}")
        return "\n".join(lines)

    def csv_row(self) -> list:
        return [f"{self.hj_norm:.6e}", f"{self.roundtrip_norm:.6e}", int(self.hj_pass),
                int(self.roundtrip_pass), int(self.consistent)]


def _d1(y: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order central first derivative on interior nodes (2 trimmed each side)."""
    return (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * dt)


def roundtrip_verify(g: GammaSection, H: HamiltonianData, theta: LeeForm, init, t_span, dt: float,
                     *, hj_tol: float = 1e-10, roundtrip_tol: float = 1e-6) -> HJReport:
    """Integrate the reduced connection from ``init`` and test ``gamma o sigma``.

    Only line bases (m = 1) are supported, where every connection is flat.
    """
    ch = H.chart
    if ch.m != 1:
        raise ValueError("roundtrip verification needs m = 1")
    hres = hj_residual(g, H, theta)
    closed = check_closed(g) if g.rho is not None else None
    red = reduce_connection(connection_from_hamiltonian(H, theta), g.section())
    N = ch.N
    tname = ch.base[0]
    vel = [red.gamma_u.get((a, 0), Poly()) for a in range(N)]

    def rhs(t, y):
        pt = {tname: t, **dict(zip(ch.fields, y))}
        return np.array([v.eval(pt) for v in vel], dtype=float)

    steps = _step_count(t_span, dt)
    if steps < 5:
        raise ValueError("need at least five steps")
    y0 = np.atleast_1d(np.asarray(init, dtype=float))
    sig = np.array(_rk4(rhs, y0, float(t_span[0]), dt, steps))
    t = float(t_span[0]) + dt * np.arange(steps + 1)
    pt = {tname: t, **{f: sig[:, a] for a, f in enumerate(ch.fields)}}
    sub = g.substitution()
    mom = {ch.momentum(0, a): np.broadcast_to(sub[ch.momentum(0, a)].eval(pt), t.shape)
           for a in range(N)}
    pt.update(mom)
    Hp = H.H.poly()
    th = np.broadcast_to(theta[0].poly().eval(pt), t.shape)
    worst = 0.0
    inner = slice(2, -2)
    for a, f in enumerate(ch.fields):
        name = ch.momentum(0, a)
        r1 = _d1(sig[:, a], dt) - np.broadcast_to(Hp.diff(name).eval(pt), t.shape)[inner]
        r2 = _d1(mom[name], dt) + np.broadcast_to(Hp.diff(f).eval(pt), t.shape)[inner] - th[inner] * mom[name][inner]
        worst = max(worst, float(np.max(np.abs(r1))), float(np.max(np.abs(r2))))

    # HJ norm: exact zero if symbolic, else the residual seen along the trajectory
    if hres.is_zero():
        hnorm = 0.0
    else:
        hnorm = hres.max_norm()
        for v in hres.components.values():
            if not v.is_zero():
                vals = np.broadcast_to(v.poly().eval(pt), t.shape)
                hnorm = max(hnorm, float(np.max(np.abs(vals))))
    return HJReport(closed, hres, hnorm, worst, hj_tol, roundtrip_tol, (t, sig))
