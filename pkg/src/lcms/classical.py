"""Multisymplectic (theta = 0) reference implementations.

These are written directly from the untwisted formulas and share no code
path with the conformal constructors beyond the exterior algebra, so the
two can be compared when the Lee form vanishes.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .bundle import Connection, HamiltonianData
from .forms import ChartSpec, DifferentialForm, contract_connection, exterior_derivative, wedge
from .symexpr import Poly, as_expr, from_poly


def _fn(coords, p: Poly) -> DifferentialForm:
    return DifferentialForm(coords, 0, {(): p})


def omega_h(H: HamiltonianData) -> DifferentialForm:
    """``dH ^ d^m x - dp^i_a ^ du^a ^ (d_i -| d^m x)`` written out directly."""
    ch = H.chart
    co = ch.coords
    out = wedge(exterior_derivative(_fn(co, H.H.poly())), ch.volume_form())
    for i in range(ch.m):
        for a, f in enumerate(ch.fields):
            dp = DifferentialForm.d_coord(co, ch.momentum(i, a))
            du = DifferentialForm.d_coord(co, f)
            out = out - wedge(wedge(dp, du), ch.hook(i))
    return out


def multimomentum_omega(chart: ChartSpec) -> DifferentialForm:
    """``-dp ^ d^m x - dp^i_a ^ du^a ^ (d_i -| d^m x)`` on a multimomentum chart."""
    co = chart.coords
    out = -wedge(DifferentialForm.d_coord(co, "p"), chart.volume_form())
    for i in range(chart.m):
        for a, f in enumerate(chart.fields):
            out = out - wedge(wedge(DifferentialForm.d_coord(co, chart.momentum(i, a)),
                                    DifferentialForm.d_coord(co, f)), chart.hook(i))
    return out


def connection(H: HamiltonianData) -> Connection:
    ch = H.chart
    Hp = H.H.poly()
    gu, gp = {}, {}
    for a, f in enumerate(ch.fields):
        for j in range(ch.m):
            gu[(a, j)] = Hp.diff(ch.momentum(j, a))
            gp[(j, a, j)] = (-Hp.diff(f)).scale(Fraction(1, ch.m))
    return Connection(ch, gu, gp)


def connection_residual(c: Connection, H: HamiltonianData) -> DifferentialForm:
    om = omega_h(H)
    return contract_connection(c, om) - om * (H.chart.m - 1)


def hj_form(H: HamiltonianData, gamma: dict) -> DifferentialForm:
    """``d(h o gamma)`` on E, with ``h o gamma = -H(gamma) d^m x + gamma^i_a du^a ^ (d_i -| d^m x)``."""
    ch = H.chart
    e = ch.with_kind("E")
    co = e.coords
    sub = {ch.momentum(i, a): as_expr(gamma.get((i, a), 0)).poly()
           for i in range(ch.m) for a in range(ch.N)}
    vol = DifferentialForm(co, ch.m, {tuple(range(ch.m)): Poly.const(1)})
    form = _fn(co, -H.H.poly().subs(sub)) * vol
    for i in range(ch.m):
        hook = DifferentialForm(co, ch.m - 1, {tuple(j for j in range(ch.m) if j != i): Poly.const((-1) ** i)})
        for a, f in enumerate(ch.fields):
            form = form + wedge(_fn(co, sub[ch.momentum(i, a)]) * DifferentialForm.d_coord(co, f), hook)
    return exterior_derivative(form)


def hamilton_flow(H: HamiltonianData, init, T: float, dt: float) -> tuple:
    """RK4 for ``u' = dH/dp``, ``p' = -dH/du`` (m = 1); returns final ``(u, p)``."""
    ch = H.chart
    Hp = H.H.poly()
    N = ch.N
    mom = [ch.momentum(0, a) for a in range(N)]
    fu = [Hp.diff(m) for m in mom]
    fp = [-Hp.diff(f) for f in ch.fields]
    u = np.atleast_1d(np.asarray(init[0], float)).copy()
    p = np.atleast_1d(np.asarray(init[1], float)).copy()

    def f(t, u, p):
        pt = {ch.base[0]: t, **dict(zip(ch.fields, u)), **dict(zip(mom, p))}
        return (np.array([g.eval(pt) for g in fu]), np.array([g.eval(pt) for g in fp]))

    steps = int(round(T / dt))
    for k in range(steps):
        t = k * dt
        a1, b1 = f(t, u, p)
        a2, b2 = f(t + dt / 2, u + dt / 2 * a1, p + dt / 2 * b1)
        a3, b3 = f(t + dt / 2, u + dt / 2 * a2, p + dt / 2 * b2)
        a4, b4 = f(t + dt, u + dt * a3, p + dt * b3)
        u = u + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        p = p + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    return u, p


def as_exprs(form: DifferentialForm) -> dict:
    return {k: from_poly(v) for k, v in form._terms.items()}
