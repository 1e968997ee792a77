"""Randomized symbolic identity checks for the exterior calculus layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import LeeForm, gamma_bar_form, gamma_bar_section, lcms_form
from .forms import (ChartSpec, DifferentialForm, exterior_derivative, form_as_section, lichnerowicz,
                    pullback, random_polynomial_form, tautological_form, wedge)
from .symexpr import Poly, from_poly


@dataclass
class IdentityResult:
    name: str
    instances: int
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.instances > 0


def _rand_poly(rng, names, max_terms=3, max_deg=2) -> Poly:
    p = Poly()
    for _ in range(int(rng.integers(1, max_terms + 1))):
        mono = Poly.const(int(rng.integers(-3, 4)))
        for _ in range(int(rng.integers(0, max_deg + 1))):
            mono = mono * Poly.var(names[int(rng.integers(len(names)))])
        p = p + mono
    return p


def _closed_lee(rng, chart: ChartSpec) -> LeeForm:
    """Random exact (hence closed) Lee form ``d f`` with ``f`` a base polynomial."""
    f = _rand_poly(rng, list(chart.base), max_terms=3, max_deg=3)
    return LeeForm(chart.base, tuple(from_poly(f.diff(b)) for b in chart.base))


_COORDS = ("t", "x", "u", "p", "q")


def d_squared(rng, n: int) -> IdentityResult:
    fails = 0
    for k in range(n):
        a = random_polynomial_form(_COORDS, k % 4, rng)
        fails += not exterior_derivative(exterior_derivative(a)).is_zero()
    return IdentityResult("d o d = 0", n, fails)


def leibniz(rng, n: int) -> IdentityResult:
    fails = 0
    for k in range(n):
        a = random_polynomial_form(_COORDS, k % 3, rng)
        b = random_polynomial_form(_COORDS, (k // 3) % 3, rng)
        lhs = exterior_derivative(wedge(a, b))
        rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)) * (-1) ** a.degree
        fails += not (lhs - rhs).is_zero()
    return IdentityResult("graded Leibniz", n, fails)


def graded_commutativity(rng, n: int) -> IdentityResult:
    fails = 0
    for k in range(n):
        a = random_polynomial_form(_COORDS, k % 3, rng)
        b = random_polynomial_form(_COORDS, (k + 1) % 3, rng)
        diff = wedge(a, b) - wedge(b, a) * (-1) ** (a.degree * b.degree)
        fails += not diff.is_zero()
    return IdentityResult("graded commutativity", n, fails)


def lichnerowicz_squared(rng, n: int) -> IdentityResult:
    chart = ChartSpec(2, 1, "L2")
    fails = 0
    for k in range(n):
        th = _closed_lee(rng, chart).as_form(chart.coords)
        a = random_polynomial_form(chart.coords, k % 3, rng)
        fails += not lichnerowicz(lichnerowicz(a, th), th).is_zero()
    return IdentityResult("Lichnerowicz squared = 0", n, fails)


def conformal_closure(rng, n: int) -> IdentityResult:
    """``d Omega_{2,theta} = theta ^ Omega_{2,theta}`` on charts with m = 1, 2, 3."""
    fails = 0
    charts = [ChartSpec(m, N, "L2") for m in (1, 2, 3) for N in (1, 2)]
    for k in range(n):
        ch = charts[k % len(charts)]
        lee = _closed_lee(rng, ch)
        om = lcms_form(ch, lee)
        fails += not (exterior_derivative(om) - wedge(lee.as_form(ch.coords), om)).is_zero()
    return IdentityResult("d Omega_theta = theta ^ Omega_theta", n, fails)


def _random_base_form(rng, base, k) -> DifferentialForm:
    return random_polynomial_form(base, k, rng, params=("c",))


def tautological_pullback(rng, n: int) -> IdentityResult:
    fails = 0
    for j in range(n):
        base = ("x", "y", "z")[: 2 + j % 2]
        k = 1 + j % len(base)
        kappa = _random_base_form(rng, base, k)
        sec = form_as_section(kappa, base)
        theta = tautological_form(base, k)
        fails += not (pullback(sec, theta) - kappa).is_zero()
    return IdentityResult("kappa* Theta = kappa", n, fails)


def canonical_pullback(rng, n: int) -> IdentityResult:
    fails = 0
    for j in range(n):
        base = ("x", "y", "z")[: 2 + j % 2]
        k = 1 + j % len(base)
        kappa = _random_base_form(rng, base, k)
        sec = form_as_section(kappa, base)
        omega = -exterior_derivative(tautological_form(base, k))
        fails += not (pullback(sec, omega) + exterior_derivative(kappa)).is_zero()
    return IdentityResult("kappa* Omega = -d kappa", n, fails)


def conformal_pullback(rng, n: int) -> IdentityResult:
    """``gamma_bar*(Omega_{2,theta}) = -d_theta gamma_bar``."""
    fails = 0
    charts = [ChartSpec(m, N, "L2") for m in (1, 2) for N in (1, 2)]
    for j in range(n):
        ch = charts[j % len(charts)]
        e = ch.with_kind("E")
        names = list(e.coords)
        rho = from_poly(_rand_poly(rng, names))
        gam = {(i, a): from_poly(_rand_poly(rng, names)) for i in range(ch.m) for a in range(ch.N)}
        sec = gamma_bar_section(ch, rho, gam)
        lee = _closed_lee(rng, ch)
        lhs = pullback(sec, lcms_form(ch, lee))
        rhs = -lichnerowicz(gamma_bar_form(sec, ch), lee.as_form(e.coords))
        fails += not (lhs - rhs).is_zero()
    return IdentityResult("gamma_bar* Omega_theta = -d_theta gamma_bar", n, fails)


SUITE = (d_squared, leibniz, graded_commutativity, lichnerowicz_squared, conformal_closure,
         tautological_pullback, canonical_pullback, conformal_pullback)


def run_suite(instances: int = 50, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [check(rng, instances) for check in SUITE]
