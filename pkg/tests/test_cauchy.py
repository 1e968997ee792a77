import math

import numpy as np
import pytest

from lcms.bundle import HamiltonianData, LeeForm
from lcms.cauchy import (EmbeddingState, bump_probes, check_precosymplectic, eta_form, hj_infinite_check,
                         horizontal_lift_tangent, infinite_hdw_residual, integrate_form, refinement_orders,
                         vertical_names)
from lcms.dynamics import integrate_cauchy, sample_state
from lcms.forms import ChartSpec, DegreeError, DifferentialForm
from lcms.grid import GridSpec
from lcms.hj import GammaSection

WAVE = ChartSpec(2, 1, base=("t", "x"), metric=((1, 0), (0, -1)))
H = HamiltonianData(WAVE, "0.5*pt^2 - 0.5*px^2")
LEE = LeeForm.on(WAVE, 0.5, 0)
K = 2 * math.pi
W = math.sqrt(K * K - 1 / 16)
PHASE = f"({K}*x - {W}*t)"
EXACT = {
    "u": f"exp(0.25*t)*sin{PHASE}",
    "pt": f"0.25*exp(0.25*t)*sin{PHASE} - {W}*exp(0.25*t)*cos{PHASE}",
    "px": f"-{K}*exp(0.25*t)*cos{PHASE}",
}


def es_at(g, t, exprs=EXACT):
    return EmbeddingState(WAVE, sample_state(g, WAVE, t, exprs))


def test_grid_weights():
    for n, nodes in ((1, 64), (2, 16), (3, 5)):
        assert abs(GridSpec(n, nodes).total_weight() - 1) < 1e-12


def test_trapezoid_superconvergence():
    g = GridSpec(1, 16)
    x = g.axes()[0]
    assert abs(g.integrate(np.cos(2 * np.pi * 3 * x) ** 2) - 0.5) < 1e-12


def test_integrate_form_constant_and_linearity():
    g = GridSpec(1, 32)
    es = es_at(g, 0.0)
    co = WAVE.coords
    alpha = DifferentialForm.from_basis(co, {("u", "x"): 3.0})
    assert abs(integrate_form(alpha, es, [{"u": 1.0}]) - 3.0) < 1e-12
    X1, X2 = {"u": np.sin(g.axes()[0])}, {"u": 2.0, "pt": 1.0}
    a, b = integrate_form(alpha, es, [X1]), integrate_form(alpha, es, [X2])
    both = integrate_form(alpha, es, [{"u": X1["u"] + 2.0, "pt": 1.0}])
    assert abs(both - a - b) < 1e-12
    with pytest.raises(DegreeError):
        integrate_form(alpha, es, [])


def test_eta_normalization():
    g = GridSpec(1, 64)
    es = es_at(g, 0.1)
    X = horizontal_lift_tangent(H, LEE, es)
    assert abs(integrate_form(eta_form(WAVE), es, [X]) - 1) <= 1e-12


def test_horizontal_lift_examples():
    g = GridSpec(1, 16)
    zero_h = HamiltonianData(WAVE, "0")
    es = es_at(g, 0.0)
    X = horizontal_lift_tangent(zero_h, LeeForm.zero(WAVE), es)
    assert np.all(X["t"] == 1) and np.all(X["u"] == 0)
    const = EmbeddingState(WAVE, sample_state(g, WAVE, 0.0, {"u": 0.3, "pt": 1.7, "px": 0}))
    X = horizontal_lift_tangent(H, LEE, const)
    assert np.allclose(X["u"], 1.7) and np.allclose(X["pt"], 0.5 * 1.7)
    Xw = horizontal_lift_tangent(H, LEE, es)
    assert np.allclose(Xw["u"], es.state["pt"])  # dH/dpt = pt


def test_precosymplectic_constant_state():
    g = GridSpec(1, 16)
    es = EmbeddingState(WAVE, sample_state(g, WAVE, 0.4, {"u": 0.3, "pt": "exp(0.5*t)", "px": 0}))
    probes = bump_probes(g, vertical_names(WAVE), 5, seed=4)
    r = check_precosymplectic(H, LEE, es, probes)
    assert r.max_norm() < 1e-10


def test_precosymplectic_refinement():
    errs, hs = [], []
    for n in (64, 128, 256):
        g = GridSpec(1, n)
        probes = bump_probes(g, vertical_names(WAVE), 4, seed=1)
        r = check_precosymplectic(H, LEE, es_at(g, 0.3), probes)
        errs.append(max(v for k, v in r.components.items() if k != "eta"))
        hs.append(g.h)
    for o in refinement_orders(hs, errs):
        assert abs(o - 2) < 0.3


def test_infinite_hdw_from_integrator_and_controls():
    g = GridSpec(1, 64)
    init = sample_state(g, WAVE, 0.0, EXACT)
    dt = 1 / 256
    traj = integrate_cauchy(H, LEE, init, (0, 0.25), dt)
    probes = bump_probes(g, vertical_names(WAVE), 4, seed=2)
    good = infinite_hdw_residual(traj[:5], H, LEE, probes).max_norm()
    scaled = [s.copy() for s in traj[:5]]
    for s in scaled:
        s.values["u"] = 1.1 * s.values["u"]
    bad = infinite_hdw_residual(scaled, H, LEE, probes).max_norm()
    assert good < 1e-3 and bad > 1e-2


def test_infinite_hdw_constant_mechanics():
    g = GridSpec(1, 8)
    states = [sample_state(g, WAVE, k * 1e-3, {"u": "2*(exp(0.5*t) - 1)", "pt": "exp(0.5*t)", "px": 0})
              for k in range(5)]
    probes = bump_probes(g, vertical_names(WAVE), 3, seed=0)
    assert infinite_hdw_residual(states, H, LEE, probes).max_norm() < 1e-6
    with pytest.raises(ValueError):
        infinite_hdw_residual(states[:2], H, LEE, probes)


def _hj_states(g, times=(0.0, 0.5, 1.0)):
    return [EmbeddingState(WAVE, sample_state(g, WAVE, t, {"u": "2*(exp(0.5*t) - 1)"})) for t in times]


def test_hj_infinite_solution_and_control():
    g = GridSpec(1, 32)
    probes = bump_probes(g, vertical_names(WAVE), 3, seed=5)
    fp = bump_probes(g, ["u"], 3, seed=6)
    ri, rii = hj_infinite_check(GammaSection(WAVE, {(0, 0): "exp(0.5*t)"}), H, LEE, _hj_states(g), probes, fp)
    assert ri.max_norm() < 1e-8 and rii.max_norm() < 1e-8
    H0 = HamiltonianData(WAVE, "0.5*pt^2 - 0.5*px^2")
    ri0, rii0 = hj_infinite_check(GammaSection(WAVE, {}), H0, LeeForm.zero(WAVE), _hj_states(g), probes, fp)
    assert ri0.max_norm() == 0 and rii0.max_norm() == 0
    pert = GammaSection(WAVE, {(0, 0): "exp(0.5*t) + 0.1*u"})
    _, bad = hj_infinite_check(pert, H, LEE, _hj_states(g), probes, fp)
    assert bad.max_norm() > 1e-3
    assert bad.meta["identity_mismatch"] < 1e-9


def test_bump_probes_reproducible():
    g = GridSpec(2, 8)
    a = bump_probes(g, ["u"], 2, seed=9)
    b = bump_probes(g, ["u"], 2, seed=9)
    assert all(np.array_equal(x["u"], y["u"]) for x, y in zip(a, b))


def test_two_dimensional_slice_quadrature():
    ch = ChartSpec(3, 1, base=("t", "x", "y"))
    g = GridSpec(2, 16)
    es = EmbeddingState(ch, sample_state(g, ch, 0.0, {"u": "sin(2*pi*x)*cos(2*pi*y)"}))
    co = ch.with_kind("J1*").coords
    # integral of du ^ dy over the slice picks d_x u, which averages to zero
    alpha = DifferentialForm.from_basis(co, {("u", "y"): 1})
    assert abs(integrate_form(alpha, es, [])) < 1e-12
    vol = DifferentialForm.from_basis(co, {("x", "y"): 1})
    assert abs(integrate_form(vol, es, []) - 1) < 1e-12
