import math

import mpmath
import numpy as np
import pytest

from lcms.bundle import HamiltonianData, LeeForm
from lcms.dynamics import (MechTrajectory, NumericAbort, field_section, fields_to_csv,
                           hdw_residual, integrate_cauchy, integrate_mechanics, lchdw_residual,
                           mechanics_closed_form, sample_state)
from lcms.forms import ChartSpec
from lcms.grid import GridSpec
from lcms.symexpr import parse

MECH = ChartSpec(1, 1)
H_MECH = HamiltonianData(MECH, "0.5*pt^2")
EUCL = ChartSpec(2, 1, base=("x", "y"))
H_EUCL = HamiltonianData(EUCL, "0.5*px^2 + 0.5*py^2")
WAVE = ChartSpec(2, 1, base=("t", "x"), metric=((1, 0), (0, -1)))
H_WAVE = HamiltonianData(WAVE, "0.5*pt^2 - 0.5*px^2")


def test_symbolic_residual_free_particle():
    phi = field_section(MECH, ["s0 + p0*t"], {(0, 0): "p0"})
    assert lchdw_residual(phi, H_MECH, LeeForm.zero(MECH)).is_zero()


def test_symbolic_residual_conformal_mechanics():
    phi = field_section(MECH, ["s0 + p0*(exp(0.5*t) - 1)/0.5"], {(0, 0): "p0*exp(0.5*t)"})
    assert lchdw_residual(phi, H_MECH, LeeForm.on(MECH, 0.5)).is_zero()
    assert not lchdw_residual(phi, H_MECH, LeeForm.on(MECH, 0.4)).is_zero()


def test_symbolic_residual_conformal_harmonic():
    phi = field_section(EUCL, ["exp(c*x)"], {(0, 0): "c*exp(c*x)"})
    assert lchdw_residual(phi, H_EUCL, LeeForm.on(EUCL, "c", 0)).is_zero()


def test_hdw_residual_examples():
    harmonic = field_section(EUCL, ["x^2 - y^2"], {(0, 0): "2*x", (1, 0): "-2*y"})
    assert hdw_residual(harmonic, H_EUCL).is_zero()
    bad = field_section(EUCL, ["x^2"], {})
    r = hdw_residual(bad, H_EUCL)
    assert "r1[u,x]" in r.nonzero()


@pytest.mark.parametrize("sec", [
    (["x*y + u0"], {(0, 0): "y", (1, 0): "x"}),
    (["sin(x)*exp(y)"], {(0, 0): "x^2", (1, 0): "3"}),
    (["x^3"], {(0, 0): "exp(x)"}),
])
def test_hdw_matches_conformal_at_zero_theta(sec):
    phi = field_section(EUCL, *sec)
    a = lchdw_residual(phi, H_EUCL, LeeForm.zero(EUCL))
    b = hdw_residual(phi, H_EUCL)
    assert a.components.keys() == b.components.keys()
    for k in a.components:
        assert (a[k] - b[k]).is_zero()


def test_missing_component():
    from lcms.forms import SectionMap
    phi = SectionMap(("t",), ("t", "u"), {"u": "t"})
    with pytest.raises(KeyError):
        lchdw_residual(phi, H_MECH, LeeForm.zero(MECH))


@pytest.mark.parametrize("th,p0,s0", [(0.5, 1.0, 0.0), (0.0, 1.0, 0.3), (-1.0, 2.0, 0.0)])
def test_rk4_matches_closed_form(th, p0, s0):
    tr = integrate_mechanics(H_MECH, LeeForm.on(MECH, th), (s0, p0), (0, 1), 1e-3)
    with mpmath.workdps(40):
        th_m = mpmath.mpf(th)
        p_ex = p0 * mpmath.e ** th_m
        s_ex = s0 + p0 * ((mpmath.e ** th_m - 1) / th_m if th else 1)
    assert abs(tr.p[-1, 0] - float(p_ex)) < 1e-8
    assert abs(tr.sigma[-1, 0] - float(s_ex)) < 1e-8


def test_closed_form_series_branch():
    s, p = mechanics_closed_form(1e-10, 0.0, 1.0, 1.0)
    assert abs(s - 1.0) < 1e-9 and abs(p - 1.0) < 1e-9
    s2, _ = mechanics_closed_form(1e-6, 0.0, 1.0, 1.0)
    assert abs(s2 - math.expm1(1e-6) / 1e-6) < 1e-14


def test_rk4_order():
    lee = LeeForm.on(MECH, 0.5)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        tr = integrate_mechanics(H_MECH, lee, (0.0, 1.0), (0, 1), dt)
        errs.append(abs(tr.p[-1, 0] - math.exp(0.5)))
    for a, b in zip(errs, errs[1:]):
        assert 16 * 0.8 <= a / b <= 16 * 1.2


def test_free_particle_theta_zero():
    tr = integrate_mechanics(H_MECH, LeeForm.zero(MECH), (0.2, 0.7), (0, 1), 1e-3)
    assert abs(tr.sigma[-1, 0] - 0.9) < 1e-10 and abs(tr.p[-1, 0] - 0.7) < 1e-10


def test_conformal_momentum_law_time_dependent_theta():
    tr = integrate_mechanics(H_MECH, LeeForm.on(MECH, "t"), (0.0, 1.0), (0, 1), 1e-3)
    # d ln p/dt = theta_t = t
    assert np.max(np.abs(np.log(tr.p[:, 0]) - tr.t ** 2 / 2)) < 1e-10


def test_trajectory_csv(tmp_path):
    tr = integrate_mechanics(H_MECH, LeeForm.on(MECH, 0.5), (0.0, 1.0), (0, 1), 1e-3)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,sigma,p" and len(lines) == 1002
    with pytest.raises(ValueError):
        MechTrajectory(np.array([0.0, 0.1, 0.3]), np.zeros((3, 1)), np.zeros((3, 1)))


def test_mechanics_abort_on_blowup():
    with pytest.raises(NumericAbort):
        integrate_mechanics(HamiltonianData(MECH, "u^2*pt"), LeeForm.zero(MECH), (1.0, 1.0), (0, 3), 0.1)


def _wave_state(g, t):
    return sample_state(g, WAVE, t, {"u": "sin(2*pi*(x - t))", "pt": "-2*pi*cos(2*pi*(x - t))"})


def test_cauchy_plane_wave_convergence():
    errs = []
    for n in (32, 64):
        g = GridSpec(1, n)
        out = integrate_cauchy(H_WAVE, LeeForm.zero(WAVE), _wave_state(g, 0.0), (0, 0.25), 0.25 / n, dump_every=n)
        errs.append(np.max(np.abs(out[-1]["u"] - _wave_state(g, 0.25)["u"])))
    assert errs[1] < errs[0] / 3.2


def test_cauchy_zero_data():
    g = GridSpec(1, 16)
    init = sample_state(g, WAVE, 0.0, {"u": 0, "pt": 0})
    out = integrate_cauchy(H_WAVE, LeeForm.on(WAVE, 0.5, 0), init, (0, 0.5), 0.01)
    assert all(np.all(s["u"] == 0) for s in out)


def test_cauchy_constant_data_matches_mechanics():
    g = GridSpec(1, 8)
    init = sample_state(g, WAVE, 0.0, {"u": 0.1, "pt": 1.0})
    out = integrate_cauchy(H_WAVE, LeeForm.on(WAVE, 0.5, 0), init, (0, 1), 1e-2, dump_every=100)
    tr = integrate_mechanics(H_MECH, LeeForm.on(MECH, 0.5), (0.1, 1.0), (0, 1), 1e-2)
    assert np.max(np.abs(out[-1]["u"] - tr.sigma[-1, 0])) < 1e-12
    assert np.max(np.abs(out[-1]["pt"] - tr.p[-1, 0])) < 1e-12


def test_cauchy_blowup_guard():
    # Euclidean signature makes the evolution elliptic: expect an abort
    ell = ChartSpec(2, 1, base=("t", "x"))
    H = HamiltonianData(ell, "0.5*pt^2 + 0.5*px^2")
    g = GridSpec(1, 64)
    init = sample_state(g, ell, 0.0, {"u": "0.001*sin(2*pi*x) + 1e-6*sin(62*pi*x)", "pt": 0})
    with pytest.raises(NumericAbort):
        integrate_cauchy(H, LeeForm.zero(ell), init, (0, 5), 0.01)


def test_spatial_order_of_constraint_residual():
    norms = []
    for n in (32, 64, 128):
        g = GridSpec(1, n)
        st = sample_state(g, WAVE, 0.2, {"u": "sin(2*pi*(x - t))", "pt": "-2*pi*cos(2*pi*(x - t))",
                                         "px": "-2*pi*cos(2*pi*(x - t))"})
        norms.append(lchdw_residual(st, H_WAVE, LeeForm.zero(WAVE)).max_norm())
    for a, b in zip(norms, norms[1:]):
        assert 4 * 0.75 <= a / b <= 4 * 1.25


def test_trajectory_residual_small_on_exact_solution():
    g = GridSpec(1, 128)
    ex = {"u": "sin(2*pi*(x - t))", "pt": "-2*pi*cos(2*pi*(x - t))", "px": "-2*pi*cos(2*pi*(x - t))"}
    traj = [sample_state(g, WAVE, 0.1 + k * 1e-3, ex) for k in range(3)]
    r = lchdw_residual(traj, H_WAVE, LeeForm.zero(WAVE))
    assert r.max_norm() < 5e-2  # O(dx^2) from the momentum divergence
    bad = [sample_state(g, WAVE, 0.1 + k * 1e-3, {**ex, "u": "1.1*sin(2*pi*(x - t))"}) for k in range(3)]
    assert lchdw_residual(bad, H_WAVE, LeeForm.zero(WAVE)).max_norm() > 0.5


def test_fields_csv_is_deterministic(tmp_path):
    g = GridSpec(1, 8)
    out = integrate_cauchy(H_WAVE, LeeForm.zero(WAVE), _wave_state(g, 0.0), (0, 0.1), 0.05)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    fields_to_csv(out, WAVE, a)
    fields_to_csv(out, WAVE, b)
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 3 * 8


def test_t_span_must_match_dt():
    with pytest.raises(ValueError):
        integrate_mechanics(H_MECH, LeeForm.zero(MECH), (0, 1), (0, 1), 0.3)
