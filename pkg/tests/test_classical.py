import numpy as np
import pytest

from lcms import classical
from lcms.bundle import (HamiltonianData, LeeForm, canonical_forms, check_connection_condition,
                         connection_from_hamiltonian, lcms_form, omega_h)
from lcms.dynamics import integrate_mechanics
from lcms.forms import ChartSpec
from lcms.symexpr import is_zero

CASES = [
    (ChartSpec(1, 1), "0.5*pt^2 + 0.5*u^2"),
    (ChartSpec(1, 2), "0.5*(pt_u1^2 + pt_u2^2) + u1*u2^2"),
    (ChartSpec(2, 1, base=("x", "y")), "0.5*(px^2 + py^2) + exp(u)"),
    (ChartSpec(2, 2), "px0_u1*px1_u2 + 0.5*u1^2"),
    (ChartSpec(3, 1), "0.5*(px0^2 + px1^2 + px2^2) - sin(u)"),
]


@pytest.mark.parametrize("ch,H", CASES)
def test_omega_h_degenerates(ch, H):
    Hd = HamiltonianData(ch, H)
    assert omega_h(Hd, LeeForm.zero(ch)) == classical.omega_h(Hd)


@pytest.mark.parametrize("ch,_", CASES)
def test_lcms_form_degenerates(ch, _):
    L = ch.with_kind("L2")
    assert lcms_form(L, LeeForm.zero(L)) == classical.multimomentum_omega(L)
    assert canonical_forms(L)[1] == classical.multimomentum_omega(L)


@pytest.mark.parametrize("ch,H", CASES)
def test_connection_degenerates(ch, H):
    Hd = HamiltonianData(ch, H)
    c = connection_from_hamiltonian(Hd, LeeForm.zero(ch))
    ref = classical.connection(Hd)
    for k in set(c.gamma_u) | set(ref.gamma_u):
        assert is_zero(c.christoffel_u(*k) - ref.christoffel_u(*k))
    for k in set(c.gamma_p) | set(ref.gamma_p):
        assert is_zero(c.christoffel_p(*k) - ref.christoffel_p(*k))
    assert classical.connection_residual(ref, Hd).is_zero()
    assert check_connection_condition(c, Hd, LeeForm.zero(ch)).is_zero()


@pytest.mark.parametrize("H,init", [("0.5*pt^2", (0.2, 0.7)), ("0.5*pt^2 + 0.5*u^2", (1.0, 0.0)),
                                    ("0.5*pt^2 + u^4/4", (0.5, 1.0))])
def test_flow_degenerates(H, init):
    ch = ChartSpec(1, 1)
    Hd = HamiltonianData(ch, H)
    tr = integrate_mechanics(Hd, LeeForm.zero(ch), init, (0, 1), 1e-3)
    u, p = classical.hamilton_flow(Hd, init, 1.0, 1e-3)
    assert abs(tr.sigma[-1, 0] - u[0]) < 1e-10 and abs(tr.p[-1, 0] - p[0]) < 1e-10


def test_harmonic_oscillator_energy():
    Hd = HamiltonianData(ChartSpec(1, 1), "0.5*pt^2 + 0.5*u^2")
    u, p = classical.hamilton_flow(Hd, (1.0, 0.0), 2 * np.pi, 2 * np.pi / 1000)
    assert abs(u[0] - 1) < 1e-9 and abs(p[0]) < 1e-9
