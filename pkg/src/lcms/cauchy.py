"""Discretized Cauchy-data-space formulation.

Integrated forms are evaluated by contracting per-node tangent vectors,
pulling the remaining ``n``-form back along the embedded slice (spatial
derivatives by periodic central differences) and summing with the
periodic trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bundle import HamiltonianData, LeeForm, omega_h
from .dynamics import Residual, _ev
from .forms import ChartSpec, DegreeError, DifferentialForm
from .grid import FieldState, GridSpec
from .hj import GammaSection
from .symexpr import Poly


@dataclass
class EmbeddingState:
    """A field state read as an embedded slice in the chart's total space."""

    chart: ChartSpec
    state: FieldState

    def __post_init__(self):
        if self.chart.m != self.state.grid.n + 1:
            raise ValueError("chart base must be time plus the grid directions")

    @property
    def grid(self) -> GridSpec:
        return self.state.grid

    def point(self) -> dict:
        return self.state.point(self.chart.base)

    def coordinate_gradient(self, name: str) -> list:
        """``d(name)/dy^l`` along the slice, one array per spatial direction."""
        g = self.grid
        base = self.chart.base
        shape = g.shape
        if name == base[0]:
            return [np.zeros(shape)] * g.n
        if name in base[1:]:
            l = base.index(name) - 1
            return [np.full(shape, 1.0 if k == l else 0.0) for k in range(g.n)]
        if name in self.state.values:
            return [g.diff(self.state[name], k) for k in range(g.n)]
        return [np.zeros(shape)] * g.n


def _numeric_form(alpha: DifferentialForm, point: dict, grid: GridSpec) -> dict:
    return {I: _ev(p, point, grid) for I, p in alpha._terms.items()}


def _contract(terms: dict, coords: tuple, vec: Mapping, grid: GridSpec) -> dict:
    comp = {coords.index(k): np.broadcast_to(np.asarray(v, float), grid.shape)
            for k, v in vec.items() if k in coords}
    out: dict = {}
    for I, c in terms.items():
        for r, i in enumerate(I):
            vi = comp.get(i)
            if vi is None:
                continue
            key = I[:r] + I[r + 1:]
            term = vi * c if r % 2 == 0 else -vi * c
            out[key] = out[key] + term if key in out else term
    return out


def integrand(alpha: DifferentialForm, es: EmbeddingState, tangents: Sequence[Mapping]) -> np.ndarray:
    """Node-wise coefficient of the pulled-back contracted form on ``dy^1...dy^n``."""
    n = es.grid.n
    if alpha.degree != len(tangents) + n:
        raise DegreeError(f"form of degree {alpha.degree} cannot take {len(tangents)} tangents on an {n}-slice")
    co = alpha.coords
    terms = _numeric_form(alpha, es.point(), es.grid)
    for v in tangents:
        terms = _contract(terms, co, v, es.grid)
    total = np.zeros(es.grid.shape)
    grads = {}
    for I, c in terms.items():
        rows = []
        for i in I:
            name = co[i]
            if name not in grads:
                grads[name] = es.coordinate_gradient(name)
            rows.append(grads[name])
        if n == 1:
            jac = rows[0][0]
        else:
            M = np.stack([np.stack(r, -1) for r in rows], -2)
            jac = np.linalg.det(M)
        total = total + c * jac
    return total


def integrate_form(alpha: DifferentialForm, es: EmbeddingState, tangents: Sequence[Mapping]) -> float:
    return es.grid.integrate(integrand(alpha, es, tangents))


def eta_form(chart: ChartSpec) -> DifferentialForm:
    co = chart.coords
    return DifferentialForm(co, chart.m, {tuple(range(chart.m)): chart.volume.poly()})


def horizontal_lift_tangent(H: HamiltonianData, theta: LeeForm, es: EmbeddingState) -> dict:
    """Per-node lift of d/dt.

    The fibre part is ``dH/dp^t_a``; the ``p^t_a`` part is the connection
    trace ``-dH/du^a + theta_i p^i_a`` minus the spatial divergence of the
    state's momenta, which is the choice that keeps the lift compatible
    with the slice.
    """
    ch = H.chart
    g = es.grid
    pt = es.point()
    Hp = H.H.poly()
    vec = {ch.base[0]: np.ones(g.shape)}
    for a, f in enumerate(ch.fields):
        vec[f] = _ev(Hp.diff(ch.momentum(0, a)), pt, g)
        tr = -_ev(Hp.diff(f), pt, g)
        for i in range(ch.m):
            tr = tr + _ev(theta[i].poly(), pt, g) * es.state[ch.momentum(i, a)]
        for i in range(1, ch.m):
            tr = tr - g.diff(es.state[ch.momentum(i, a)], i - 1)
        vec[ch.momentum(0, a)] = tr
    return vec


def bump_probes(grid: GridSpec, names: Sequence[str], count: int, seed: int = 0,
                width: float = 0.15) -> list:
    """Reproducible smooth periodic bump profiles in the given vertical directions."""
    rng = np.random.default_rng(seed)
    axes = grid.axes()
    probes = []
    for _ in range(count):
        vec = {}
        for name in names:
            prof = np.ones(grid.shape)
            for ax in axes:
                c = rng.uniform(0, 1)
                prof = prof * np.exp((np.cos(2 * np.pi * (ax - c)) - 1) / width)
            vec[name] = rng.normal() * prof
        probes.append(vec)
    return probes


def vertical_names(chart: ChartSpec) -> list:
    return list(chart.fields) + list(chart.momenta)


def check_precosymplectic(H: HamiltonianData, theta: LeeForm, es: EmbeddingState,
                          probes: Sequence[Mapping]) -> Residual:
    """``|i_Z i_Xh (Omega_theta)_h|`` per probe and ``|i_Xh eta - 1|``."""
    om = omega_h(H, theta)
    X = horizontal_lift_tangent(H, theta, es)
    out = {"eta": abs(integrate_form(eta_form(H.chart), es, [X]) - 1.0)}
    for k, Z in enumerate(probes):
        out[f"probe[{k}]"] = abs(integrate_form(om, es, [X, Z]))
    return Residual(out)


def _time_derivatives(states: Sequence[FieldState], k: int) -> dict:
    dt = states[1].t - states[0].t
    K = len(states)
    out = {}
    for name in states[k].values:
        if 0 < k < K - 1:
            out[name] = (states[k + 1][name] - states[k - 1][name]) / (2 * dt)
        elif k == 0:
            out[name] = (-3 * states[0][name] + 4 * states[1][name] - states[2][name]) / (2 * dt)
        else:
            out[name] = (3 * states[k][name] - 4 * states[k - 1][name] + states[k - 2][name]) / (2 * dt)
    return out


def infinite_hdw_residual(traj: Sequence, H: HamiltonianData, theta: LeeForm,
                          probes: Sequence[Mapping], *, interior_only: bool = False) -> Residual:
    """Max over probes of ``|i_Z i_phidot (Omega_theta)_h|`` at every sample."""
    states = [s.state if isinstance(s, EmbeddingState) else s for s in traj]
    if len(states) < 3:
        raise ValueError("need at least three time samples")
    ch = H.chart
    om = omega_h(H, theta)
    vals = []
    ks = range(1, len(states) - 1) if interior_only else range(len(states))
    for k in ks:
        es = EmbeddingState(ch, states[k])
        phidot = {ch.base[0]: 1.0, **_time_derivatives(states, k)}
        vals.append(max(abs(integrate_form(om, es, [phidot, Z])) for Z in probes))
    return Residual({"field_eq": np.array(vals)})


# ---------------------------------------------------------------------------
# Hamilton-Jacobi on the Cauchy data space


def lift_state(g: GammaSection, es: EmbeddingState) -> EmbeddingState:
    """``gamma o sigma_Sigma``: fill momenta from the section."""
    ch = g.chart.with_kind("J1*")
    pt = es.point()
    vals = {f: es.state[f] for f in ch.fields}
    for name, p in g.substitution().items():
        vals[name] = _ev(p, pt, es.grid)
    return EmbeddingState(ch, FieldState(es.grid, es.state.t, vals))


def _push_vertical(g: GammaSection, es: EmbeddingState, w: Mapping) -> dict:
    """Push a variation of the fields through ``T gamma``."""
    ch = g.chart
    pt = es.point()
    vec = {f: np.broadcast_to(np.asarray(w.get(f, 0.0), float), es.grid.shape) for f in ch.fields}
    for name, p in g.substitution().items():
        acc = np.zeros(es.grid.shape)
        for f in ch.fields:
            acc = acc + _ev(p.diff(f), pt, es.grid) * vec[f]
        vec[name] = acc
    return vec


def reduced_lift_tangent(g: GammaSection, H: HamiltonianData, es: EmbeddingState) -> dict:
    """``T gamma`` applied to the reduced-connection lift of d/dt."""
    ch = H.chart
    pt = es.point()
    sub = g.substitution()
    Hp = H.H.poly()
    grid = es.grid
    vel = {f: _ev(Hp.diff(ch.momentum(0, a)).subs(sub), pt, grid) for a, f in enumerate(ch.fields)}
    vec = {ch.base[0]: np.ones(grid.shape), **vel}
    for name, p in sub.items():
        acc = _ev(p.diff(ch.base[0]), pt, grid)
        for f in ch.fields:
            acc = acc + _ev(p.diff(f), pt, grid) * vel[f]
        vec[name] = acc
    return vec


def cauchy_identity_integrand(g: GammaSection, H: HamiltonianData, theta: LeeForm,
                              es: EmbeddingState, Z: Mapping) -> np.ndarray:
    """Coordinate expansion of the contraction along the reduced lift.

    ``z_u * (-dH/du + theta.gamma - (d_t + Gamma_0 d_u) gamma^t - div gamma)``
    plus the constraint terms paired with momentum probes.
    """
    ch = H.chart
    grid = es.grid
    lifted = lift_state(g, es)
    pt = lifted.point()
    Hp = H.H.poly()
    X = reduced_lift_tangent(g, H, es)
    total = np.zeros(grid.shape)
    for a, f in enumerate(ch.fields):
        bracket = -_ev(Hp.diff(f), pt, grid)
        for i in range(ch.m):
            bracket = bracket + _ev(theta[i].poly(), pt, grid) * lifted.state[ch.momentum(i, a)]
        bracket = bracket - X[ch.momentum(0, a)]
        for i in range(1, ch.m):
            bracket = bracket - grid.diff(lifted.state[ch.momentum(i, a)], i - 1)
        total = total + np.asarray(Z.get(f, 0.0)) * bracket
        pt_name = ch.momentum(0, a)
        total = total + np.asarray(Z.get(pt_name, 0.0)) * (X[f] - _ev(Hp.diff(pt_name), pt, grid))
        for i in range(1, ch.m):
            name = ch.momentum(i, a)
            total = total + np.asarray(Z.get(name, 0.0)) * (
                grid.diff(es.state[f], i - 1) - _ev(Hp.diff(name), pt, grid))
    return total


def hj_infinite_check(g: GammaSection, H: HamiltonianData, theta: LeeForm, states: Sequence[EmbeddingState],
                      probes: Sequence[Mapping], field_probes: Sequence[Mapping], *,
                      identity_tol: float = 1e-9) -> tuple:
    """Residuals (i) ``gamma~*(Omega~_theta)_h`` and (ii) the contraction along the reduced lift.

    ``states`` carry field values only (points of E~).  Residual (ii) is
    cross-checked node-wise against :func:`cauchy_identity_integrand`.
    """
    om = omega_h(H, theta)
    res_i, res_ii = {}, {}
    mismatch = 0.0
    for s, es in enumerate(states):
        lifted = lift_state(g, es)
        pushed = [_push_vertical(g, es, w) for w in field_probes]
        worst = 0.0
        for a in range(len(pushed)):
            for b in range(a + 1, len(pushed)):
                worst = max(worst, abs(integrate_form(om, lifted, [pushed[a], pushed[b]])))
        res_i[f"i[{s}]"] = worst
        X = reduced_lift_tangent(g, H, es)
        worst = 0.0
        for Z in probes:
            node = integrand(om, lifted, [X, Z])
            ref = cauchy_identity_integrand(g, H, theta, es, Z)
            scale = 1.0 + float(np.max(np.abs(ref)))
            mismatch = max(mismatch, float(np.max(np.abs(node - ref))) / scale)
            worst = max(worst, abs(es.grid.integrate(node)))
        res_ii[f"ii[{s}]"] = worst
    if mismatch > identity_tol:
        from .hj import ConsistencyError
        raise ConsistencyError(f"contraction and coordinate expansion differ by {mismatch:.3e}")
    ri = Residual(res_i, meta={"identity_mismatch": mismatch})
    rii = Residual(res_ii, meta={"identity_mismatch": mismatch})
    return ri, rii


def refinement_orders(hs: Sequence[float], errs: Sequence[float]) -> list:
    """Observed orders ``log(e_k/e_{k+1}) / log(h_k/h_{k+1})``."""
    out = []
    for k in range(len(hs) - 1):
        out.append(float(np.log(errs[k] / errs[k + 1]) / np.log(hs[k] / hs[k + 1])))
    return out
