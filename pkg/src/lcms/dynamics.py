"""Conformal HDW residuals and integrators.

Mechanics (m = 1) is integrated with classical RK4.  Field theories with
one time and ``n`` spatial directions are integrated by the method of lines
on a periodic grid: ``sigma`` and ``p^t`` are evolved, the spatial momenta
are recovered from the constraint ``dH/dp^i = d_i sigma`` at every stage.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bundle import HamiltonianData, LeeForm
from .forms import ChartSpec, SectionMap
from .grid import FieldState, GridSpec
from .symexpr import Expr, Poly, as_expr, from_poly


class NumericAbort(RuntimeError):
    pass


@dataclass
class Residual:
    """Named residual components (``Expr`` or arrays) plus a tolerance."""

    components: dict = field(default_factory=dict)
    tol: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def symbolic(self) -> bool:
        return any(isinstance(v, Expr) for v in self.components.values())

    def is_zero(self) -> bool:
        if self.symbolic:
            return all(v.is_zero() if isinstance(v, Expr) else abs(v) <= self.tol
                       for v in self.components.values())
        return self.max_norm() <= self.tol

    def max_norm(self, samples: int = 8, seed: int = 0) -> float:
        """Max abs value; symbolic parts are sampled at random points in [0.2, 1.2]."""
        worst = 0.0
        rng = np.random.default_rng(seed)
        for v in self.components.values():
            if isinstance(v, Expr):
                if v.is_zero():
                    continue
                names = sorted(v.free_variables())
                for _ in range(samples):
                    pt = {n: float(rng.uniform(0.2, 1.2)) for n in names}
                    worst = max(worst, abs(float(v.eval(pt))))
            else:
                a = np.asarray(v, dtype=float)
                if a.size:
                    worst = max(worst, float(np.max(np.abs(a))))
        return worst

    def __getitem__(self, key):
        return self.components[key]

    def nonzero(self) -> list:
        return [k for k, v in self.components.items()
                if (not v.is_zero() if isinstance(v, Expr) else np.max(np.abs(v)) > self.tol)]


# ---------------------------------------------------------------------------
# sections of J1* over the base


def field_section(chart: ChartSpec, sigma: Sequence, momenta: Mapping) -> SectionMap:
    """Section ``x -> (x, sigma(x), p^i_a(x))`` with ``momenta[(i, a)]``."""
    j = chart.with_kind("J1*")
    images = {f: as_expr(s) for f, s in zip(chart.fields, sigma)}
    for i in range(chart.m):
        for a in range(chart.N):
            images[chart.momentum(i, a)] = as_expr(momenta.get((i, a), 0))
    return SectionMap(chart.base, j.coords, images, base=chart.base)


def _check_section(phi: SectionMap, chart: ChartSpec):
    if tuple(phi.source) != chart.base:
        raise ValueError("section must be parametrized by the base coordinates")
    missing = [c for c in chart.fields + chart.momenta if c not in phi.target]
    if missing:
        raise KeyError(f"section lacks components {missing}")


def lchdw_residual(phi, H: HamiltonianData, theta: LeeForm) -> Residual:
    """Residual of the conformal HDW equations.

    ``phi`` is a symbolic :class:`SectionMap`, a single :class:`FieldState`
    (spatial constraint part only) or a uniform-in-time sequence of states
    (full residual at interior slices by central differences in time).
    """
    if isinstance(phi, SectionMap):
        return _symbolic_residual(phi, H, theta)
    if isinstance(phi, FieldState):
        return _constraint_residual(phi, H)
    return _trajectory_residual(list(phi), H, theta)


def _symbolic_residual(phi, H, theta):
    ch = H.chart
    _check_section(phi, ch)
    sub = phi.image_polys()
    Hp = H.H.poly()
    out = {}
    for a, f in enumerate(ch.fields):
        for i, b in enumerate(ch.base):
            r = sub[f].diff(b) - Hp.diff(ch.momentum(i, a)).subs(sub)
            out[f"r1[{f},{b}]"] = from_poly(r)
        r = Hp.diff(f).subs(sub)
        for i, b in enumerate(ch.base):
            pia = sub[ch.momentum(i, a)]
            r = r + pia.diff(b) - theta[i].poly().subs(sub) * pia
        out[f"r2[{f}]"] = from_poly(r)
    return Residual(out)


def hdw_residual(phi, H: HamiltonianData) -> Residual:
    """Residual of the (non-conformal) HDW equations, coded independently."""
    ch = H.chart
    if not isinstance(phi, SectionMap):
        zero = LeeForm.zero(ch)
        return lchdw_residual(phi, H, zero)
    _check_section(phi, ch)
    img = phi.images
    out = {}
    for a, f in enumerate(ch.fields):
        for i, b in enumerate(ch.base):
            dH = H.H.diff(ch.momentum(i, a)).subs(img)
            out[f"r1[{f},{b}]"] = from_poly((img[f].diff(b) - dH).poly())
        div = sum((img[ch.momentum(i, a)].diff(b) for i, b in enumerate(ch.base)), as_expr(0))
        out[f"r2[{f}]"] = from_poly((div + H.H.diff(f).subs(img)).poly())
    return Residual(out)


def _spatial_momenta(ch: ChartSpec):
    return [(i, a, ch.momentum(i, a)) for i in range(1, ch.m) for a in range(ch.N)]


def _constraint_residual(state: FieldState, H: HamiltonianData, tol: float = 0.0) -> Residual:
    ch = H.chart
    g = state.grid
    pt = state.point(ch.base)
    Hp = H.H.poly()
    out = {}
    for i, a, name in _spatial_momenta(ch):
        f = ch.fields[a]
        out[f"r1[{f},{ch.base[i]}]"] = g.diff(state[f], i - 1) - _ev(Hp.diff(name), pt, g)
    return Residual(out, tol)


def _trajectory_residual(states, H, theta, tol: float = 0.0) -> Residual:
    if len(states) < 3:
        raise ValueError("need at least three time samples")
    ch = H.chart
    dt = states[1].t - states[0].t
    Hp = H.H.poly()
    comps: dict = {}
    for k in range(1, len(states) - 1):
        s, prev, nxt = states[k], states[k - 1], states[k + 1]
        g = s.grid
        pt = s.point(ch.base)
        for a, f in enumerate(ch.fields):
            rows = {}
            rows[f"r1[{f},{ch.base[0]}]"] = (nxt[f] - prev[f]) / (2 * dt) - _ev(Hp.diff(ch.momentum(0, a)), pt, g)
            for i in range(1, ch.m):
                rows[f"r1[{f},{ch.base[i]}]"] = g.diff(s[f], i - 1) - _ev(Hp.diff(ch.momentum(i, a)), pt, g)
            pt_name = ch.momentum(0, a)
            r2 = (nxt[pt_name] - prev[pt_name]) / (2 * dt) + _ev(Hp.diff(f), pt, g)
            for i in range(1, ch.m):
                r2 = r2 + g.diff(s[ch.momentum(i, a)], i - 1)
            for i in range(ch.m):
                r2 = r2 - _ev(theta[i].poly(), pt, g) * s[ch.momentum(i, a)]
            rows[f"r2[{f}]"] = r2
            for key, val in rows.items():
                comps.setdefault(key, []).append(val)
    return Residual({k: np.stack(v) for k, v in comps.items()}, tol)


def _ev(p: Poly, point, grid: GridSpec):
    return np.broadcast_to(np.asarray(p.eval(point), dtype=float), grid.shape)


# ---------------------------------------------------------------------------
# mechanics


@dataclass
class MechTrajectory:
    t: np.ndarray
    sigma: np.ndarray  # (K, N)
    p: np.ndarray  # (K, N)
    fields: tuple = ("u",)

    def __post_init__(self):
        steps = np.diff(self.t)
        if np.any(steps <= 0):
            raise ValueError("time samples must increase")
        if steps.size and np.max(np.abs(steps - steps[0])) > 1e-12:
            raise ValueError("time samples must be uniform")

    def columns(self) -> list:
        if len(self.fields) == 1:
            return ["t", "sigma", "p"]
        return ["t"] + [f"sigma_{f}" for f in self.fields] + [f"p_{f}" for f in self.fields]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for k in range(len(self.t)):
                w.writerow([repr(float(self.t[k]))] + [repr(float(v)) for v in self.sigma[k]]
                           + [repr(float(v)) for v in self.p[k]])


def _rk4(rhs, y0: np.ndarray, t0: float, dt: float, steps: int, guard=None):
    ys = [y0]
    y = y0
    t = t0
    for k in range(steps):
        try:
            k1 = rhs(t, y)
            k2 = rhs(t + dt / 2, y + dt / 2 * k1)
            k3 = rhs(t + dt / 2, y + dt / 2 * k2)
            k4 = rhs(t + dt, y + dt * k3)
        except (OverflowError, FloatingPointError) as exc:
            raise NumericAbort(f"overflow near t={t:.6g}") from exc
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (k + 1) * dt
        if guard is not None:
            guard(t, y)
        ys.append(y)
    return ys


def _step_count(t_span, dt) -> int:
    t0, t1 = map(float, t_span)
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(round((t1 - t0) / dt))
    if steps < 1 or abs(steps * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError("t_span must be an integer multiple of dt")
    return steps


def integrate_mechanics(H: HamiltonianData, theta: LeeForm, init, t_span, dt: float) -> MechTrajectory:
    """RK4 on ``u' = dH/dp``, ``p' = -dH/du + theta_t p``."""
    ch = H.chart
    if ch.m != 1:
        raise ValueError("mechanics needs m = 1")
    N = ch.N
    sigma0, p0 = init
    y0 = np.concatenate([np.atleast_1d(np.asarray(sigma0, float)), np.atleast_1d(np.asarray(p0, float))])
    if y0.shape != (2 * N,):
        raise ValueError("initial data must have N components each")
    Hp = H.H.poly()
    tname = ch.base[0]
    names = list(ch.fields) + [ch.momentum(0, a) for a in range(N)]
    du = [Hp.diff(ch.momentum(0, a)) for a in range(N)]
    dp = [-Hp.diff(f) for f in ch.fields]
    th = theta[0].poly()

    def rhs(t, y):
        pt = dict(zip(names, y))
        pt[tname] = t
        thv = th.eval(pt)
        out = np.empty(2 * N)
        for a in range(N):
            out[a] = du[a].eval(pt)
            out[N + a] = dp[a].eval(pt) + thv * y[N + a]
        return out

    def guard(t, y):
        if not np.all(np.isfinite(y)):
            raise NumericAbort(f"non-finite state at t={t}")

    steps = _step_count(t_span, dt)
    ys = np.array(_rk4(rhs, y0, float(t_span[0]), dt, steps, guard))
    t = float(t_span[0]) + dt * np.arange(steps + 1)
    return MechTrajectory(t, ys[:, :N], ys[:, N:], ch.fields)


def mechanics_closed_form(vartheta: float, sigma0: float, p0: float, T: float) -> tuple:
    """``(sigma(T), p(T))`` for ``H = p^2/2`` and constant ``theta_t``."""
    if abs(vartheta) < 1e-8:
        # (e^{aT} - 1)/a as a series
        g = T * (1 + vartheta * T / 2 + (vartheta * T) ** 2 / 6)
    else:
        g = math.expm1(vartheta * T) / vartheta
    return sigma0 + p0 * g, p0 * math.exp(vartheta * T)


# ---------------------------------------------------------------------------
# field theory on a periodic Cauchy grid


class _MomentumSolver:
    """Recover spatial momenta from ``dH/dp^i_a = d_i sigma^a`` by Newton."""

    def __init__(self, H: HamiltonianData):
        ch = H.chart
        self.ch = ch
        Hp = H.H.poly()
        self.unknowns = [name for _, _, name in _spatial_momenta(ch)]
        self.targets = [(i, a) for i, a, _ in _spatial_momenta(ch)]
        self.F = [Hp.diff(n) for n in self.unknowns]
        self.J = [[f.diff(n) for n in self.unknowns] for f in self.F]

    def solve(self, state: FieldState, point: dict, guess: dict) -> dict:
        g = state.grid
        K = len(self.unknowns)
        if K == 0:
            return {}
        rhs = np.stack([g.diff(state[self.ch.fields[a]], i - 1) for i, a in self.targets], -1)
        p = {n: np.array(guess.get(n, np.zeros(g.shape)), dtype=float) for n in self.unknowns}
        for _ in range(30):
            pt = dict(point)
            pt.update(p)
            F = np.stack([_ev(f, pt, g) for f in self.F], -1) - rhs
            J = np.empty(g.shape + (K, K))
            for r in range(K):
                for c in range(K):
                    J[..., r, c] = _ev(self.J[r][c], pt, g)
            try:
                step = np.linalg.solve(J, F[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise NumericAbort("spatial momenta are not determined by the constraint") from exc
            for k, n in enumerate(self.unknowns):
                p[n] = p[n] - step[..., k]
            if np.max(np.abs(step)) <= 1e-14 * (1 + max(np.max(np.abs(v)) for v in p.values())):
                break
        return p


def integrate_cauchy(H: HamiltonianData, theta: LeeForm, init: FieldState, t_span, dt: float,
                     *, dump_every: int = 1, blowup: float = 1e6) -> list:
    """Method of lines with RK4 in time and periodic central differences in space.

    Base coordinate 0 is time; the rest are grid directions.
    """
    ch = H.chart
    g = init.grid
    if ch.m != g.n + 1:
        raise ValueError("chart must have one time plus grid.n spatial base coordinates")
    Hp = H.H.poly()
    N = ch.N
    evolved = list(ch.fields) + [ch.momentum(0, a) for a in range(N)]
    for name in evolved:
        if name not in init.values:
            raise KeyError(f"initial state lacks {name!r}")
    solver = _MomentumSolver(H)
    dsig = [Hp.diff(ch.momentum(0, a)) for a in range(N)]
    dHu = [Hp.diff(f) for f in ch.fields]
    ths = [theta[i].poly() for i in range(ch.m)]
    guess = {n: init.values.get(n, np.zeros(g.shape)) for n in solver.unknowns}

    def full_state(t, y) -> FieldState:
        vals = {n: y[k] for k, n in enumerate(evolved)}
        st = FieldState(g, t, vals)
        mom = solver.solve(st, st.point(ch.base), guess)
        guess.update(mom)
        st.values.update(mom)
        return st

    def rhs(t, y):
        st = full_state(t, y)
        pt = st.point(ch.base)
        out = np.empty_like(y)
        for a in range(N):
            out[a] = _ev(dsig[a], pt, g)
            acc = -_ev(dHu[a], pt, g)
            for i in range(ch.m):
                acc = acc + _ev(ths[i], pt, g) * st[ch.momentum(i, a)]
            for i in range(1, ch.m):
                acc = acc - g.diff(st[ch.momentum(i, a)], i - 1)
            out[N + a] = acc
        return out

    y0 = np.stack([init[n] for n in evolved])
    scale = max(1.0, float(np.max(np.abs(y0))))

    def guard(t, y):
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > blowup * scale:
            raise NumericAbort(f"blow-up at t={t:.6g} (norm growth above {blowup:g}); "
                               "reduce dt (CFL) or check that the evolution is hyperbolic")

    steps = _step_count(t_span, dt)
    t0 = float(t_span[0])
    ys = _rk4(rhs, y0, t0, dt, steps, guard)
    out = []
    for k in range(0, steps + 1):
        if k % dump_every == 0 or k == steps:
            out.append(full_state(t0 + k * dt, ys[k]))
    return out


def sample_state(grid: GridSpec, chart: ChartSpec, t: float, exprs: Mapping) -> FieldState:
    """Sample symbolic expressions in ``(t, x...)`` at the grid nodes."""
    pt = {chart.base[0]: t}
    for name, ax in zip(chart.base[1:], grid.axes()):
        pt[name] = ax
    vals = {k: _ev(as_expr(v).poly(), pt, grid) for k, v in exprs.items()}
    return FieldState(grid, t, vals)


def fields_to_csv(states: Sequence[FieldState], chart: ChartSpec, path, residuals=None) -> None:
    """One row per (time, node): ``t, i0[, i1...], fields..., momenta..., residual``."""
    names = list(chart.fields) + list(chart.momenta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = states[0].grid.n
        header = ["t"] + [f"i{k}" for k in range(n)] + [f"sigma_{f}" for f in chart.fields] \
            + [m for m in chart.momenta]
        if residuals is not None:
            header.append("residual")
        w.writerow(header)
        for k, s in enumerate(states):
            for idx in np.ndindex(*s.grid.shape):
                row = [repr(float(s.t))] + [str(i) for i in idx]
                row += [repr(float(s.values[nm][idx])) if nm in s.values else "nan" for nm in names]
                if residuals is not None:
                    row.append(repr(float(residuals[k])))
                w.writerow(row)
