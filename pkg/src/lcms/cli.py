"""Scenario runner.

Usage::

    lcms run configs/mechanics.ini --out results/ --seed 7 --refine 3

Exit codes: 0 pass, 1 check failure, 2 config error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, hj
from .bundle import HamiltonianData, LeeForm
from .cauchy import (EmbeddingState, bump_probes, check_precosymplectic, hj_infinite_check,
                     infinite_hdw_residual, refinement_orders, vertical_names)
from .dynamics import NumericAbort, sample_state
from .forms import ChartSpec, FormError
from .grid import GridSpec
from .identities import run_suite
from .symexpr import ExprError, parse

KINDS = ("mechanics", "scalar-field", "hj-verify", "cauchy", "identity-suite")


class ConfigError(Exception):
    pass


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""


@dataclass
class RunReport:
    scenario: str
    kind: str
    checks: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str = ""
    status: int = 0

    def add(self, name, value, tol, passed=None, note=""):
        value = float(value)
        if passed is None:
            passed = value <= tol
        self.checks.append(Check(name, value, float(tol), bool(passed), note))

    @property
    def passed(self) -> bool:
        return not self.error and bool(self.checks) and all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [f"scenario: {self.scenario}", f"kind: {self.kind}"]
        for c in self.checks:
            extra = f"  ({c.note})" if c.note else ""
            lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: value={c.value:.10g} tol={c.tol:.3g}{extra}")
        if self.error:
            lines.append(f"error: {self.error}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        lines.append(f"wall_time_s: {self.wall_time:.3f}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# config


@dataclass
class ScenarioConfig:
    name: str
    kind: str
    chart: ChartSpec
    H: HamiltonianData | None
    theta: LeeForm
    sections: dict
    seed: int = 0
    tolerance_scale: float = 1.0

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def get(self, sec: str, key: str, default=None, cast=str):
        raw = self.section(sec).get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"[{sec}] missing required key {key!r}")
            return default
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key}: {exc}") from None

    def expr(self, sec: str, key: str, default=None):
        raw = self.section(sec).get(key, default)
        if raw is None:
            raise ConfigError(f"[{sec}] missing required key {key!r}")
        return _parse(raw, f"[{sec}] {key}")

    def tol(self, key: str, default: float) -> float:
        return self.get("tolerances", key, default, float) * self.tolerance_scale


def _parse(text, where: str):
    try:
        return parse(str(text))
    except ExprError as exc:
        raise ConfigError(f"{where}: cannot parse {text!r}: {exc}") from None


def _names(raw: str | None):
    if raw is None:
        return None
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def load_config(path) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not read:
        raise ConfigError(f"cannot read config {path}")
    secs = {s: dict(cp[s]) for s in cp.sections()}
    sc = secs.get("scenario", {})
    kind = sc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"[scenario] kind must be one of {KINDS}, got {kind!r}")
    name = sc.get("name", Path(path).stem)
    seed = int(sc.get("seed", 0))
    chs = secs.get("chart", {})
    try:
        m = int(chs.get("m", 1))
        N = int(chs.get("N", 1))
        metric = None
        if "metric" in chs:
            metric = tuple(tuple(_parse(v, "[chart] metric") for v in row.split(","))
                           for row in chs["metric"].split(";"))
        volume = _parse(chs["volume"], "[chart] volume") if "volume" in chs else None
        chart = ChartSpec(m, N, "J1*", _names(chs.get("base")), _names(chs.get("fields")), metric, volume)
    except (ValueError, FormError) as exc:
        raise ConfigError(f"[chart] {exc}") from None
    H = None
    if "hamiltonian" in secs:
        try:
            H = HamiltonianData(chart, _parse(secs["hamiltonian"].get("H", ""), "[hamiltonian] H"))
        except FormError as exc:
            raise ConfigError(f"[hamiltonian] {exc}") from None
    elif kind != "identity-suite":
        raise ConfigError("missing [hamiltonian] section")
    lee = secs.get("lee-form", {})
    comps = tuple(_parse(lee.get(b, "0"), f"[lee-form] {b}") for b in chart.base)
    theta = LeeForm(chart.base, comps)
    try:
        theta.validate()
    except FormError as exc:
        raise ConfigError(f"[lee-form] {exc}") from None
    return ScenarioConfig(name, kind, chart, H, theta, secs, seed)


# ---------------------------------------------------------------------------
# scenario kinds


def _constant(e) -> float | None:
    c = e.poly().constant_value()
    return None if c is None else float(c)


def _run_mechanics(cfg: ScenarioConfig, rep: RunReport, out: Path):
    ch, H = cfg.chart, cfg.H
    T = cfg.get("run", "T", 1.0, float)
    dt = cfg.get("run", "dt", 1e-3, float)
    s0 = [float(v) for v in cfg.get("run", "sigma0", "0").split(",")]
    p0 = [float(v) for v in cfg.get("run", "p0", "1").split(",")]
    tr = dynamics.integrate_mechanics(H, cfg.theta, (s0, p0), (0.0, T), dt)
    tr.to_csv(out / f"{cfg.name}_trajectory.csv")
    tol = cfg.tol("closed_form", 1e-8)
    checks = cfg.section("checks")
    exp_s, exp_p = checks.get("expect_sigma"), checks.get("expect_p")
    th = _constant(cfg.theta[0])
    quadratic = ch.N == 1 and (H.H - parse(f"0.5*{ch.momentum(0, 0)}^2")).is_zero()
    if exp_s is None and quadratic and th is not None:
        exp_s, exp_p = dynamics.mechanics_closed_form(th, s0[0], p0[0], T)
    s_T, p_T = float(tr.sigma[-1, 0]), float(tr.p[-1, 0])
    if exp_s is None or exp_p is None:
        ok = bool(np.all(np.isfinite(tr.sigma)) and np.all(np.isfinite(tr.p)))
        rep.add("finite_trajectory", 0.0 if ok else 1.0, 0.0,
                note=f"sigma(T)={s_T:.10f} p(T)={p_T:.10f}")
        return
    rep.add("sigma(T)", abs(s_T - float(exp_s)), tol, note=f"sigma(T)={s_T:.10f} expected {float(exp_s):.10f}")
    rep.add("p(T)", abs(p_T - float(exp_p)), tol, note=f"p(T)={p_T:.10f} expected {float(exp_p):.10f}")


def _run_scalar_field(cfg: ScenarioConfig, rep: RunReport, out: Path):
    ch, H = cfg.chart, cfg.H
    expect_zero = cfg.get("checks", "expect", "zero") == "zero"
    secn = cfg.section("section")
    if secn:
        sigma = [cfg.expr("section", f) for f in ch.fields]
        moms = {(i, a): cfg.expr("section", ch.momentum(i, a), "0") for i in range(ch.m) for a in range(ch.N)}
        phi = dynamics.field_section(ch, sigma, moms)
        res = dynamics.lchdw_residual(phi, H, cfg.theta)
        norm = res.max_norm(seed=cfg.seed)
        zero = res.is_zero()
        rep.add("lchdw_residual", norm, 0.0, zero == expect_zero,
                note="symbolic zero" if zero else "nonzero: " + ", ".join(res.nonzero()))
    rh = cfg.section("reduced-hj")
    if rh:
        S = [cfg.expr("reduced-hj", f"S_{b}") for b in ch.base]
        f = cfg.expr("reduced-hj", "f") if "f" in rh else None
        res = hj.reduced_hj_residual(S, H, f)
        rep.add("reduced_hj_residual", res.max_norm(seed=cfg.seed), 0.0, res.is_zero(),
                note=f"f={res.meta['f']}" + (" (inferred)" if res.meta["f_inferred"] else ""))
    if not secn and not rh:
        raise ConfigError("scalar-field scenario needs [section] or [reduced-hj]")


def _gamma(cfg: ScenarioConfig) -> hj.GammaSection:
    ch = cfg.chart
    g = {(i, a): cfg.expr("gamma", ch.momentum(i, a), "0") for i in range(ch.m) for a in range(ch.N)}
    rho = cfg.expr("gamma", "rho") if "rho" in cfg.section("gamma") else None
    return hj.GammaSection(ch, g, rho)


def _run_hj(cfg: ScenarioConfig, rep: RunReport, out: Path):
    g = _gamma(cfg)
    T = cfg.get("run", "T", 1.0, float)
    dt = cfg.get("run", "dt", 1e-3, float)
    s0 = [float(v) for v in cfg.get("run", "sigma0", "0").split(",")]
    r = hj.roundtrip_verify(g, cfg.H, cfg.theta, s0, (0.0, T), dt,
                            hj_tol=cfg.tol("hj", 1e-10), roundtrip_tol=cfg.tol("roundtrip", 1e-6))
    rep.add("hj_residual", r.hj_norm, r.hj_tol)
    rep.add("roundtrip_residual", r.roundtrip_norm, r.roundtrip_tol)
    rep.add("equivalence", 0.0 if r.consistent else 1.0, 0.0)
    if r.closed is not None:
        rep.add("closed", r.closed.max_norm(), 0.0, r.closed.is_zero())
    with open(out / f"{cfg.name}_hj.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "hj_residual", "roundtrip_residual", "hj_pass", "roundtrip_pass", "consistent"])
        w.writerow([cfg.name] + r.csv_row())
    t, sig = r.trajectory
    with open(out / f"{cfg.name}_trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"sigma_{f}" for f in cfg.chart.fields])
        for k in range(len(t)):
            w.writerow([repr(float(t[k]))] + [repr(float(v)) for v in sig[k]])


def _solution_exprs(cfg: ScenarioConfig) -> dict:
    ch = cfg.chart
    names = list(ch.fields) + list(ch.momenta)
    return {n: cfg.expr("solution", n) for n in names}


def _run_cauchy(cfg: ScenarioConfig, rep: RunReport, out: Path, refine: int):
    ch, H = cfg.chart, cfg.H
    nodes = cfg.get("grid", "nodes", 64, int)
    levels = max(refine, cfg.get("grid", "levels", 3, int))
    t_eval = cfg.get("run", "t_eval", 0.3, float)
    nprobe = cfg.get("grid", "probes", 4, int)
    sol = _solution_exprs(cfg)
    hs, pre, field_eq = [], [], []
    eta = 0.0
    t_start = time.perf_counter()
    for lv in range(levels):
        g = GridSpec(ch.m - 1, nodes * 2 ** lv)
        probes = bump_probes(g, vertical_names(ch), nprobe, seed=cfg.seed)
        es = EmbeddingState(ch, sample_state(g, ch, t_eval, sol))
        r = check_precosymplectic(H, cfg.theta, es, probes)
        eta = max(eta, r["eta"])
        pre.append(max(v for k, v in r.components.items() if k != "eta"))
        dt = g.h / 2
        traj = [sample_state(g, ch, t_eval + j * dt, sol) for j in (-1, 0, 1)]
        field_eq.append(infinite_hdw_residual(traj, H, cfg.theta, probes, interior_only=True).max_norm())
        hs.append(g.h)
    ladder_time = time.perf_counter() - t_start
    with open(out / f"{cfg.name}_refinement.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dx", "precosymplectic_residual", "field_eq_residual"])
        for row in zip(hs, pre, field_eq):
            w.writerow([repr(float(v)) for v in row])
    rep.add("eta_normalization", eta, cfg.tol("eta", 1e-12))
    target, band = 2.0, cfg.get("tolerances", "order_band", 0.3, float)
    for label, errs in (("precosymplectic", pre), ("field_eq", field_eq)):
        orders = refinement_orders(hs, errs)
        worst = max(abs(o - target) for o in orders) if orders else math.inf
        rep.add(f"{label}_order", worst, band, note="orders " + ", ".join(f"{o:.3f}" for o in orders))
    rep.add("ladder_time_s", ladder_time, cfg.tol("ladder_time", 60.0))
    if cfg.section("run").get("evolve", "false").lower() == "true":
        g = GridSpec(ch.m - 1, nodes)
        T = cfg.get("run", "T", 0.5, float)
        dt = cfg.get("run", "dt", 0.25 / nodes, float)
        init = sample_state(g, ch, 0.0, sol)
        states = dynamics.integrate_cauchy(H, cfg.theta, init, (0.0, T), dt,
                                           dump_every=max(1, int(round(0.1 / dt))))
        exact = sample_state(g, ch, states[-1].t, sol)
        err = max(float(np.max(np.abs(states[-1][f] - exact[f]))) for f in ch.fields)
        dynamics.fields_to_csv(states, ch, out / f"{cfg.name}_fields.csv")
        rep.add("evolution_error", err, cfg.tol("evolution", 5e-2))
    if "gamma" in cfg.sections:
        g = _gamma(cfg)
        grid = GridSpec(ch.m - 1, nodes)
        traj = {f: cfg.expr("hj-states", f) for f in ch.fields}
        times = [float(v) for v in cfg.get("hj-states", "times", "0,0.5,1").split(",")]
        states = [EmbeddingState(ch, sample_state(grid, ch, t, traj)) for t in times]
        probes = bump_probes(grid, vertical_names(ch), nprobe, seed=cfg.seed)
        fprobes = bump_probes(grid, list(ch.fields), 3, seed=cfg.seed + 1)
        ri, rii = hj_infinite_check(g, H, cfg.theta, states, probes, fprobes)
        rep.add("hj_field_pullback", ri.max_norm(), cfg.tol("hj_field", 1e-8))
        rep.add("hj_field_contraction", rii.max_norm(), cfg.tol("hj_field", 1e-8))


def _run_identity(cfg: ScenarioConfig, rep: RunReport, out: Path):
    n = cfg.get("run", "instances", 50, int)
    for r in run_suite(n, cfg.seed):
        rep.add(r.name, r.failures, 0, note=f"{r.instances} instances")


def run_scenario(cfg: ScenarioConfig, out_dir, refine: int = 0) -> RunReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = RunReport(cfg.name, cfg.kind)
    t0 = time.perf_counter()
    try:
        if cfg.kind == "mechanics":
            _run_mechanics(cfg, rep, out)
        elif cfg.kind == "scalar-field":
            _run_scalar_field(cfg, rep, out)
        elif cfg.kind == "hj-verify":
            _run_hj(cfg, rep, out)
        elif cfg.kind == "cauchy":
            _run_cauchy(cfg, rep, out, refine)
        else:
            _run_identity(cfg, rep, out)
        rep.status = 0 if rep.passed else 1
    except ConfigError as exc:
        rep.error, rep.status = f"config error: {exc}", 2
    except (ExprError, FormError, KeyError, ValueError) as exc:
        rep.error, rep.status = f"validation error: {exc}", 2
    except NumericAbort as exc:
        rep.error, rep.status = f"numeric abort: {exc}", 3
    rep.wall_time = time.perf_counter() - t0
    (out / f"{cfg.name}_report.txt").write_text(rep.to_text() + "\n")
    return rep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lcms", description="Run l.c.m-s. field theory scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario config")
    run.add_argument("config")
    run.add_argument("--out", default="results")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--tolerance-scale", type=float, default=1.0)
    run.add_argument("--refine", type=int, default=0, help="levels of the grid-refinement ladder")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.tolerance_scale = args.tolerance_scale
    rep = run_scenario(cfg, args.out, args.refine)
    print(rep.to_text())
    return rep.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
