"""Grid-refinement study for the Cauchy checks on the damped wave.

    python scripts/refinement_study.py --levels 4 --out results/refinement.csv
"""

import argparse
import csv
import math
from dataclasses import dataclass

from lcms.bundle import HamiltonianData, LeeForm
from lcms.cauchy import (EmbeddingState, bump_probes, check_precosymplectic, infinite_hdw_residual,
                         refinement_orders, vertical_names)
from lcms.dynamics import sample_state
from lcms.forms import ChartSpec
from lcms.grid import GridSpec


@dataclass
class StudyConfig:
    nodes: int = 32
    levels: int = 4
    probes: int = 4
    seed: int = 3
    t_eval: float = 0.3
    theta_t: float = 0.5
    out: str = "refinement.csv"


def wave_solution(theta_t: float, k: float = 2 * math.pi) -> dict:
    # exp(a t) sin(k x - w t) solves u_tt = u_xx + theta_t u_t when a = theta_t / 2
    a = theta_t / 2
    w = math.sqrt(k * k - a * a)
    ph = f"({k!r}*x - {w!r}*t)"
    return {
        "u": f"exp({a!r}*t)*sin{ph}",
        "pt": f"{a!r}*exp({a!r}*t)*sin{ph} - {w!r}*exp({a!r}*t)*cos{ph}",
        "px": f"-{k!r}*exp({a!r}*t)*cos{ph}",
    }


def run(cfg: StudyConfig) -> list:
    ch = ChartSpec(2, 1, base=("t", "x"), metric=((1, 0), (0, -1)))
    H = HamiltonianData(ch, "0.5*pt^2 - 0.5*px^2")
    lee = LeeForm.on(ch, cfg.theta_t, 0)
    sol = wave_solution(cfg.theta_t)
    rows = []
    for lv in range(cfg.levels):
        g = GridSpec(1, cfg.nodes * 2 ** lv)
        probes = bump_probes(g, vertical_names(ch), cfg.probes, seed=cfg.seed)
        es = EmbeddingState(ch, sample_state(g, ch, cfg.t_eval, sol))
        r = check_precosymplectic(H, lee, es, probes)
        pre = max(v for k, v in r.components.items() if k != "eta")
        traj = [sample_state(g, ch, cfg.t_eval + j * g.h / 2, sol) for j in (-1, 0, 1)]
        field_eq = infinite_hdw_residual(traj, H, lee, probes, interior_only=True).max_norm()
        rows.append((g.h, pre, field_eq))
    return rows


def main():
    ap = argparse.ArgumentParser()
    for name, val in vars(StudyConfig()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(val), default=val)
    cfg = StudyConfig(**vars(ap.parse_args()))
    rows = run(cfg)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dx", "precosymplectic_residual", "field_eq_residual"])
        w.writerows(rows)
    hs = [r[0] for r in rows]
    for col, label in ((1, "precosymplectic"), (2, "field_eq")):
        orders = refinement_orders(hs, [r[col] for r in rows])
        print(f"{label:7s} orders: " + ", ".join(f"{o:.3f}" for o in orders))


if __name__ == "__main__":
    main()
