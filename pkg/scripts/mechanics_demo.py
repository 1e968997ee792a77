"""Conformal mechanics sweep: RK4 error and observed order versus the Lee-form rate.

    python scripts/mechanics_demo.py --rates -1 0 0.5 1
"""

import argparse
import math
from dataclasses import dataclass, field

from lcms.bundle import HamiltonianData, LeeForm
from lcms.dynamics import integrate_mechanics, mechanics_closed_form
from lcms.forms import ChartSpec


@dataclass
class DemoConfig:
    rates: list = field(default_factory=lambda: [-1.0, 0.0, 0.5])
    sigma0: float = 0.0
    p0: float = 1.0
    steps: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])


def sweep(cfg: DemoConfig):
    ch = ChartSpec(1, 1)
    H = HamiltonianData(ch, "0.5*pt^2")
    for th in cfg.rates:
        s_ex, p_ex = mechanics_closed_form(th, cfg.sigma0, cfg.p0, 1.0)
        errs = []
        for dt in cfg.steps:
            tr = integrate_mechanics(H, LeeForm.on(ch, th), (cfg.sigma0, cfg.p0), (0, 1), dt)
            errs.append(max(abs(tr.sigma[-1, 0] - s_ex), abs(tr.p[-1, 0] - p_ex)))
        orders = [math.log2(a / b) if b > 0 else float("nan") for a, b in zip(errs, errs[1:])]
        yield th, s_ex, p_ex, errs, orders


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rates", type=float, nargs="+", default=DemoConfig().rates)
    ap.add_argument("--sigma0", type=float, default=0.0)
    ap.add_argument("--p0", type=float, default=1.0)
    cfg = DemoConfig(**vars(ap.parse_args()))
    for th, s, p, errs, orders in sweep(cfg):
        print(f"theta={th:+.3f}  sigma(1)={s:.12f}  p(1)={p:.12f}")
        print("   errors: " + "  ".join(f"{e:.2e}" for e in errs))
        print("   orders: " + "  ".join(f"{o:.3f}" for o in orders))


if __name__ == "__main__":
    main()
