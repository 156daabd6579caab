"""Radius recursion from a small seed: how fast r_k leaves the chart, and
the slack in the growth inequality, for several shear strengths.

    python3 scripts/radius_growth.py --eps 0.02 0.05 0.1 --starts 20
"""

import argparse
from dataclasses import asdict, dataclass, field

import numpy as np

from radius_lab import io, lyapunov, radii, systems
from radius_lab.cocycle import Sign


@dataclass
class GrowthConfig:
    eps: list = field(default_factory=lambda: [0.02, 0.05, 0.1])
    r0: float = 1e-4
    n: int = 1000
    starts: int = 20
    seed: int = 0


def run(cfg: GrowthConfig):
    for eps in cfg.eps:
        sp = systems.shear(eps)
        est = radii.estimate_hoelder(sp, Sign.PLUS, 1.0, 10_000, 0.25, cfg.seed)
        for i in range(cfg.starts):
            x = lyapunov.sample_start(cfg.seed, i)
            seq = radii.radii_sequence(sp, x, cfg.r0, cfg.n)
            chk = radii.check_growth_inequality(seq, est)
            exit_k = np.flatnonzero(seq.r > radii.CHART_RADIUS)
            yield (eps, i, x.x, x.y, int(exit_k[0]) if len(exit_k) else None,
                   chk.worst_gap, radii.critical_C(seq), est.C)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=GrowthConfig().eps)
    ap.add_argument("--starts", type=int, default=GrowthConfig.starts)
    ap.add_argument("--out", default=None)
    a = ap.parse_args()
    cfg = GrowthConfig(eps=a.eps, starts=a.starts)
    cols = ("eps", "start", "x", "y", "chart_exit_k", "worst_gap", "critical_C", "C")
    text = io.csv_text(cols, run(cfg), asdict(cfg))
    if a.out:
        open(a.out, "w").write(text)
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
