"""LE+, LE-, domination margin and Hoelder constant across shear strengths.

    python3 scripts/spectrum_sweep.py --eps 0 0.02 0.05 0.1 --out spectrum.csv
"""

import argparse
from dataclasses import asdict, dataclass, field

from radius_lab import cocycle, io, lyapunov, radii, systems
from radius_lab.cocycle import Sign


@dataclass
class SweepConfig:
    eps: list = field(default_factory=lambda: [0.0, 0.02, 0.05, 0.1])
    n_orbit: int = 10_000
    n_samples: int = 20
    grid_n: int = 128
    n_pairs: int = 10_000
    seed: int = 0


def run(cfg: SweepConfig):
    for eps in cfg.eps:
        sp = systems.cat_map() if eps == 0 else systems.shear(eps)
        lp = lyapunov.le_estimate(sp, Sign.PLUS, cfg.n_orbit, cfg.n_samples, cfg.seed)
        lm = lyapunov.le_estimate(sp, Sign.MINUS, cfg.n_orbit, cfg.n_samples, cfg.seed)
        dom = cocycle.check_domination(sp, 0.1, cfg.grid_n)
        est = radii.estimate_hoelder(sp, Sign.PLUS, 1.0, cfg.n_pairs, 0.25, cfg.seed)
        yield eps, lp.mean, lp.stddev, lm.mean, dom.gamma_max, est.C


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=SweepConfig().eps)
    ap.add_argument("--out", default=None)
    a = ap.parse_args()
    cfg = SweepConfig(eps=a.eps)
    text = io.csv_text(("eps", "le_plus", "le_plus_std", "le_minus", "gamma_max", "C"), run(cfg), asdict(cfg))
    if a.out:
        open(a.out, "w").write(text)
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
