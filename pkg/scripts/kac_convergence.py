"""Relative error of the Kac identity against the Monte Carlo sample size.

    python3 scripts/kac_convergence.py --system shear:0.05
"""

import argparse
from dataclasses import asdict, dataclass, field

from radius_lab import ergodic, io
from radius_lab.cli import parse_system


@dataclass
class KacConfig:
    system: str = "cat"
    region: str = "ball:0.5,0.5,0.1"
    sizes: list = field(default_factory=lambda: [500, 1000, 2000, 5000, 10_000, 20_000])
    repeats: int = 5


def run(cfg: KacConfig):
    sp = parse_system(cfg.system)
    A = ergodic.parse_region(cfg.region)
    for n in cfg.sizes:
        for rep in range(cfg.repeats):
            res = ergodic.kac_verify(sp, A, "logpsi+", n, seed=rep)
            yield n, rep, res.lhs, res.rhs, res.rel_err, res.mean_return


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--system", default=KacConfig.system)
    ap.add_argument("--out", default=None)
    a = ap.parse_args()
    cfg = KacConfig(system=a.system)
    text = io.csv_text(("n", "repeat", "lhs", "rhs", "rel_err", "mean_return"), run(cfg), asdict(cfg))
    if a.out:
        open(a.out, "w").write(text)
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
