"""Birkhoff averages of log psi and the resulting exponent estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .cocycle import CONV_TOL, N_ITER, STOP_TOL, Sign
from .errors import NonConvergenceError
from .parallel import pmap, sample_rng
from .systems import SystemSpec, TorusPoint, _pt

TAIL_FRACTION = 0.1


def tail_oscillation(values: np.ndarray, fraction: float = TAIL_FRACTION) -> float:
    """max - min over the last ``fraction`` of a running-average series."""
    n = len(values)
    if n == 0:
        return 0.0
    tail = values[n - max(1, int(round(fraction * n))):]
    return float(tail.max() - tail.min())


@dataclass(frozen=True)
class BirkhoffSeries:
    """values[n-1] = (1/n) sum_{k<n} log psi_sign(f^k x)."""

    values: np.ndarray
    n_max: int
    sign: Sign
    start: TorusPoint

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    @property
    def tail_oscillation(self) -> float:
        return tail_oscillation(self.values)


def log_psi_terms(spec: SystemSpec, x, sign=Sign.PLUS, n: int = 1) -> np.ndarray:
    """log psi_sign(f^k x) for k < n."""
    sign = Sign.parse(sign)
    px, py = _pt(x)
    terms, ok = K.birkhoff_terms(spec.params, px, py, int(sign), int(n), N_ITER, STOP_TOL, CONV_TOL)
    if not ok:
        # the bundle is computed once, at index 0 (plus) or at index n (minus)
        idx = 0 if sign is Sign.PLUS else n
        raise NonConvergenceError(f"splitting did not converge at orbit index {idx} from {(px, py)}")
    return terms


def birkhoff(spec: SystemSpec, x, sign=Sign.PLUS, n_max: int = 1000) -> BirkhoffSeries:
    """Running averages of log psi_sign along the forward orbit of ``x``.

    E+ is propagated forward from x and E- is pulled back from f^n_max(x), so
    each bundle is only resolved once per orbit and always in its stable
    direction of propagation.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    sign = Sign.parse(sign)
    terms = log_psi_terms(spec, x, sign, n_max)
    values = np.cumsum(terms) / np.arange(1, n_max + 1)
    if not np.all(np.isfinite(values)):
        raise NonConvergenceError("non-finite Birkhoff average")
    values.setflags(write=False)
    return BirkhoffSeries(values, int(n_max), sign, TorusPoint(*_pt(x)))


@dataclass(frozen=True)
class LEEstimate:
    mean: float
    stddev: float
    tail_oscillation: float
    terminals: np.ndarray
    sign: Sign
    n_orbit: int
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stddev": self.stddev,
            "tail_oscillation": self.tail_oscillation,
            "sign": self.sign.name.lower(),
            "n_orbit": self.n_orbit,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


def sample_start(seed: int, index: int) -> TorusPoint:
    return TorusPoint(*sample_rng(seed, index).random(2))


def le_estimate(spec: SystemSpec, sign=Sign.PLUS, n_orbit: int = 10_000, n_samples: int = 20,
                seed: int = 0) -> LEEstimate:
    """Mean and spread of terminal Birkhoff averages over uniform random starts.

    Sample i starts from the stream (seed, i). ``tail_oscillation`` is the
    largest per-sample oscillation over the last tenth of the series.
    """
    if n_orbit < 1000:
        raise ValueError("n_orbit must be >= 1000")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sign = Sign.parse(sign)

    def one(i):
        s = birkhoff(spec, sample_start(seed, i), sign, n_orbit)
        return s.terminal, s.tail_oscillation

    res = np.array(pmap(one, range(n_samples)))
    term = res[:, 0]
    term.setflags(write=False)
    return LEEstimate(
        mean=float(term.mean()),
        stddev=float(term.std()),
        tail_oscillation=float(res[:, 1].max()),
        terminals=term,
        sign=sign,
        n_orbit=int(n_orbit),
        n_samples=int(n_samples),
        seed=int(seed),
    )
