"""Finite-depth Pesin blocks and the time-bound proposition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cocycle import Sign
from .lyapunov import log_psi_terms
from .parallel import pmap
from .radii import HoelderEstimate, Mode, radii_sequence
from .systems import SystemSpec, iterate

PAST_STEPS = 200
SEED_RADIUS = 1e-8


@dataclass(frozen=True)
class BlockParams:
    gamma: float
    N: int
    horizon: Optional[int] = None
    sign: Sign = Sign.PLUS

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.horizon is None:
            object.__setattr__(self, "horizon", 10 * self.N)
        if self.horizon < self.N:
            raise ValueError("horizon must be >= N")
        object.__setattr__(self, "sign", Sign.parse(self.sign))


@dataclass(frozen=True)
class BlockMembership:
    member: bool
    first_violation: Optional[int]
    horizon: int


def running_averages(spec: SystemSpec, x, sign, horizon: int) -> np.ndarray:
    """a[n-1] = (1/n) sum_{k<n} log psi_sign(f^k x) for n = 1..horizon."""
    t = log_psi_terms(spec, x, sign, horizon)
    return np.cumsum(t) / np.arange(1, horizon + 1)


def _violations(avg: np.ndarray, gamma: float, sign: Sign) -> np.ndarray:
    if sign is Sign.PLUS:
        return avg < gamma / 2
    return avg > -gamma / 2


def membership_from_averages(avg: np.ndarray, params: BlockParams) -> BlockMembership:
    bad = np.flatnonzero(_violations(avg[params.N - 1:params.horizon], params.gamma, params.sign))
    if len(bad) == 0:
        return BlockMembership(True, None, params.horizon)
    return BlockMembership(False, int(bad[0]) + params.N, params.horizon)


def block_membership(spec: SystemSpec, x, params: BlockParams) -> BlockMembership:
    """Is x in the block to depth ``params.horizon``?

    Plus: (1/n) sum_{k<n} log psi_+(f^k x) >= gamma/2 for every n in [N, horizon].
    Minus: the same averages of log psi_- stay <= -gamma/2.
    ``first_violation`` is the first failing n.
    """
    return membership_from_averages(running_averages(spec, x, params.sign, params.horizon), params)


def minimal_block_N(avg: np.ndarray, gamma: float, horizon: int, sign=Sign.PLUS) -> Optional[int]:
    """Smallest N with membership to ``horizon``; None if even N = horizon fails."""
    bad = np.flatnonzero(_violations(avg[:horizon], gamma, Sign.parse(sign)))
    if len(bad) == 0:
        return 1
    last = int(bad[-1]) + 1
    return last + 1 if last < horizon else None


def block_map(spec: SystemSpec, pts: np.ndarray, params: BlockParams) -> list[tuple]:
    """Rows (x, y, member, first_violation) for each point."""
    def one(p):
        b = block_membership(spec, p, params)
        return (float(p[0]), float(p[1]), b.member, b.first_violation)
    return pmap(one, list(np.asarray(pts, dtype=float)))


BLOCK_COLUMNS = ("x", "y", "member", "first_violation")


# ---------------------------------------------------------------- time bound

@dataclass(frozen=True)
class TimeBound:
    hypothesis_met: bool
    conclusion_met: bool
    R0: float
    T: Optional[int]
    N: Optional[int]
    vacuous: bool = False
    certified_radius: float = 0.0
    hypothesis_verified: bool = True
    proof_chain: Optional[bool] = None
    sup_r: float = 0.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "hypothesis_met", "conclusion_met", "R0", "T", "N", "vacuous", "certified_radius",
            "hypothesis_verified", "proof_chain", "sup_r")}


def proof_chain(r: np.ndarray, m: np.ndarray, N: int, gamma: float,
                hoelder: HoelderEstimate, R0: float) -> Optional[bool]:
    """Replays the proof's display on prefixes n in [N, T] with r_k < R0 for k < n:

        (1/n) log(r_n / r_0) >= gamma/2 - (C/n) sum_{k<n} r_k^alpha >= gamma/4

    The left side is taken as (1/n) sum log m_k. None when no prefix qualifies.
    """
    T = len(m)
    below = np.flatnonzero(r[:T] >= R0)
    n_max = int(below[0]) if len(below) else T
    if n_max < N:
        return None
    n = np.arange(1, n_max + 1)
    lhs = np.cumsum(np.log(m[:n_max])) / n
    mid = gamma / 2 - hoelder.C * np.cumsum(np.power(r[:n_max], hoelder.alpha)) / n
    sel = slice(N - 1, n_max)
    ok = (lhs[sel] >= mid[sel] - 1e-9) & (mid[sel] >= gamma / 4 - 1e-12)
    return bool(np.all(ok))


def certify_radius(spec: SystemSpec, x, steps: int = PAST_STEPS, seed_radius: float = SEED_RADIUS) -> float:
    """Radius reached at x by the ball recursion started ``steps`` steps in the past."""
    past = iterate(spec, x, steps, backward=True)[-1]
    return float(radii_sequence(spec, past, seed_radius, steps, Mode.BALL_EXACT).r[-1])


def time_bound_check(spec: SystemSpec, x, gamma: float, K: int, hoelder: HoelderEstimate,
                     horizon: int, seed_radius: float = SEED_RADIUS) -> TimeBound:
    """Time-bound proposition on the r_k proxy.

    N is the smallest block index for which x is a member to depth
    max(horizon, K), so the block condition is known at time T.
    The hypothesis also needs x in G+(R0 exp(-K gamma/4)), certified by the
    recursion from 200 steps in the past; an uncertified sample is reported
    with ``hypothesis_verified = False``. The conclusion is
    sup_{k <= T} r_k >= R0 for the recursion from x with that radius,
    T = max(K, N).
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if K < 1 or horizon < 1:
        raise ValueError("K and horizon must be >= 1")
    if hoelder.C == 0.0:
        return TimeBound(False, False, math.inf, None, None, vacuous=True, hypothesis_verified=False)
    R0 = (gamma / (4.0 * hoelder.C)) ** (1.0 / hoelder.alpha)
    depth = max(horizon, K)
    avg = running_averages(spec, x, Sign.PLUS, depth)
    N = minimal_block_N(avg, gamma, depth)
    target = R0 * math.exp(-K * gamma / 4.0)
    if N is None:
        return TimeBound(False, False, R0, None, None, hypothesis_verified=True)
    T = max(K, N)
    reached = certify_radius(spec, x, PAST_STEPS, seed_radius)
    verified = reached >= target
    seq = radii_sequence(spec, x, target, T, Mode.BALL_EXACT)
    sup_r = float(np.max(seq.r))
    chain = proof_chain(seq.r, seq.m, N, gamma, hoelder, R0)
    return TimeBound(bool(verified), bool(sup_r >= R0), R0, T, N, False, reached, bool(verified), chain, sup_r)
