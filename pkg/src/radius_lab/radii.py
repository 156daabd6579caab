"""Radius sequences, Hoelder constants and the bounds built from them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .cocycle import (CONV_TOL, N_ITER, STOP_TOL, Sign, ball_offsets, global_log_extreme,
                      grid_points, log_psi_array, psi)
from .errors import NonConvergenceError
from .lyapunov import log_psi_terms
from .parallel import chunks, sample_rng
from .systems import SystemSpec, TorusPoint, _pt, iterate, jacobian, torus_distance, torus_distances

CHART_RADIUS = 0.25
GRID_L = 256
INF = math.inf


class Mode(str, enum.Enum):
    BALL_EXACT = "BallExact"
    POINTWISE_PROXY = "PointwiseProxy"

    @classmethod
    def parse(cls, s) -> "Mode":
        if isinstance(s, Mode):
            return s
        key = str(s).strip().lower().replace("_", "").replace("-", "")
        if key in ("ball", "ballexact", "exact"):
            return cls.BALL_EXACT
        if key in ("pointwise", "pointwiseproxy", "proxy"):
            return cls.POINTWISE_PROXY
        raise ValueError(f"unknown mode {s!r}")


# ---------------------------------------------------------------- Hoelder

@dataclass(frozen=True)
class HoelderEstimate:
    """Empirical (C, alpha) with |log psi(x) - log psi(y)| <= C d(x, y)^alpha.

    ``C = safety * max_ratio`` over the sampled pairs. C = 0 means the field was
    constant on every pair; downstream bounds then use the vacuous convention.
    """

    C: float
    alpha: float
    n_pairs: int
    d_max: float
    worst_pair: tuple[TorusPoint, TorusPoint]
    sign: Sign
    max_ratio: float = 0.0
    safety: float = 1.0
    seed: int = 0

    @property
    def vacuous(self) -> bool:
        return self.C == 0.0

    def bound(self, d):
        return self.C * np.power(d, self.alpha)

    def to_dict(self) -> dict:
        (p, q) = self.worst_pair
        return {
            "C": self.C, "alpha": self.alpha, "n_pairs": self.n_pairs, "d_max": self.d_max,
            "max_ratio": self.max_ratio, "safety": self.safety, "seed": self.seed,
            "sign": self.sign.name.lower(), "worst_pair": [list(p.as_tuple()), list(q.as_tuple())],
        }


def sample_pairs(seed: int, n_pairs: int, d_max: float, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """x uniform on the torus, y uniform in the disk of radius d_max around x."""
    xs, ys = [], []
    for c, (lo, hi) in enumerate(chunks(n_pairs, chunk)):
        u = sample_rng(seed, c).random((hi - lo, 4))
        rad = d_max * np.sqrt(u[:, 2])
        th = 2.0 * np.pi * u[:, 3]
        xs.append(u[:, :2])
        ys.append((u[:, :2] + np.column_stack([rad * np.cos(th), rad * np.sin(th)])) % 1.0)
    if not xs:
        return np.empty((0, 2)), np.empty((0, 2))
    return np.concatenate(xs), np.concatenate(ys)


def pair_ratios(spec: SystemSpec, x: np.ndarray, y: np.ndarray, sign, alpha: float):
    d = torus_distances(x, y)
    diff = np.abs(log_psi_array(spec, x, sign) - log_psi_array(spec, y, sign))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(d > 0, diff / np.power(d, alpha), 0.0)
    return ratio, diff, d


def estimate_hoelder(spec: SystemSpec, sign=Sign.PLUS, alpha: float = 1.0, n_pairs: int = 10_000,
                     d_max: float = CHART_RADIUS, seed: int = 0, safety: float = 1.25) -> HoelderEstimate:
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0.0 < d_max <= CHART_RADIUS:
        raise ValueError("d_max must lie in (0, 0.25]")
    if safety < 1.0:
        raise ValueError("safety must be >= 1")
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    sign = Sign.parse(sign)
    x, y = sample_pairs(seed, n_pairs, d_max)
    ratio, _, _ = pair_ratios(spec, x, y, sign, alpha)
    i = int(np.argmax(ratio))
    mx = float(ratio[i])
    return HoelderEstimate(
        C=safety * mx, alpha=float(alpha), n_pairs=int(n_pairs), d_max=float(d_max),
        worst_pair=(TorusPoint(*x[i]), TorusPoint(*y[i])), sign=sign,
        max_ratio=mx, safety=float(safety), seed=int(seed),
    )


def hoelder_failure_fraction(spec: SystemSpec, est: HoelderEstimate, n_pairs: int, seed: int) -> float:
    """Fraction of fresh pairs violating the certificate."""
    x, y = sample_pairs(seed, n_pairs, est.d_max)
    _, diff, d = pair_ratios(spec, x, y, est.sign, est.alpha)
    return float(np.mean(diff > est.C * np.power(d, est.alpha)))


# ---------------------------------------------------------------- sequences

@dataclass(frozen=True)
class RadiusSequence:
    """r[k+1] = m[k] * r[k] along the forward orbit of ``start``.

    ``chart_exceeded`` flags radii above the 0.25 chart bound. Radii are only
    capped there when the sequence was built with ``clamp=True`` (``clamped``).
    """

    r0: float
    r: np.ndarray
    m: np.ndarray
    start: TorusPoint
    mode: Mode
    orbit: np.ndarray
    chart_exceeded: bool = False
    clamped: bool = False
    spec: Optional[SystemSpec] = field(default=None, compare=False, repr=False)

    @property
    def N(self) -> int:
        return len(self.m)

    @property
    def log_r(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.r)

    def rows(self):
        log_r = self.log_r
        for k in range(self.N + 1):
            yield (k, float(self.r[k]), float(self.m[k]) if k < self.N else None, float(log_r[k]))

    columns = ("k", "r_k", "m_k", "log_r_k")


def _orbit_arrays(spec: SystemSpec, x, n: int) -> tuple[np.ndarray, np.ndarray]:
    px, py = _pt(x)
    xs, ys = K.orbit(spec.params, px, py, n, False)
    return xs, ys


def radii_sequence(spec: SystemSpec, x, r0: float, N: int, mode=Mode.BALL_EXACT,
                   clamp: bool = False,
                   proxy_log_field: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> RadiusSequence:
    """Radius recursion r_{k+1} = psi_+(f^k x, r_k) r_k.

    BallExact evaluates psi_+ over the ball of radius r_k; balls of radius at
    least sqrt(1/2) are the whole torus. PointwiseProxy uses psi_+(f^k x), or
    ``exp(proxy_log_field(points))`` when a field is supplied.
    """
    if not r0 > 0:
        raise ValueError("r0 must be > 0")
    if N < 0:
        raise ValueError("N must be >= 0")
    mode = Mode.parse(mode)
    xs, ys = _orbit_arrays(spec, x, N)
    orbit = np.column_stack([xs, ys])
    start = TorusPoint(*_pt(x))
    if mode is Mode.BALL_EXACT:
        glob = global_log_extreme(spec, Sign.PLUS, 1)
        with np.errstate(over="ignore", invalid="ignore"):
            r, m, ok, exceeded = K.radius_recursion(
                spec.params, xs[:N], ys[:N], float(r0), ball_offsets(), glob, CHART_RADIUS,
                bool(clamp), N_ITER, STOP_TOL, CONV_TOL)
        if not ok:
            raise NonConvergenceError(f"splitting did not converge in a ball along the orbit of {start}")
    else:
        if proxy_log_field is not None:
            logs = np.asarray(proxy_log_field(orbit[:N]), dtype=float)
        else:
            logs = log_psi_array(spec, orbit[:N], Sign.PLUS)
        m = np.exp(logs)
        r = np.empty(N + 1)
        r[0] = r0
        exceeded = r0 > CHART_RADIUS
        with np.errstate(over="ignore"):
            for k in range(N):
                nxt = m[k] * r[k]
                if nxt > CHART_RADIUS:
                    exceeded = True
                    if clamp:
                        nxt = CHART_RADIUS
                r[k + 1] = nxt
    for a in (r, m, orbit):
        a.setflags(write=False)
    return RadiusSequence(float(r0), r, m, start, mode, orbit, bool(exceeded),
                          bool(clamp and exceeded), spec)


def power_mean_holds(r: np.ndarray, alpha: float) -> bool:
    """avg r^alpha <= (avg r)^alpha for alpha <= 1 (concavity)."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        return True  # the right side is infinite
    lhs = np.mean(np.power(r, alpha))
    rhs = np.mean(r) ** alpha
    return bool(lhs <= rhs * (1 + 1e-12))


# ---------------------------------------------------------------- growth inequality

@dataclass(frozen=True)
class GrowthCheck:
    lhs: np.ndarray
    rhs: np.ndarray
    holds: bool
    pointwise: np.ndarray
    penalty: np.ndarray
    tolerance: float = 1e-9

    @property
    def worst_gap(self) -> float:
        return float(np.min(self.lhs - self.rhs))


def _prefix_means(v: np.ndarray) -> np.ndarray:
    return np.cumsum(v) / np.arange(1, len(v) + 1)


def check_growth_inequality(seq: RadiusSequence, hoelder: HoelderEstimate,
                            tol: float = 1e-9) -> GrowthCheck:
    """For every prefix N >= 1:

        lhs_N = (1/N) sum_{k<N} log psi_+(f^k x, r_k)
        rhs_N = (1/N) sum_{k<N} log psi_+(f^k x) - (C/N) sum_{k<N} r_k^alpha

    lhs_N equals (1/N) log(r_N / r_0) for an unclamped sequence; the sum form
    stays finite after r_k overflows.
    """
    if seq.mode is not Mode.BALL_EXACT:
        raise ValueError("growth inequality needs a BallExact sequence")
    if seq.spec is None:
        raise ValueError("sequence carries no system")
    N = seq.N
    lhs = _prefix_means(np.log(seq.m))
    pointwise = _prefix_means(log_psi_terms(seq.spec, seq.start, Sign.PLUS, N))
    if hoelder.C == 0.0:
        penalty = np.zeros(N)
    else:
        with np.errstate(over="ignore"):
            penalty = hoelder.C * _prefix_means(np.power(seq.r[:N], hoelder.alpha))
    rhs = pointwise - penalty
    holds = bool(np.all(lhs >= rhs - tol))
    return GrowthCheck(lhs, rhs, holds, pointwise, penalty, tol)


def critical_C(seq: RadiusSequence, alpha: float = 1.0, tol: float = 1e-9) -> float:
    """Smallest C for which the growth inequality holds on ``seq``.

    Closed form of the bisection on C: every prefix gives the linear constraint
    C * S_N >= P_N - lhs_N - tol with S_N > 0.
    """
    chk = check_growth_inequality(seq, HoelderEstimate(0.0, alpha, 0, 0.0, (seq.start, seq.start), Sign.PLUS), tol)
    with np.errstate(over="ignore"):
        S = _prefix_means(np.power(seq.r[:seq.N], alpha))
    need = chk.pointwise - chk.lhs - tol
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(need > 0, need / S, 0.0)
    return float(max(0.0, np.max(c))) if len(c) else 0.0


# ---------------------------------------------------------------- horizon

@lru_cache(maxsize=64)
def _max_log_psi_plus(key: tuple, grid_n: int) -> float:
    spec_params = np.asarray(key)
    g = np.arange(grid_n) / grid_n
    X, Y = np.meshgrid(g, g, indexing="ij")
    v, ok = K.log_psi_many(spec_params, X.ravel(), Y.ravel(), 1, 1, N_ITER, STOP_TOL, CONV_TOL)
    if not ok.all():
        raise NonConvergenceError("splitting did not converge on the L grid")
    return float(v.max())


def max_log_psi_plus(spec: SystemSpec, grid_n: int = GRID_L) -> float:
    """L = max log psi_+ over a grid_n x grid_n lattice."""
    return _max_log_psi_plus(spec.key(), int(grid_n))


@dataclass(frozen=True)
class Horizon:
    n: Optional[int]
    found: bool
    vacuous: bool
    L: float
    n_cap: int

    def to_dict(self) -> dict:
        return {"n": self.n, "found": self.found, "vacuous": self.vacuous, "L": self.L, "n_cap": self.n_cap}


def claim_horizon(spec: SystemSpec, x, delta: float, r0: float, hoelder: HoelderEstimate,
                  le_plus: float, n_cap: int = 10_000) -> Horizon:
    """Smallest n <= n_cap with

        (a) (1/n') sum_{k<n'} log psi_+(f^k x) > le_plus - delta/2   for all n' in [n, n_cap]
        (b) le_plus <= (C/n) (r0 exp(delta n/2 - L))^alpha

    With C = 0 the bound is vacuous and n = 1 is returned.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    if not le_plus > 0:
        raise ValueError("le_plus must be > 0")
    if not r0 > 0:
        raise ValueError("r0 must be > 0")
    L = max_log_psi_plus(spec)
    if hoelder.C == 0.0:
        return Horizon(1, True, True, L, int(n_cap))
    n = np.arange(1, n_cap + 1, dtype=float)
    avg = _prefix_means(log_psi_terms(spec, x, Sign.PLUS, n_cap))
    a = avg > le_plus - delta / 2
    # suffix-and: a holds from n up to n_cap
    a_tail = np.flip(np.logical_and.accumulate(np.flip(a)))
    log_rhs = math.log(hoelder.C) - np.log(n) + hoelder.alpha * (math.log(r0) + delta * n / 2 - L)
    b = math.log(le_plus) <= log_rhs
    ok = np.flatnonzero(a_tail & b)
    if len(ok) == 0:
        return Horizon(None, False, False, L, int(n_cap))
    return Horizon(int(ok[0]) + 1, True, False, L, int(n_cap))


# ---------------------------------------------------------------- averaged bound

@dataclass(frozen=True)
class Theorem3Check:
    bound_satisfied: bool
    tail_min_avg: float
    le_plus: float
    vacuous: bool
    power_mean_ok: bool
    chart_exceeded: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("bound_satisfied", "tail_min_avg", "le_plus", "vacuous", "power_mean_ok", "chart_exceeded")}


def tail_min_average(r: np.ndarray, N: int, C: float, alpha: float) -> float:
    """min over n in [ceil(N/2), N] of (C/n) sum_{k<n} r_k^alpha."""
    with np.errstate(over="ignore"):
        avg = _prefix_means(np.power(np.asarray(r[:N], dtype=float), alpha))
    lo = max(1, math.ceil(N / 2))
    return float(C * np.min(avg[lo - 1:N]))


def check_theorem3(spec: SystemSpec, x, r0: float, N: int, hoelder: HoelderEstimate,
                   le_plus: float, seq: Optional[RadiusSequence] = None) -> Theorem3Check:
    """le_plus <= tail-min of (C/n) sum r_k^alpha over the last half of [1, N].

    Tolerances are passed by lowering ``le_plus``. C = 0 is reported as a
    vacuously satisfied bound.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if seq is None:
        seq = radii_sequence(spec, x, r0, N, Mode.BALL_EXACT)
    pm = power_mean_holds(seq.r[:N], hoelder.alpha)
    if hoelder.C == 0.0:
        return Theorem3Check(True, INF, float(le_plus), True, pm, seq.chart_exceeded)
    t = tail_min_average(seq.r, N, hoelder.C, hoelder.alpha)
    return Theorem3Check(bool(le_plus <= t), t, float(le_plus), False, pm, seq.chart_exceeded)


# ---------------------------------------------------------------- A+(N)

@dataclass(frozen=True)
class RegionAPlus:
    """Grid indicator of {log psi^N_+ > 0}; node (i, j) is the point (i/n, j/n)."""

    N: int
    grid_n: int
    indicator: np.ndarray
    log_psi: np.ndarray
    tie_tol: float = 1e-12

    @property
    def complement_nonempty(self) -> bool:
        return bool(not self.indicator.all())

    @property
    def fraction(self) -> float:
        return float(self.indicator.mean())

    def outside_points(self) -> np.ndarray:
        i, j = np.nonzero(~self.indicator)
        return np.column_stack([i, j]) / self.grid_n

    def distance_to_complement(self, p) -> float:
        pts = self.outside_points()
        if len(pts) == 0:
            return INF
        q = np.broadcast_to(np.asarray(_pt(p)), pts.shape)
        return float(torus_distances(q, pts).min())


@lru_cache(maxsize=32)
def _region_cached(key: tuple, N: int, grid_n: int) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(key)
    pts = grid_points(grid_n)
    v, ok = K.log_psi_many(P, np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
                           1, N, N_ITER, STOP_TOL, CONV_TOL)
    v = np.where(ok, v, np.nan)
    ind = (v > 1e-12) & ok
    ind = ind.reshape(grid_n, grid_n)
    v = v.reshape(grid_n, grid_n)
    ind.setflags(write=False)
    v.setflags(write=False)
    return ind, v


def region_a_plus(spec: SystemSpec, N: int = 1, grid_n: int = 256) -> RegionAPlus:
    """Nodes with |log psi^N_+| <= 1e-12 and non-converged nodes count as outside."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    ind, v = _region_cached(spec.key(), int(N), int(grid_n))
    return RegionAPlus(int(N), int(grid_n), ind, v)


# ---------------------------------------------------------------- periodic points

def find_periodic(spec: SystemSpec, period: int, seed_point, max_steps: int = 50,
                  tol: float = 1e-12) -> TorusPoint:
    """Newton iteration on f^period(p) - p, differences taken mod the lattice."""
    if period < 1:
        raise ValueError("period must be >= 1")
    x, y = _pt(seed_point)
    for _ in range(max_steps):
        orb = iterate(spec, (x, y), period)
        F = np.array([K.wrap(orb[-1, 0] - x), K.wrap(orb[-1, 1] - y)])
        if math.hypot(*F) < tol:
            return TorusPoint(x, y)
        D = np.eye(2)
        for q in orb[:-1]:
            D = jacobian(spec, q).as_array() @ D
        A = D - np.eye(2)
        if abs(np.linalg.det(A)) < 1e-14:
            raise NonConvergenceError("degenerate Jacobian: Df^period - I is singular")
        step = np.linalg.solve(A, F)
        x, y = K.frac(x - step[0]), K.frac(y - step[1])
    p = TorusPoint(x, y)
    if periodicity_defect(spec, p, period) < tol:
        return p
    raise NonConvergenceError(f"Newton did not converge in {max_steps} steps")


def periodicity_defect(spec: SystemSpec, p, period: int) -> float:
    return torus_distance(iterate(spec, p, period)[-1], _pt(p))


def minimal_period(spec: SystemSpec, p, upto: int, tol: float = 1e-9) -> Optional[int]:
    orb = iterate(spec, p, upto)
    for n in range(1, upto + 1):
        if torus_distance(orb[n], orb[0]) < tol:
            return n
    return None


@dataclass(frozen=True)
class PeriodicBounds:
    """Radius bounds at a periodic orbit.

    ``proposition_lower`` is the grid distance from p to the complement of
    A+(period) (inf when the complement is empty). ``corollary_rhs`` uses those
    lower proxies along the orbit; it is only compared with LE+(p) when an
    upper estimate of R+ is supplied, since lower proxies do not preserve the
    direction of the corollary.
    """

    le_plus: float
    proposition_lower: float
    orbit_lower: np.ndarray
    corollary_rhs: float
    corollary_checked: bool
    corollary_holds: Optional[bool]
    vacuous: bool

    def to_dict(self) -> dict:
        return {
            "le_plus": self.le_plus, "proposition_lower": self.proposition_lower,
            "orbit_lower": self.orbit_lower, "corollary_rhs": self.corollary_rhs,
            "corollary_checked": self.corollary_checked, "corollary_holds": self.corollary_holds,
            "vacuous": self.vacuous,
        }


def _corollary_rhs(C: float, alpha: float, radii: np.ndarray) -> float:
    if C == 0.0:
        return INF
    with np.errstate(over="ignore"):
        return float(C * np.mean(np.power(radii, alpha)))


def periodic_point_bounds(spec: SystemSpec, p, period: int, hoelder: HoelderEstimate,
                          grid_n: int = 256, r_plus_upper=None) -> PeriodicBounds:
    if period < 1:
        raise ValueError("period must be >= 1")
    if periodicity_defect(spec, p, period) >= 1e-9:
        raise ValueError(f"{p} is not {period}-periodic")
    mp = minimal_period(spec, p, period)
    if mp != period:
        raise ValueError(f"period mismatch: minimal period is {mp}, not {period}")
    region = region_a_plus(spec, period, grid_n)
    orbit = iterate(spec, p, period - 1)
    lows = np.array([region.distance_to_complement(q) for q in orbit])
    le = psi(spec, p, Sign.PLUS, period).log / period
    rhs = _corollary_rhs(hoelder.C, hoelder.alpha, lows)
    checked, holds = False, None
    if r_plus_upper is not None:
        upper = np.broadcast_to(np.asarray(r_plus_upper, dtype=float), (period,))
        checked = True
        holds = bool(hoelder.C == 0.0 or le <= _corollary_rhs(hoelder.C, hoelder.alpha, upper))
    lows.setflags(write=False)
    return PeriodicBounds(float(le), float(lows[0]), lows, rhs, checked, holds, hoelder.C == 0.0)
