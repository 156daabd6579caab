"""Derivative cocycle: conorm, the invariant splitting, psi and domination."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .errors import NonConvergenceError
from .parallel import map_points
from .systems import SystemSpec, _pt

N_ITER = 60
STOP_TOL = 1e-15
CONV_TOL = 1e-10
GLOBAL_GRID_N = 128
TORUS_DIAMETER = K.TORUS_DIAMETER


class Sign(enum.IntEnum):
    PLUS = 1
    MINUS = -1

    @classmethod
    def parse(cls, s) -> "Sign":
        if isinstance(s, Sign):
            return s
        if isinstance(s, int):
            return cls(s)
        key = str(s).strip().lower()
        if key in ("plus", "+", "p", "1", "+1"):
            return cls.PLUS
        if key in ("minus", "-", "m", "-1"):
            return cls.MINUS
        raise ValueError(f"unknown sign {s!r}")


def singular_values(M) -> tuple[float, float]:
    """(largest, smallest) singular value of a 2x2 matrix in closed form."""
    a, b, c, d = _entries(M)
    det = abs(a * d - b * c)
    s = a * a + b * b + c * c + d * d
    # s^2 - 4 det^2 written as a sum of squares to avoid cancellation
    top = math.sqrt(0.5 * (s + math.hypot(a * a + b * b - c * c - d * d, 2.0 * (a * c + b * d))))
    if top == 0.0:
        return 0.0, 0.0
    return top, det / top


def opnorm(M) -> float:
    return singular_values(M)[0]


def conorm(M) -> float:
    """m(M) = ||M^{-1}||^{-1}, the smallest singular value."""
    a, b, c, d = _entries(M)
    if a * d - b * c == 0.0:
        raise ValueError("conorm of a singular matrix")
    return singular_values(M)[1]


def _entries(M) -> tuple[float, float, float, float]:
    if hasattr(M, "a"):
        return M.a, M.b, M.c, M.d
    m = np.asarray(M, dtype=float)
    return float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])


@dataclass(frozen=True)
class SplittingAt:
    e_minus: np.ndarray
    e_plus: np.ndarray
    angle: float
    converged: bool
    iterations_used: int
    residual_plus: float
    residual_minus: float


def splitting_at(spec: SystemSpec, p, n_iter: int = N_ITER) -> SplittingAt:
    """E- and E+ at ``p`` by power iteration of the cocycle.

    E+ is the limiting image of Df^n along the backward orbit, E- the same for
    Df^{-n} along the forward orbit. Iteration stops once successive directions
    agree to ``STOP_TOL``; ``converged`` requires the final change below 1e-10.
    Callers must check ``converged``.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    x, y = _pt(p)
    ex, ey, ch_p, it_p = K.eplus(spec.params, x, y, n_iter, STOP_TOL)
    fx, fy, ch_m, it_m = K.eminus(spec.params, x, y, n_iter, STOP_TOL)
    cos = abs(ex * fx + ey * fy)
    return SplittingAt(
        e_minus=np.array([fx, fy]),
        e_plus=np.array([ex, ey]),
        angle=math.acos(min(cos, 1.0)),
        converged=bool(ch_p < CONV_TOL and ch_m < CONV_TOL),
        iterations_used=int(max(it_p, it_m)),
        residual_plus=float(ch_p),
        residual_minus=float(ch_m),
    )


def splitting_many(spec: SystemSpec, pts: np.ndarray, n_iter: int = N_ITER) -> dict[str, np.ndarray]:
    pts = np.asarray(pts, dtype=float)
    out = K.split_many(spec.params, np.ascontiguousarray(pts[:, 0]),
                       np.ascontiguousarray(pts[:, 1]), n_iter, STOP_TOL)
    return {
        "e_plus": out[:, 0:2],
        "e_minus": out[:, 4:6],
        "converged": (out[:, 2] < CONV_TOL) & (out[:, 6] < CONV_TOL),
    }


def equivariance_residual(spec: SystemSpec, p, n_iter: int = N_ITER) -> float:
    """Angle between Df(p) e_plus(p) and e_plus(f(p))."""
    x, y = _pt(p)
    ex, ey, _, _ = K.eplus(spec.params, x, y, n_iter, STOP_TOL)
    a, b, c, d = K.jac(spec.params, x, y)
    vx, vy = a * ex + b * ey, c * ex + d * ey
    fx, fy = K.fwd(spec.params, x, y)
    gx, gy, _, _ = K.eplus(spec.params, fx, fy, n_iter, STOP_TOL)
    s = abs(vx * gy - vy * gx) / math.hypot(vx, vy)
    return math.asin(min(s, 1.0))


@dataclass(frozen=True)
class PsiValue:
    value: float
    sign: Sign
    order: int
    ball_radius: float = 0.0

    @property
    def log(self) -> float:
        return math.log(self.value)


def log_psi_array(spec: SystemSpec, pts: np.ndarray, sign=Sign.PLUS, N: int = 1,
                  n_iter: int = N_ITER, strict: bool = True) -> np.ndarray:
    """log psi^N_sign at each row of ``pts``.

    With ``strict`` a non-converged splitting raises; otherwise those entries
    are NaN.
    """
    sign = Sign.parse(sign)
    pts = np.ascontiguousarray(pts, dtype=float).reshape(-1, 2)

    def work(chunk):
        v, ok = K.log_psi_many(spec.params, np.ascontiguousarray(chunk[:, 0]),
                               np.ascontiguousarray(chunk[:, 1]), int(sign), int(N),
                               n_iter, STOP_TOL, CONV_TOL)
        return np.column_stack([v, ok])

    res = map_points(work, pts)
    vals, ok = res[:, 0], res[:, 1].astype(bool)
    if not ok.all():
        if strict:
            bad = int(np.flatnonzero(~ok)[0])
            raise NonConvergenceError(f"splitting did not converge at {tuple(pts[bad])}")
        vals = np.where(ok, vals, np.nan)
    return vals


def psi(spec: SystemSpec, p, sign=Sign.PLUS, N: int = 1, n_iter: int = N_ITER) -> PsiValue:
    """psi^N_+(p) = ||Df^N(p) e_plus(p)||, psi^N_-(p) = ||Df^N(p) e_minus(p)||."""
    sign = Sign.parse(sign)
    if N < 1:
        raise ValueError("N must be >= 1")
    x, y = _pt(p)
    v, ok = K.log_psi(spec.params, x, y, int(sign), int(N), n_iter, STOP_TOL, CONV_TOL)
    if not ok:
        raise NonConvergenceError(f"splitting did not converge at {(x, y)}")
    return PsiValue(math.exp(v), sign, int(N), 0.0)


@lru_cache(maxsize=None)
def lattice_offsets(per_radius: int = 16) -> np.ndarray:
    """Unit-disk lattice offsets, spacing 1/per_radius; the cardinal points are included."""
    r = np.arange(-per_radius, per_radius + 1)
    I, J = np.meshgrid(r, r, indexing="ij")
    keep = I * I + J * J <= per_radius * per_radius
    off = np.column_stack([I[keep], J[keep]]).astype(float) / per_radius
    off.setflags(write=False)
    return off


@lru_cache(maxsize=None)
def ring_offsets(n: int = 256) -> np.ndarray:
    t = 2.0 * np.pi * np.arange(n) / n
    off = np.column_stack([np.cos(t), np.sin(t)])
    off.setflags(write=False)
    return off


@lru_cache(maxsize=None)
def ball_offsets(per_radius: int = 16, ring: int = 256) -> np.ndarray:
    """Lattice plus a boundary ring; extremes of psi usually sit on the boundary."""
    off = np.ascontiguousarray(np.vstack([lattice_offsets(per_radius), ring_offsets(ring)]))
    off.setflags(write=False)
    return off


@lru_cache(maxsize=256)
def _global_extreme(key: tuple, sign: int, N: int, grid_n: int) -> tuple[float, bool]:
    P = np.asarray(key)
    g = np.arange(grid_n) / grid_n
    X, Y = np.meshgrid(g, g, indexing="ij")
    v, ok = K.log_psi_many(P, X.ravel(), Y.ravel(), sign, N, N_ITER, STOP_TOL, CONV_TOL)
    return (float(v.min()) if sign > 0 else float(v.max())), bool(ok.all())


def global_log_extreme(spec: SystemSpec, sign=Sign.PLUS, N: int = 1,
                       grid_n: int = GLOBAL_GRID_N) -> float:
    """min (plus) / max (minus) of log psi^N over a whole-torus lattice."""
    val, ok = _global_extreme(spec.key(), int(Sign.parse(sign)), int(N), int(grid_n))
    if not ok:
        raise NonConvergenceError("splitting did not converge on the global grid")
    return val


def log_psi_ball(spec: SystemSpec, p, sign, N: int, eps_ball: float,
                 n_iter: int = N_ITER) -> float:
    sign = Sign.parse(sign)
    if eps_ball < 0:
        raise ValueError("eps_ball must be >= 0")
    x, y = _pt(p)
    if eps_ball >= TORUS_DIAMETER:
        # the closed ball is the whole torus
        return global_log_extreme(spec, sign, N)
    v, ok = K.ball_extreme(spec.params, x, y, float(eps_ball), ball_offsets(),
                           int(sign), int(N), n_iter, STOP_TOL, CONV_TOL)
    if not ok:
        raise NonConvergenceError(f"splitting did not converge in the ball around {(x, y)}")
    return v


def psi_ball(spec: SystemSpec, p, sign=Sign.PLUS, N: int = 1, eps_ball: float = 0.0,
             n_iter: int = N_ITER) -> PsiValue:
    """psi^N_+(p, eps) = min over B_eps(p); psi^N_-(p, eps) = max over B_eps(p).

    The ball is covered by a lattice of spacing eps/16 centred at ``p`` plus
    256 equally spaced points on its boundary circle.
    Balls of radius at least the torus diameter sqrt(1/2) cover the torus and
    use a fixed whole-torus lattice instead.
    """
    v = log_psi_ball(spec, p, sign, N, eps_ball, n_iter)
    return PsiValue(math.exp(v), Sign.parse(sign), int(N), float(eps_ball))


def grid_points(grid_n: int) -> np.ndarray:
    g = np.arange(grid_n) / grid_n
    X, Y = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


@dataclass(frozen=True)
class DominationResult:
    holds: bool
    margin: float
    gamma_max: float
    gamma: float
    grid_n: int


def check_domination(spec: SystemSpec, gamma: float, grid_n: int = 128) -> DominationResult:
    """||Df_-(x)|| < e^{-2 gamma} m(Df_+(x)) on a grid_n x grid_n lattice."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if grid_n < 16:
        raise ValueError("grid_n must be >= 16")
    pts = grid_points(grid_n)
    gap = log_psi_array(spec, pts, Sign.PLUS) - log_psi_array(spec, pts, Sign.MINUS)
    margin = float(np.min(gap - 2.0 * gamma))
    return DominationResult(margin > 0.0, margin, float(np.min(gap) / 2.0), float(gamma), grid_n)
