"""Return times, Kac's identity and the integrated radius function."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels as K
from .blocks import PAST_STEPS, SEED_RADIUS, certify_radius
from .cocycle import (CONV_TOL, N_ITER, STOP_TOL, Sign, ball_offsets, global_log_extreme,
                      log_psi_array, psi_ball)
from .errors import ConfigError, NonConvergenceError
from .parallel import chunks, pmap, sample_rng, uniform_points
from .radii import CHART_RADIUS, HoelderEstimate
from .systems import SystemSpec, TorusPoint, _pt

DEFAULT_CAP = 100_000
MIN_IN_REGION = 100
_EMPTY_MASK = np.zeros((0, 0), dtype=np.bool_)


class Direction(str, enum.Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"


class TestFunction(str, enum.Enum):
    ONE = "One"
    LOG_PSI_PLUS = "LogPsiPlus"
    GRID_FIELD = "GridField"

    @classmethod
    def parse(cls, s) -> "TestFunction":
        if isinstance(s, TestFunction):
            return s
        key = str(s).strip().lower()
        if key in ("one", "1", "const", "constant"):
            return cls.ONE
        if key in ("logpsi+", "logpsiplus", "log_psi_plus", "logpsi"):
            return cls.LOG_PSI_PLUS
        if key in ("grid", "field", "gridfield", "custom"):
            return cls.GRID_FIELD
        raise ValueError(f"unknown test function {s!r}")


# ---------------------------------------------------------------- regions

@dataclass(frozen=True)
class Region:
    """Closed ball (radius = inf for the whole torus), optionally intersected
    with a grid indicator whose cell (i, j) covers [i/g, (i+1)/g) x [j/g, (j+1)/g)."""

    cx: float = 0.0
    cy: float = 0.0
    radius: float = math.inf
    mask: np.ndarray = field(default_factory=lambda: _EMPTY_MASK, compare=False)
    descriptor: str = "whole"

    @property
    def is_ball(self) -> bool:
        return self.radius < math.inf

    @property
    def has_mask(self) -> bool:
        return self.mask.shape[0] > 0

    def base_area(self) -> float:
        """Area of the sampling envelope (the ball, or the torus)."""
        return math.pi * self.radius ** 2 if self.is_ball else 1.0

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return K.region_hits(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
                             self.cx, self.cy, self.radius, self.mask)

    def with_mask(self, mask: np.ndarray, tag: str) -> "Region":
        return replace(self, mask=np.ascontiguousarray(mask, dtype=np.bool_),
                       descriptor=f"{self.descriptor}&{tag}")

    def grid_area(self, n: int = 1024) -> float:
        g = (np.arange(n) + 0.5) / n
        X, Y = np.meshgrid(g, g, indexing="ij")
        return float(self.contains(np.column_stack([X.ravel(), Y.ravel()])).mean())


def whole_torus() -> Region:
    return Region()


def ball(cx: float, cy: float, r: float) -> Region:
    if not r > 0:
        raise ConfigError("ball radius must be > 0")
    if r >= 0.5:
        raise ConfigError("ball radius must be < 0.5 so the ball does not wrap onto itself")
    return Region(K.frac(cx), K.frac(cy), float(r), _EMPTY_MASK, f"ball:{cx!r},{cy!r},{r!r}")


def load_mask(path: str | Path) -> np.ndarray:
    p = Path(path)
    try:
        arr = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read grid indicator {p}: {e}") from e
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ConfigError("grid indicator must be a non-empty square array")
    return np.ascontiguousarray(arr != 0)


def parse_region(text: str) -> Region:
    """``ball:cx,cy,r``, ``whole``, ``grid-indicator:path`` or an ``&``-joined pair."""
    parts = [t.strip() for t in str(text).split("&") if t.strip()]
    if not parts:
        raise ConfigError("empty region descriptor")
    reg = whole_torus()
    seen_ball = False
    for part in parts:
        kind, _, arg = part.partition(":")
        kind = kind.lower()
        if kind == "ball":
            if seen_ball:
                raise ConfigError("at most one ball per region")
            try:
                cx, cy, r = (float(v) for v in arg.split(","))
            except ValueError as e:
                raise ConfigError(f"bad ball descriptor {part!r}") from e
            b = ball(cx, cy, r)
            reg = replace(b, mask=reg.mask) if reg.has_mask else b
            seen_ball = True
        elif kind in ("grid-indicator", "grid"):
            reg = reg.with_mask(load_mask(arg), part) if reg.descriptor != "whole" else \
                replace(reg, mask=load_mask(arg), descriptor=part)
        elif kind in ("whole", "torus"):
            continue
        else:
            raise ConfigError(f"unknown region kind {kind!r}")
    if reg.is_ball and reg.has_mask:
        reg = replace(reg, descriptor=str(text))
    return reg


def sample_region(region: Region, seed: int, n: int, chunk: int = 4096) -> tuple[np.ndarray, int]:
    """Candidates uniform on the envelope (ball or torus); returns those inside
    the region and the number drawn."""
    parts = []
    for c, (lo, hi) in enumerate(chunks(n, chunk)):
        u = sample_rng(seed, c).random((hi - lo, 2))
        if region.is_ball:
            rad = region.radius * np.sqrt(u[:, 0])
            th = 2 * np.pi * u[:, 1]
            pts = (np.column_stack([region.cx + rad * np.cos(th), region.cy + rad * np.sin(th)])) % 1.0
        else:
            pts = u
        parts.append(pts)
    pts = np.concatenate(parts) if parts else np.empty((0, 2))
    keep = region.contains(pts) if len(pts) else np.zeros(0, dtype=bool)
    return pts[keep], len(pts)


def certified_region(spec: SystemSpec, r0: float, base: Region, grid_n: int = 32,
                     steps: int = PAST_STEPS, seed_radius: float = SEED_RADIUS) -> Region:
    """A_r0: cells of ``base`` whose centre receives radius >= r0 from the
    recursion started ``steps`` steps in the past."""
    g = (np.arange(grid_n) + 0.5) / grid_n
    X, Y = np.meshgrid(g, g, indexing="ij")
    centres = np.column_stack([X.ravel(), Y.ravel()])
    inside = np.flatnonzero(base.contains(centres))

    def cert(i):
        return certify_radius(spec, centres[i], steps, seed_radius) >= r0

    ok = pmap(cert, list(inside))
    mask = np.zeros(grid_n * grid_n, dtype=bool)
    mask[inside[np.asarray(ok, dtype=bool)]] = True
    mask = mask.reshape(grid_n, grid_n)
    if base.has_mask:
        mask &= _resample(base.mask, grid_n)
    return replace(base, mask=mask, descriptor=f"{base.descriptor}&certified:r0={r0!r},grid={grid_n}")


def _resample(mask: np.ndarray, n: int) -> np.ndarray:
    g = mask.shape[0]
    idx = np.minimum(((np.arange(n) + 0.5) / n * g).astype(int), g - 1)
    return mask[np.ix_(idx, idx)]


# ---------------------------------------------------------------- return times

@dataclass(frozen=True)
class ReturnRecord:
    x: TorusPoint
    phi: int
    orbit_cap_hit: bool
    direction: Direction = Direction.FORWARD


def return_time(spec: SystemSpec, x, A: Region, direction=Direction.FORWARD,
                cap: int = DEFAULT_CAP) -> ReturnRecord:
    """phi = min{n > 1 : f^{+-n}(x) in A}; ``orbit_cap_hit`` when none up to ``cap``."""
    direction = Direction(direction)
    px, py = _pt(x)
    n = K.first_return(spec.params, px, py, direction is Direction.BACKWARD,
                       A.cx, A.cy, A.radius, A.mask, int(cap))
    hit = n > cap
    return ReturnRecord(TorusPoint(px, py), int(min(n, cap)), bool(hit), direction)


def return_times(spec: SystemSpec, pts: np.ndarray, A: Region, direction=Direction.FORWARD,
                 cap: int = DEFAULT_CAP) -> np.ndarray:
    """phi for each row; cap + 1 marks a miss."""
    back = Direction(direction) is Direction.BACKWARD

    def work(s):
        return np.array([K.first_return(spec.params, px, py, back, A.cx, A.cy, A.radius, A.mask, cap)
                         for px, py in pts[s[0]:s[1]]], dtype=np.int64)

    parts = pmap(work, chunks(len(pts), 1024))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


# ---------------------------------------------------------------- Kac

@dataclass(frozen=True)
class KacResult:
    lhs: float
    rhs: float
    rel_err: float
    area: float
    mean_return: float
    n_in_region: int
    n_drawn: int
    low_confidence: bool
    capped: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "lhs", "rhs", "rel_err", "area", "mean_return", "n_in_region", "n_drawn",
            "low_confidence", "capped")}


def _field_values(pts: np.ndarray, field_grid: np.ndarray) -> np.ndarray:
    g = field_grid.shape[0]
    i = np.minimum((pts[:, 0] * g).astype(int), g - 1)
    j = np.minimum((pts[:, 1] * g).astype(int), g - 1)
    return field_grid[i, j]


def kac_verify(spec: SystemSpec, A: Region, test_function=TestFunction.LOG_PSI_PLUS,
               n_samples: int = 10_000, orbit_cap: int = DEFAULT_CAP, seed: int = 0,
               field_grid: Optional[np.ndarray] = None) -> KacResult:
    """Both sides of Kac's identity by Monte Carlo, with returns at n > 1.

    lhs averages psi over uniform torus points. rhs is area(A) times the mean
    excursion sum over points uniform in A; area(A) is the envelope area
    times the accepted fraction. Streams: lhs uses (seed, c), the A-side
    (seed + 1, c).
    """
    if not spec.area_preserving:
        raise ConfigError("Kac verification needs an area-preserving system")
    tf = TestFunction.parse(test_function)
    if tf is TestFunction.GRID_FIELD:
        if field_grid is None:
            raise ConfigError("grid field test function needs field_grid")
        field_grid = np.ascontiguousarray(field_grid, dtype=float)
    else:
        field_grid = np.zeros((0, 0))

    xs = uniform_points(seed, n_samples)
    if tf is TestFunction.ONE:
        vals = np.ones(len(xs))
    elif tf is TestFunction.LOG_PSI_PLUS:
        vals = log_psi_array(spec, xs, Sign.PLUS)
    else:
        vals = _field_values(xs, field_grid)
    lhs = math.fsum(vals) / len(vals)

    inA, drawn = sample_region(A, seed + 1, n_samples)
    kind = {TestFunction.ONE: 0, TestFunction.LOG_PSI_PLUS: 1, TestFunction.GRID_FIELD: 2}[tf]

    def work(s):
        out = np.empty((s[1] - s[0], 3))
        for i, (px, py) in enumerate(inA[s[0]:s[1]]):
            phi, tot, ok = K.kac_excursion(spec.params, px, py, A.cx, A.cy, A.radius, A.mask,
                                           orbit_cap, kind, field_grid, N_ITER, STOP_TOL, CONV_TOL)
            if not ok:
                raise NonConvergenceError(f"splitting did not converge at {(px, py)}")
            out[i] = (phi, tot, phi > orbit_cap)
        return out

    parts = pmap(work, chunks(len(inA), 512))
    res = np.concatenate(parts) if parts else np.empty((0, 3))
    n_in = len(inA)
    area = A.base_area() * n_in / drawn if drawn else 0.0
    if n_in == 0:
        return KacResult(lhs, math.nan, math.nan, area, math.nan, 0, drawn, True, 0)
    rhs = area * math.fsum(res[:, 1]) / n_in
    rel = abs(lhs - rhs) / max(abs(lhs), 1e-12)
    return KacResult(lhs, rhs, rel, area, math.fsum(res[:, 0]) / n_in, n_in, drawn,
                     n_in < MIN_IN_REGION, int(res[:, 2].sum()))


# ---------------------------------------------------------------- measurable radius

@dataclass(frozen=True)
class RadiusEntry:
    """r_plus at x, built along the backward return path.

    ``path`` holds f^{-phi}(x), ..., f^{-1}(x) (forward order) and ``radii``
    the recursion r_0 = r0, r_{i+1} = psi_+(path_i, r_i) r_i; r_plus = radii[-1].
    With the base-case override, points of A get r0 directly and an empty path.
    """

    x: TorusPoint
    phi: int
    r_plus: float
    path: np.ndarray
    radii: np.ndarray
    in_A: bool


@dataclass(frozen=True)
class MeasurableRadius:
    entries: tuple
    r0: float
    A_r0_spec: str
    base_case_override: bool = False

    @property
    def r_plus(self) -> np.ndarray:
        return np.array([e.r_plus for e in self.entries])

    @property
    def phi(self) -> np.ndarray:
        return np.array([e.phi for e in self.entries])

    @property
    def points(self) -> np.ndarray:
        return np.array([e.x.as_tuple() for e in self.entries])

    def r_plus_at(self) -> dict:
        return {e.x: e.r_plus for e in self.entries}

    def rows(self):
        for e in self.entries:
            yield (e.x.x, e.x.y, e.phi, e.r_plus)

    columns = ("x", "y", "phi", "r_plus")


def _path_radii(spec: SystemSpec, path: np.ndarray, r0: float) -> np.ndarray:
    glob = global_log_extreme(spec, Sign.PLUS, 1)
    with np.errstate(over="ignore", invalid="ignore"):
        r, _, ok, _ = K.radius_recursion(spec.params, np.ascontiguousarray(path[:, 0]),
                                         np.ascontiguousarray(path[:, 1]), float(r0), ball_offsets(),
                                         glob, CHART_RADIUS, False, N_ITER, STOP_TOL, CONV_TOL)
    if not ok:
        raise NonConvergenceError("splitting did not converge along a return path")
    return r


def measurable_radius(spec: SystemSpec, r0: float, A_r0: Region, x, orbit_cap: int = DEFAULT_CAP,
                      base_case_override: bool = False) -> RadiusEntry:
    """r_plus(x) = prod_{i<phi} psi_+(f^{i-phi}x, r_i) * r0 with
    phi = min{n > 1 : f^{-n}(x) in A_r0}."""
    if not r0 > 0:
        raise ValueError("r0 must be > 0")
    px, py = _pt(x)
    inA = bool(A_r0.contains(np.array([[px, py]]))[0])
    if base_case_override and inA:
        return RadiusEntry(TorusPoint(px, py), 0, float(r0), np.empty((0, 2)), np.array([r0]), True)
    rec = return_time(spec, (px, py), A_r0, Direction.BACKWARD, orbit_cap)
    if rec.orbit_cap_hit:
        raise NonConvergenceError(f"backward orbit of {(px, py)} did not return within {orbit_cap}")
    bx, by = K.orbit(spec.params, px, py, rec.phi, True)
    path = np.column_stack([bx[1:], by[1:]])[::-1].copy()
    radii = _path_radii(spec, path, r0)
    path.setflags(write=False)
    radii.setflags(write=False)
    return RadiusEntry(TorusPoint(px, py), rec.phi, float(radii[-1]), path, radii, inA)


def recompute_entry(spec: SystemSpec, entry: RadiusEntry) -> float:
    """Independent replay of the stored path with psi_ball."""
    r = entry.radii[0]
    for p in entry.path:
        r = psi_ball(spec, p, Sign.PLUS, 1, r).value * r
    return r


def measurable_radius_sample(spec: SystemSpec, r0: float, A_r0: Region, n_samples: int,
                             seed: int = 0, orbit_cap: int = DEFAULT_CAP,
                             base_case_override: bool = False) -> MeasurableRadius:
    """Entries at n_samples uniform torus points (streams (seed, c))."""
    pts = uniform_points(seed, n_samples)
    entries = pmap(lambda p: measurable_radius(spec, r0, A_r0, p, orbit_cap, base_case_override), list(pts))
    return MeasurableRadius(tuple(entries), float(r0), A_r0.descriptor, base_case_override)


@dataclass(frozen=True)
class IntegratedCheck:
    le_plus: float
    main_rhs: float
    jensen_rhs: float
    mean_log_ratio: float
    log_mean_ratio: float
    mean_r: float
    main_holds: bool
    jensen_holds: bool
    r0_qualifies: bool
    mean_r_holds: Optional[bool]
    jensen_ordering: bool

    @property
    def holds(self) -> bool:
        return self.main_holds and self.jensen_holds and self.mean_r_holds is not False

    @property
    def margin(self) -> float:
        return self.main_rhs - self.le_plus

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "le_plus", "main_rhs", "jensen_rhs", "mean_log_ratio", "log_mean_ratio", "mean_r",
            "main_holds", "jensen_holds", "r0_qualifies", "mean_r_holds", "jensen_ordering")}
        d["holds"] = self.holds
        return d


def _fmean(v: np.ndarray) -> float:
    if np.any(np.isinf(v)):
        return math.inf
    return math.fsum(v) / len(v)


def check_integrated_inequality(sample: MeasurableRadius, hoelder: HoelderEstimate,
                                le_plus: float) -> IntegratedCheck:
    """Monte Carlo over uniform samples of

        LE+ <= E log(r+/r0) + C E r+^alpha              (main)
        LE+ <= log E(r+/r0) + C (E r+)^alpha            (Jensen)
        E r+ >= r0   when r0 <= (LE+/C)^(1/alpha)
    """
    r = sample.r_plus
    if len(r) < 1000:
        raise ValueError("need at least 1000 samples")
    r0, C, a = sample.r0, hoelder.C, hoelder.alpha
    with np.errstate(over="ignore"):
        mlog = _fmean(np.log(r / r0))
        mr = _fmean(r)
        mra = _fmean(np.power(r, a))
    lmean = math.log(mr / r0) if math.isfinite(mr) else math.inf
    pen_main = 0.0 if C == 0 else C * mra
    pen_j = 0.0 if C == 0 else C * mr ** a
    main_rhs = mlog + pen_main
    jensen_rhs = lmean + pen_j
    qualifies = C == 0 or r0 <= (le_plus / C) ** (1 / a)
    return IntegratedCheck(
        float(le_plus), main_rhs, jensen_rhs, mlog, lmean, mr,
        bool(le_plus <= main_rhs), bool(le_plus <= jensen_rhs), bool(qualifies),
        bool(mr >= r0) if qualifies else None, bool(lmean >= mlog - 1e-12),
    )
