"""Local unstable curves grown by pushing a short E+ segment forward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .cocycle import Sign, psi_ball, splitting_at, splitting_many
from .systems import SystemSpec, TorusPoint, _pt, iterate, torus_distance

MAX_SPACING = 1e-3
MAX_NODES = 1_000_000
MAX_HALF_LENGTH = 1e-4
SEED_NODES = 9
SLACK = 1e-6


def _wrap(d: np.ndarray) -> np.ndarray:
    return d - np.round(d)


def _push(spec: SystemSpec, pts: np.ndarray, n: int) -> np.ndarray:
    xs, ys = np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])
    for _ in range(n):
        xs, ys = K.fwd_many(spec.params, xs, ys, False)
    return np.column_stack([xs, ys])


@dataclass(frozen=True)
class UnstableSegment:
    """Image under f^generation of the seed {base + t e : 0 <= t <= 2h}.

    ``polyline`` is unwrapped (continuous in the plane) and starts at
    f^generation(base); ``params`` are the seed parameters t of its nodes.
    """

    polyline: np.ndarray
    base: TorusPoint
    arc_length: float
    generation: int
    params: np.ndarray
    direction: np.ndarray
    half_length: float

    @property
    def points(self) -> list[TorusPoint]:
        return [TorusPoint(*p) for p in self.polyline % 1.0]

    @property
    def spacing(self) -> float:
        return float(np.max(np.hypot(*np.diff(self.polyline, axis=0).T))) if len(self.polyline) > 1 else 0.0

    def rows(self):
        t = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(self.polyline, axis=0).T))])
        for ti, (x, y) in zip(t, self.polyline % 1.0):
            yield (float(ti), float(x), float(y))

    columns = ("t", "x", "y")


def _polyline_length(poly: np.ndarray) -> float:
    d = np.diff(poly, axis=0)
    return float(math.fsum(np.hypot(d[:, 0], d[:, 1])))


def _nodes(spec: SystemSpec, base: np.ndarray, direction: np.ndarray, t: np.ndarray, gen: int) -> np.ndarray:
    seed = (base + np.outer(t, direction)) % 1.0
    return _push(spec, seed, gen)


def _unwrap(wrapped: np.ndarray) -> np.ndarray:
    steps = _wrap(np.diff(wrapped, axis=0))
    return np.vstack([wrapped[:1], wrapped[:1] + np.cumsum(steps, axis=0)])


def _refine(spec: SystemSpec, base, direction, t: np.ndarray, pos: np.ndarray, gen: int,
            cap: float) -> tuple[np.ndarray, np.ndarray]:
    """Insert seed midpoints until every chord is at most ``cap`` long."""
    while True:
        gaps = np.hypot(*_wrap(np.diff(pos, axis=0)).T)
        bad = np.flatnonzero(gaps > cap)
        if len(bad) == 0:
            return t, pos
        if len(t) + len(bad) > MAX_NODES:
            raise ValueError("segment needs more than 1e6 nodes; reduce generations or the seed length")
        tm = 0.5 * (t[bad] + t[bad + 1])
        pm = _nodes(spec, base, direction, tm, gen)
        t = np.insert(t, bad + 1, tm)
        pos = np.insert(pos, bad + 1, pm, axis=0)


def grow_unstable_segment(spec: SystemSpec, x, initial_half_length: float = 1e-5,
                          generations: int = 10, max_spacing: float = MAX_SPACING) -> UnstableSegment:
    """Push a seed of length 2h along E+ at f^-g(x) forward g times.

    Nodes are re-refined after every generation by pushing seed midpoints, so
    the polyline never interpolates between images.
    """
    if not 0 < initial_half_length <= MAX_HALF_LENGTH:
        raise ValueError("initial_half_length must lie in (0, 1e-4]")
    if generations < 0:
        raise ValueError("generations must be >= 0")
    g = int(generations)
    base = np.asarray(iterate(spec, x, g, backward=True)[-1], dtype=float)
    sp = splitting_at(spec, base)
    e = sp.e_plus.copy()
    t = np.linspace(0.0, 2.0 * initial_half_length, SEED_NODES)
    pos = (base + np.outer(t, e)) % 1.0
    t, pos = _refine(spec, base, e, t, pos, 0, max_spacing)
    for gen in range(1, g + 1):
        pos = _push(spec, pos, 1)
        t, pos = _refine(spec, base, e, t, pos, gen, max_spacing)
    poly = _unwrap(pos)
    for a in (poly, t, e):
        a.setflags(write=False)
    return UnstableSegment(poly, TorusPoint(*base), _polyline_length(poly), g, t, e,
                           float(initial_half_length))


def push_segment(spec: SystemSpec, seg: UnstableSegment, max_spacing: float = MAX_SPACING) -> UnstableSegment:
    """One more generation, refined from the seed."""
    base = np.asarray(seg.base.as_tuple())
    pos = _push(spec, seg.polyline % 1.0, 1)
    t, pos = _refine(spec, base, seg.direction, seg.params.copy(), pos, seg.generation + 1, max_spacing)
    poly = _unwrap(pos)
    poly.setflags(write=False)
    t.setflags(write=False)
    return UnstableSegment(poly, seg.base, _polyline_length(poly), seg.generation + 1, t,
                           seg.direction, seg.half_length)


def tangent_misalignment(spec: SystemSpec, seg: UnstableSegment) -> float:
    """Largest angle between a chord and the E+ direction at its midpoint."""
    d = np.diff(seg.polyline, axis=0)
    mid = (seg.polyline[:-1] + 0.5 * d) % 1.0
    e = splitting_many(spec, mid)["e_plus"]
    n = np.hypot(d[:, 0], d[:, 1])
    s = np.abs(d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]) / n
    return float(np.max(np.arcsin(np.minimum(s, 1.0))))


def start_defect(spec: SystemSpec, seg: UnstableSegment) -> float:
    """Distance from polyline[0] to f^generation(base)."""
    end = iterate(spec, seg.base, seg.generation)[-1]
    return torus_distance(seg.polyline[0] % 1.0, end)


@dataclass(frozen=True)
class LemmaCheck:
    m0: float
    length_ratio: float
    holds: bool
    slack: float = SLACK

    def to_dict(self) -> dict:
        return {"m0": self.m0, "length_ratio": self.length_ratio, "holds": self.holds, "slack": self.slack}


def check_lemaures(spec: SystemSpec, x, r: float, segment: UnstableSegment) -> LemmaCheck:
    """length(f o segment) / length(segment) >= psi_+(x, r) - 1e-6 for a segment inside B_r(x)."""
    if not r > 0:
        raise ValueError("r must be > 0")
    px, py = _pt(x)
    d = np.hypot(*_wrap(segment.polyline % 1.0 - np.array([px, py])).T)
    if np.max(d) > r:
        raise ValueError("segment exits B_r(x)")
    m0 = psi_ball(spec, (px, py), Sign.PLUS, 1, r).value
    image = push_segment(spec, segment)
    ratio = image.arc_length / segment.arc_length
    return LemmaCheck(m0, ratio, bool(ratio >= m0 - SLACK))


def segment_in_ball(spec: SystemSpec, x, r: float, generations: int = 12,
                    fill: float = 0.5) -> UnstableSegment:
    """An unstable curve starting at x with length about ``fill * r``.

    The seed length is chosen from the growth of a trial segment so that the
    grown curve stays inside B_r(x).
    """
    if not r > 0:
        raise ValueError("r must be > 0")
    h0 = min(MAX_HALF_LENGTH, r * 1e-3)
    probe = grow_unstable_segment(spec, x, h0, generations)
    growth = probe.arc_length / (2 * h0)
    h = min(MAX_HALF_LENGTH, fill * r / (2 * growth))
    return grow_unstable_segment(spec, x, h, generations)
