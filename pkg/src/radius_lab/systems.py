"""Phase space (flat 2-torus), its metric and the example diffeomorphisms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import _kernels as K
from .errors import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class Kind(str, enum.Enum):
    LINEAR = "Linear"
    SHEAR = "ShearPerturbed"
    DA = "DerivedFromAnosov"

    @classmethod
    def parse(cls, name: str) -> "Kind":
        aliases = {
            "linear": cls.LINEAR,
            "shear": cls.SHEAR,
            "shearperturbed": cls.SHEAR,
            "da": cls.DA,
            "derivedfromanosov": cls.DA,
        }
        try:
            return aliases[name.replace("_", "").replace("-", "").lower()]
        except KeyError:
            raise ConfigError(f"unknown system kind {name!r}") from None


_KIND_CODE = {Kind.LINEAR: K.LINEAR, Kind.SHEAR: K.SHEAR, Kind.DA: K.DA}


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(K.frac(float(self.x))))
        object.__setattr__(self, "y", float(K.frac(float(self.y))))

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Matrix2:
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def of(cls, m) -> "Matrix2":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])


@dataclass(frozen=True)
class SystemSpec:
    """A hyperbolic toral automorphism, optionally perturbed.

    ``ShearPerturbed`` is ``matrix o S_eps`` with ``S_eps(x, y) = (x, y + eps sin 2 pi x)``.
    ``DerivedFromAnosov`` is ``matrix o B`` where ``B`` scales the coordinate
    along the unstable eigendirection by ``1 - eps g(rho)`` inside the
    ``da_radius``-ball around ``da_center`` (``g`` is a radial C^2 bump).
    """

    kind: Kind
    matrix: tuple[tuple[int, int], tuple[int, int]] = ((2, 1), (1, 1))
    eps: float = 0.0
    da_center: TorusPoint = TorusPoint(0.0, 0.0)
    da_radius: float = 0.2
    params: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, Kind) else Kind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        try:
            mat = tuple(tuple(int(v) for v in row) for row in self.matrix)
            raw = np.asarray(self.matrix, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"matrix must be a 2x2 integer matrix, got {self.matrix!r}") from None
        if raw.shape != (2, 2) or len(mat) != 2 or any(len(r) != 2 for r in mat):
            raise ConfigError(f"matrix must be 2x2, got {self.matrix!r}")
        if not np.array_equal(raw, np.asarray(mat, dtype=float)):
            raise ConfigError("matrix entries must be integers")
        object.__setattr__(self, "matrix", mat)
        (a, b), (c, d) = mat
        det = a * d - b * c
        if abs(det) != 1:
            raise ConfigError(f"|det matrix| must be 1, got {det}")
        if abs(a + d) <= 2:
            raise ConfigError(f"matrix is not hyperbolic (|trace| = {abs(a + d)} <= 2)")
        if not isinstance(self.da_center, TorusPoint):
            object.__setattr__(self, "da_center", TorusPoint(*self.da_center))
        eps = float(self.eps)
        object.__setattr__(self, "eps", eps)
        if eps < 0 or not math.isfinite(eps):
            raise ConfigError("eps must be finite and >= 0")
        if kind is Kind.LINEAR and eps != 0.0:
            raise ConfigError("Linear systems take eps = 0")
        if kind is Kind.DA:
            if not 0.0 < self.da_radius <= 0.25:
                raise ConfigError("da_radius must lie in (0, 0.25]")
        object.__setattr__(self, "params", self._pack())
        if kind is Kind.DA:
            self._check_da_diffeo()

    @property
    def unstable_eigvec(self) -> np.ndarray:
        m = np.asarray(self.matrix, dtype=float)
        w, v = np.linalg.eig(m)
        e = v[:, int(np.argmax(np.abs(w)))].real
        e = e / np.linalg.norm(e)
        return e if e[0] >= 0 else -e

    @property
    def expansion(self) -> float:
        """Modulus of the expanding eigenvalue of the linear part."""
        (a, b), (c, d) = self.matrix
        tr = a + d
        det = a * d - b * c
        disc = math.sqrt(tr * tr - 4 * det)
        return max(abs((tr + disc) / 2), abs((tr - disc) / 2))

    @property
    def area_preserving(self) -> bool:
        return self.kind is not Kind.DA

    def _pack(self) -> np.ndarray:
        p = np.zeros(K.N_PARAMS)
        (a, b), (c, d) = self.matrix
        det = a * d - b * c
        p[K.P_KIND] = _KIND_CODE[self.kind]
        p[K.P_A:K.P_D + 1] = (a, b, c, d)
        p[K.P_IA:K.P_ID + 1] = (d * det, -b * det, -c * det, a * det)
        p[K.P_EPS] = self.eps
        p[K.P_CX], p[K.P_CY] = self.da_center.x, self.da_center.y
        p[K.P_RAD] = self.da_radius
        p[K.P_UX], p[K.P_UY] = self.unstable_eigvec
        p.setflags(write=False)
        return p

    def _check_da_diffeo(self, grid_n: int = 512) -> None:
        g = (np.arange(grid_n) + 0.5) / grid_n
        X, Y = np.meshgrid(g, g, indexing="ij")
        a, b, c, d = jacobian_arrays(self, X.ravel(), Y.ravel())
        det = a * d - b * c
        if not np.all(det > 0 if self._linear_det() > 0 else det < 0):
            raise ConfigError("DerivedFromAnosov eps too large: Jacobian determinant changes sign")

    def _linear_det(self) -> int:
        (a, b), (c, d) = self.matrix
        return a * d - b * c

    def key(self) -> tuple:
        return tuple(self.params.tolist())

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": self.kind.value,
            "matrix": [list(r) for r in self.matrix],
            "eps": self.eps,
        }
        if self.kind is Kind.DA:
            out["da_center"] = [self.da_center.x, self.da_center.y]
            out["da_radius"] = self.da_radius
        return out

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any]) -> "SystemSpec":
        if "kind" not in cfg:
            raise ConfigError("system config needs a 'kind' key")
        kw: dict[str, Any] = {"kind": Kind.parse(str(cfg["kind"]))}
        if "matrix" in cfg:
            kw["matrix"] = cfg["matrix"]
        if "eps" in cfg:
            kw["eps"] = cfg["eps"]
        if "da_center" in cfg:
            kw["da_center"] = TorusPoint(*cfg["da_center"])
        if "da_radius" in cfg:
            kw["da_radius"] = float(cfg["da_radius"])
        return cls(**kw)

    @classmethod
    def from_toml(cls, path: str | Path) -> "SystemSpec":
        cfg = load_toml(path)
        return cls.from_mapping(cfg.get("system", cfg))


def load_toml(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def cat_map() -> SystemSpec:
    return SystemSpec(Kind.LINEAR)


def shear(eps: float, matrix=((2, 1), (1, 1))) -> SystemSpec:
    return SystemSpec(Kind.SHEAR, matrix=matrix, eps=eps)


def derived_from_anosov(eps: float, radius: float = 0.2, center=(0.0, 0.0),
                        matrix=((2, 1), (1, 1))) -> SystemSpec:
    return SystemSpec(Kind.DA, matrix=matrix, eps=eps, da_center=TorusPoint(*center), da_radius=radius)


def _pt(p) -> tuple[float, float]:
    if isinstance(p, TorusPoint):
        return p.x, p.y
    return float(p[0]) % 1.0, float(p[1]) % 1.0


def apply(spec: SystemSpec, p) -> TorusPoint:
    return TorusPoint(*K.fwd(spec.params, *_pt(p)))


def apply_inverse(spec: SystemSpec, p) -> TorusPoint:
    try:
        return TorusPoint(*K.inv(spec.params, *_pt(p)))
    except RuntimeError as exc:
        from .errors import NonConvergenceError

        raise NonConvergenceError(str(exc)) from exc


def jacobian(spec: SystemSpec, p) -> Matrix2:
    return Matrix2(*K.jac(spec.params, *_pt(p)))


def jacobian_arrays(spec: SystemSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Jacobian entries (a, b, c, d) at many points, shape (4, n)."""
    return K.jac_many(spec.params, np.ascontiguousarray(xs, dtype=float),
                      np.ascontiguousarray(ys, dtype=float))


def apply_many(spec: SystemSpec, pts: np.ndarray, backward: bool = False) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    try:
        ox, oy = K.fwd_many(spec.params, np.ascontiguousarray(pts[:, 0]),
                            np.ascontiguousarray(pts[:, 1]), backward)
    except RuntimeError as exc:
        from .errors import NonConvergenceError

        raise NonConvergenceError(str(exc)) from exc
    return np.column_stack([ox, oy])


def iterate(spec: SystemSpec, p, n: int, backward: bool = False) -> np.ndarray:
    """Orbit points p, f(p), ..., f^n(p) as an (n + 1, 2) array."""
    xs, ys = K.orbit(spec.params, *_pt(p), int(n), backward)
    return np.column_stack([xs, ys])


def torus_distance(p, q) -> float:
    px, py = (p.x, p.y) if isinstance(p, TorusPoint) else (float(p[0]), float(p[1]))
    qx, qy = (q.x, q.y) if isinstance(q, TorusPoint) else (float(q[0]), float(q[1]))
    return math.hypot(K.wrap(px - qx), K.wrap(py - qy))


def torus_distances(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorised flat-torus distance between (n, 2) point arrays."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    d -= np.floor(d + 0.5)
    return np.hypot(d[..., 0], d[..., 1])
