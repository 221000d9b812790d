"""Points of extended n-space, balls, wedges, cylindrical coordinates and the
chordal metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

TWO_PI = 2.0 * math.pi
ANGLE_EPS = 1e-10


class _Infinity:
    """The point at infinity. Use the module singleton ``INF``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

ExtPoint = Union[np.ndarray, _Infinity]


class DimensionError(ValueError):
    pass


def is_inf(x) -> bool:
    return x is INF


def as_point(x) -> ExtPoint:
    """Coerce a coordinate sequence (or ``INF``/"inf") to an ExtPoint."""
    if x is INF or (isinstance(x, str) and x.lower() == "inf"):
        return INF
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise DimensionError(f"point must be a flat vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("finite point has non-finite coordinates; use INF")
    return p


def unit(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def chordal_distance(x: ExtPoint, y: ExtPoint) -> float:
    if x is INF and y is INF:
        return 0.0
    if x is INF or y is INF:
        p = y if x is INF else x
        return 1.0 / math.sqrt(1.0 + float(p @ p))
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    d = float(np.linalg.norm(x - y))
    return d / (math.sqrt(1.0 + float(x @ x)) * math.sqrt(1.0 + float(y @ y)))


def chordal_diameter(points: Iterable[ExtPoint]) -> float:
    pts = list(points)
    if not pts:
        raise ValueError("chordal diameter of an empty set")
    best = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            best = max(best, chordal_distance(pts[i], pts[j]))
    return best


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_point(self.center)
        if c is INF:
            raise ValueError("ball center must be finite")
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, X: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.atleast_2d(X) - self.center, axis=1) < self.radius

    def to_json(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}

    @classmethod
    def from_json(cls, d: dict) -> "Ball":
        return cls(np.asarray(d["center"], dtype=float), float(d["radius"]))


@dataclass(frozen=True)
class CylCoords:
    r: float
    phi: float
    z: tuple = ()


def normalize_angle(phi):
    """Map angles into [0, 2pi)."""
    out = np.mod(phi, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out) if isinstance(out, np.ndarray) else (0.0 if out >= TWO_PI else float(out))


def angle_in_interval(phi, start: float, width: float, eps: float = ANGLE_EPS):
    """Wrap-aware test for ``start <= phi <= start + width`` (closed, eps slack)."""
    off = np.mod(np.asarray(phi) - start, TWO_PI)
    off = np.where(off > TWO_PI - eps, 0.0, off)
    return off <= width + eps


def to_cylindrical(x) -> CylCoords:
    x = np.asarray(x, dtype=float)
    r = math.hypot(x[0], x[1])
    phi = 0.0 if r == 0.0 else normalize_angle(math.atan2(x[1], x[0]))
    return CylCoords(r, phi, tuple(float(v) for v in x[2:]))


def from_cylindrical(c: CylCoords, n: int | None = None) -> np.ndarray:
    z = list(c.z)
    if n is not None and len(z) != n - 2:
        raise DimensionError(f"expected {n - 2} axial coordinates, got {len(z)}")
    return np.array([c.r * math.cos(c.phi), c.r * math.sin(c.phi), *z])


def cyl_batch(X: np.ndarray):
    """Vectorized cylindrical coordinates: returns (r, phi in [0, 2pi), rest)."""
    r = np.hypot(X[:, 0], X[:, 1])
    phi = normalize_angle(np.arctan2(X[:, 1], X[:, 0]))
    phi = np.where(r == 0.0, 0.0, phi)
    return r, phi, X[:, 2:]


def from_cyl_batch(r, phi, rest) -> np.ndarray:
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), rest])


def check_orthogonal(Q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"frame must be square, got shape {Q.shape}")
    if np.max(np.abs(Q.T @ Q - np.eye(Q.shape[0]))) > tol:
        raise ValueError("frame is not orthogonal")
    return Q


@dataclass(frozen=True, eq=False)
class Wedge:
    """Points whose angle, measured in ``frame`` coordinates ``frame @ x``,
    lies in (gamma, gamma + alpha)."""

    gamma: float
    alpha: float
    frame: np.ndarray = field(default=None)

    def __post_init__(self):
        if not 0.0 < self.alpha < TWO_PI:
            raise ValueError(f"wedge opening must lie in (0, 2pi), got {self.alpha}")
        object.__setattr__(self, "gamma", normalize_angle(float(self.gamma)))
        if self.frame is not None:
            object.__setattr__(self, "frame", check_orthogonal(self.frame))

    def local(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return X if self.frame is None else X @ self.frame.T

    def angles(self, X: np.ndarray) -> np.ndarray:
        return cyl_batch(self.local(X))[1]

    def contains(self, X: np.ndarray, eps: float = 0.0) -> np.ndarray:
        """Open-wedge membership. ``eps > 0`` widens the angular interval on
        both sides, ``eps < 0`` shrinks it."""
        r, phi, _ = cyl_batch(self.local(X))
        off = np.mod(phi - self.gamma, TWO_PI)
        if eps > 0:
            inside = (off < self.alpha + eps) | (off > TWO_PI - eps)
        else:
            inside = (off > -eps) & (off < self.alpha + eps)
        return inside & (r > 0)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "frame": None if self.frame is None else self.frame.tolist(),
        }
