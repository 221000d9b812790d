"""Moebius transformations of extended n-space as generator lists, the unit
ball self-maps T_a, and the normalization of a two-ball union onto a wedge."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .geometry import INF, Ball, DimensionError, ExtPoint, Wedge, as_point, check_orthogonal

# |x|^2 below this is treated as the pole of an inversion
_POLE_TOL = 1e-300
# relative tolerance for "sphere passes through the inversion center"
_PLANE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Translation:
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float))

    def apply(self, X, inf):
        return np.where(inf[:, None], X, X + self.vector), inf

    def inverse(self):
        return Translation(-self.vector)

    def to_json(self):
        return {"type": "translation", "vector": self.vector.tolist()}


@dataclass(frozen=True)
class Scaling:
    factor: float

    def __post_init__(self):
        if not self.factor > 0:
            raise ValueError(f"scaling factor must be positive, got {self.factor}")
        object.__setattr__(self, "factor", float(self.factor))

    def apply(self, X, inf):
        return np.where(inf[:, None], X, X * self.factor), inf

    def inverse(self):
        return Scaling(1.0 / self.factor)

    def to_json(self):
        return {"type": "scaling", "factor": self.factor}


@dataclass(frozen=True, eq=False)
class Orthogonal:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", check_orthogonal(self.matrix))

    def apply(self, X, inf):
        return np.where(inf[:, None], X, X @ self.matrix.T), inf

    def inverse(self):
        return Orthogonal(self.matrix.T.copy())

    def to_json(self):
        return {"type": "orthogonal", "matrix": self.matrix.tolist()}


@dataclass(frozen=True)
class Inversion:
    """Inversion in the unit sphere, x -> x/|x|^2, swapping 0 and infinity."""

    def apply(self, X, inf):
        sq = np.einsum("ij,ij->i", X, X)
        to_inf = ~inf & (sq <= _POLE_TOL)
        from_inf = inf
        safe = np.where(sq > _POLE_TOL, sq, 1.0)
        Y = X / safe[:, None]
        Y[from_inf] = 0.0
        Y[to_inf] = 0.0
        return Y, to_inf

    def inverse(self):
        return self

    def to_json(self):
        return {"type": "inversion"}


Generator = Union[Translation, Scaling, Orthogonal, Inversion]


@dataclass(frozen=True)
class MobiusMap:
    """Composition of generators applied left to right."""

    generators: Tuple[Generator, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))

    def apply(self, X: np.ndarray, inf: np.ndarray | None = None):
        """Batch evaluation. Returns ``(Y, at_infinity)``; rows of ``Y`` at
        infinity hold zeros and must be read through the mask."""
        X = np.array(X, dtype=float, ndmin=2)
        inf = np.zeros(len(X), dtype=bool) if inf is None else np.asarray(inf, dtype=bool)
        for g in self.generators:
            X, inf = g.apply(X, inf)
        return X, inf

    def __call__(self, x: ExtPoint) -> ExtPoint:
        return evaluate(self, x)

    def inverse(self) -> "MobiusMap":
        return MobiusMap(tuple(g.inverse() for g in reversed(self.generators)))

    def then(self, other: "MobiusMap") -> "MobiusMap":
        """``other`` after ``self``."""
        return MobiusMap(self.generators + other.generators)

    @property
    def orientation(self) -> int:
        s = 1
        for g in self.generators:
            if isinstance(g, Inversion):
                s = -s
            elif isinstance(g, Orthogonal) and np.linalg.det(g.matrix) < 0:
                s = -s
        return s

    def to_json(self) -> dict:
        return {"type": "mobius", "generators": [g.to_json() for g in self.generators]}

    @classmethod
    def from_json(cls, d: dict) -> "MobiusMap":
        gens = []
        for g in d["generators"]:
            t = g["type"]
            if t == "translation":
                gens.append(Translation(np.asarray(g["vector"], dtype=float)))
            elif t == "scaling":
                gens.append(Scaling(g["factor"]))
            elif t == "orthogonal":
                gens.append(Orthogonal(np.asarray(g["matrix"], dtype=float)))
            elif t == "inversion":
                gens.append(Inversion())
            else:
                raise ValueError(f"unknown Moebius generator {t!r}")
        return cls(tuple(gens))


def identity() -> MobiusMap:
    return MobiusMap(())


def compose(m1: MobiusMap, m2: MobiusMap) -> MobiusMap:
    """The map x -> m1(m2(x))."""
    return m2.then(m1)


def evaluate(m: MobiusMap, x: ExtPoint) -> ExtPoint:
    x = as_point(x)
    if x is INF:
        dim = _dimension(m)
        if dim is None:
            dim = 1
        Y, inf = m.apply(np.zeros((1, dim)), np.array([True]))
    else:
        dim = _dimension(m)
        if dim is not None and dim != x.shape[0]:
            raise DimensionError(f"map acts on R^{dim}, point is in R^{x.shape[0]}")
        Y, inf = m.apply(x[None, :])
    return INF if inf[0] else Y[0]


def _dimension(m: MobiusMap):
    for g in m.generators:
        if isinstance(g, Translation):
            return g.vector.shape[0]
        if isinstance(g, Orthogonal):
            return g.matrix.shape[0]
    return None


def canonical_T(a) -> MobiusMap:
    """The Moebius self-map of the unit ball with T_a(a) = 0 fixing +-a/|a|,

        T_a(x) = ((1-|a|^2)(x-a) - |x-a|^2 a) / (1 - 2 x.a + |x|^2 |a|^2).

    Factored as x -> (1-|a|^2) J(J(x) - a) - a with J the inversion in the
    unit sphere. The single-inversion form (inversion in the sphere centred
    at a/|a|^2 orthogonal to the unit sphere, then a reflection) is the same
    map but loses about |a|^-1 ulps for small a, since it passes through
    points of size 1/|a|.
    """
    a = np.asarray(a, dtype=float)
    na = float(np.linalg.norm(a))
    if na >= 1.0:
        raise ValueError(f"T_a needs |a| < 1, got |a| = {na}")
    if na == 0.0:
        return identity()
    return MobiusMap((Inversion(), Translation(-a), Inversion(), Scaling(1.0 - na * na), Translation(-a)))


# ---------------------------------------------------------------------------
# images of balls, ball complements and half-spaces


@dataclass(frozen=True, eq=False)
class Region:
    """An open ball (``kind='ball'``), the exterior of a closed ball
    (``'complement'``) or a half-space ``{x . normal > offset}``."""

    kind: str
    center: np.ndarray | None = None
    radius: float | None = None
    normal: np.ndarray | None = None
    offset: float | None = None

    @classmethod
    def from_ball(cls, b: Ball) -> "Region":
        return cls("ball", b.center.copy(), b.radius)

    def contains(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.kind == "halfspace":
            return X @ self.normal > self.offset
        d = np.linalg.norm(X - self.center, axis=1)
        return d < self.radius if self.kind == "ball" else d > self.radius

    def as_ball(self) -> Ball:
        if self.kind != "ball":
            raise ValueError(f"region is a {self.kind}, not a ball")
        return Ball(self.center, self.radius)


def _region_step(g: Generator, R: Region) -> Region:
    if isinstance(g, Translation):
        if R.kind == "halfspace":
            return Region("halfspace", normal=R.normal, offset=R.offset + float(R.normal @ g.vector))
        return Region(R.kind, R.center + g.vector, R.radius)
    if isinstance(g, Scaling):
        if R.kind == "halfspace":
            return Region("halfspace", normal=R.normal, offset=R.offset * g.factor)
        return Region(R.kind, R.center * g.factor, R.radius * g.factor)
    if isinstance(g, Orthogonal):
        if R.kind == "halfspace":
            return Region("halfspace", normal=g.matrix @ R.normal, offset=R.offset)
        return Region(R.kind, g.matrix @ R.center, R.radius)
    # inversion
    if R.kind == "halfspace":
        nn = float(np.linalg.norm(R.normal))
        if abs(R.offset) <= _PLANE_TOL * nn:
            return Region("halfspace", normal=R.normal, offset=0.0)
        c = R.normal / (2.0 * R.offset)
        rad = nn / (2.0 * abs(R.offset))
        return Region("ball" if R.offset > 0 else "complement", c, rad)
    c, r = R.center, R.radius
    pw = float(c @ c) - r * r
    if abs(pw) <= _PLANE_TOL * max(r * r, 1e-300):
        # sphere through the origin becomes the plane {y . c = 1/2}
        if R.kind == "ball":
            return Region("halfspace", normal=c.copy(), offset=0.5)
        return Region("halfspace", normal=-c, offset=-0.5)
    c2 = c / pw
    r2 = r / abs(pw)
    origin_inside = pw < 0
    if R.kind == "ball":
        return Region("complement" if origin_inside else "ball", c2, r2)
    return Region("ball" if origin_inside else "complement", c2, r2)


def image_region(m: MobiusMap, R: Region | Ball) -> Region:
    """Exact image of a ball, ball exterior or half-space under ``m``."""
    if isinstance(R, Ball):
        R = Region.from_ball(R)
    for g in m.generators:
        R = _region_step(g, R)
    return R


# ---------------------------------------------------------------------------
# two-ball unions


def _check_proper(b1: Ball, b2: Ball) -> float:
    if b1.dim != b2.dim:
        raise DimensionError("balls live in different dimensions")
    d = float(np.linalg.norm(b2.center - b1.center))
    if not abs(b2.radius - b1.radius) < d < b1.radius + b2.radius:
        raise ValueError(
            "balls do not intersect properly: need |r2-r1| < |x1-x2| < r1+r2, "
            f"got |r2-r1|={abs(b2.radius - b1.radius):.6g}, d={d:.6g}, r1+r2={b1.radius + b2.radius:.6g}"
        )
    return d


def intersection_angle(b1: Ball, b2: Ball) -> float:
    """Opening alpha in (pi, 2pi) of the wedge Moebius-equivalent to b1 u b2."""
    d = _check_proper(b1, b2)
    r1, r2 = b1.radius, b2.radius
    cos_t = (r1 * r1 + r2 * r2 - d * d) / (2.0 * r1 * r2)
    return math.pi + math.acos(min(1.0, max(-1.0, cos_t)))


def intersection_sphere(b1: Ball, b2: Ball):
    """Center, radius and unit axis of the (n-2)-sphere where the spheres meet."""
    d = _check_proper(b1, b2)
    u = (b2.center - b1.center) / d
    a = (d * d + b1.radius**2 - b2.radius**2) / (2.0 * d)
    rho = math.sqrt(max(b1.radius**2 - a * a, 0.0))
    return b1.center + a * u, rho, u


def _perp_basis(vectors: list[np.ndarray], n: int) -> list[np.ndarray]:
    """Deterministic Gram-Schmidt completion of ``vectors`` by coordinate axes."""
    basis = [v / np.linalg.norm(v) for v in vectors]
    out = []
    for i in range(n):
        w = np.zeros(n)
        w[i] = 1.0
        for b in basis + out:
            w = w - (w @ b) * b
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            out.append(w / nw)
        if len(basis) + len(out) == n:
            break
    return out


def balls_to_wedge(b1: Ball, b2: Ball) -> tuple[MobiusMap, Wedge]:
    """Moebius map g and wedge W with g(b1 u b2) = W.

    Two antipodal points y1, y3 of the intersection sphere go to 0 and
    infinity; for n >= 3 a third point y2 goes to the unit sphere and the
    frame sends it to e_n. In frame coordinates g(b2) is the upper
    half-space W(0, pi) and g(b1) is W(pi - alpha, 2pi - alpha).
    """
    n = b1.dim
    center, rho, u = intersection_sphere(b1, b2)
    # the coordinate axis least aligned with the center line
    i = int(np.argmin(np.abs(u)))
    e = np.zeros(n)
    e[i] = 1.0
    v1 = e - (e @ u) * u
    v1 /= np.linalg.norm(v1)
    y1 = center + rho * v1
    y3 = center - rho * v1
    gens: list = [Translation(-y3), Inversion(), Translation(-(y1 - y3) / (4.0 * rho * rho))]
    g = MobiusMap(tuple(gens))
    y2_img = None
    if n >= 3:
        v2 = _perp_basis([u, v1], n)[0]
        y2_img = evaluate(g, center + rho * v2)
        g = MobiusMap(tuple(gens) + (Scaling(1.0 / float(np.linalg.norm(y2_img))),))
        y2_img = y2_img / np.linalg.norm(y2_img)

    h1 = image_region(g, b1)
    h2 = image_region(g, b2)
    if h1.kind != "halfspace" or h2.kind != "halfspace":
        raise ArithmeticError("normalizing map failed to flatten the balls")
    nu1 = h1.normal / np.linalg.norm(h1.normal)
    nu2 = h2.normal / np.linalg.norm(h2.normal)
    cos_t = float(np.clip(nu1 @ nu2, -1.0, 1.0))
    q1 = nu1 - cos_t * nu2
    q1 /= np.linalg.norm(q1)
    rows = [q1, nu2]
    if n >= 3:
        # frame sends g(y2) to e_n
        rest = _perp_basis([q1, nu2, y2_img], n)
        rows += rest + [y2_img]
    Q = np.array(rows)
    alpha = math.pi + math.acos(cos_t)
    return g, Wedge(math.pi - alpha, alpha, Q)
