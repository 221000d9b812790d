"""Explicit quasiconformal and quasiregular building blocks: foldings between
wedges, the three-branch straightening map, winding maps, and a composition
tree evaluator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from .geometry import INF, TWO_PI, ANGLE_EPS, DimensionError, ExtPoint, as_point, check_orthogonal
from .mobius import Inversion, MobiusMap, Translation

PI = math.pi
CONTINUITY_TOL = 1e-10


class EvaluationError(ValueError):
    """A point fell outside the domain of one stage of a map."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


def folding_dilatation(ratio: float, n: int) -> tuple[float, float]:
    """(K_I, K_O) of an angular stretch by ``ratio``; singular values are
    1 (radial, axial) and ``ratio`` (angular)."""
    if ratio >= 1.0:
        return ratio, ratio ** (n - 1)
    return (1.0 / ratio) ** (n - 1), 1.0 / ratio


def _frame_local(frame, X):
    return X if frame is None else X @ frame.T


def _frame_global(frame, L):
    return L if frame is None else L @ frame


def _halfplane_distance(r, phi, theta):
    """Distance from points (r, phi, .) to the half-plane at angle theta
    bounded by the axis."""
    d = np.abs(np.mod(phi - theta + PI, TWO_PI) - PI)
    return np.where(d < PI / 2, r * np.sin(d), r)


@dataclass(frozen=True, eq=False)
class AngularPL:
    """Piecewise-linear, increasing map of the angle around an (n-2)-axis.

    ``src`` and ``dst`` are matching knot lists; the map is affine in the
    angle between consecutive knots and leaves r and the axial coordinates
    alone. When both lists span exactly 2pi the map acts on all of space,
    otherwise only on the closed source wedge.
    """

    src: Tuple[float, ...]
    dst: Tuple[float, ...]
    frame: np.ndarray | None = None

    def __post_init__(self):
        src = tuple(float(s) for s in self.src)
        dst = tuple(float(d) for d in self.dst)
        if len(src) != len(dst) or len(src) < 2:
            raise ValueError("knot lists must match and contain at least two knots")
        if any(b <= a for a, b in zip(src, src[1:])) or any(b < a for a, b in zip(dst, dst[1:])):
            raise ValueError("knots must increase")
        if src[-1] - src[0] > TWO_PI + 1e-12 or dst[-1] - dst[0] > TWO_PI + 1e-12:
            raise ValueError("knots span more than a full turn")
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        if self.frame is not None:
            object.__setattr__(self, "frame", check_orthogonal(self.frame))

    @property
    def full_turn(self) -> bool:
        return abs(self.src[-1] - self.src[0] - TWO_PI) < 1e-12 and abs(self.dst[-1] - self.dst[0] - TWO_PI) < 1e-12

    @property
    def slopes(self) -> list[float]:
        return [(d1 - d0) / (s1 - s0) for s0, s1, d0, d1 in zip(self.src, self.src[1:], self.dst, self.dst[1:])]

    def _offsets(self, phi):
        """Angle offsets from the first source knot and an in-domain mask."""
        width = self.src[-1] - self.src[0]
        off = np.mod(phi - self.src[0], TWO_PI)
        if self.full_turn:
            # half-open branches (s_i, s_{i+1}]: the first knot belongs to the last branch
            off = np.where(off <= ANGLE_EPS, TWO_PI, off)
            return off, np.ones(off.shape, dtype=bool)
        off = np.where(off > TWO_PI - ANGLE_EPS, 0.0, off)
        ok = off <= width + ANGLE_EPS
        return np.minimum(off, width), ok

    def _branch_of(self, off):
        inner = np.array(self.src[1:-1]) - self.src[0]
        return np.searchsorted(inner, off, side="left")

    def map_angles(self, phi):
        off, ok = self._offsets(np.asarray(phi, dtype=float))
        b = self._branch_of(off)
        s = np.array(self.src) - self.src[0]
        slopes = np.array(self.slopes)
        psi = np.array(self.dst)[b] + (off - s[b]) * slopes[b]
        return psi, ok

    def _forward(self, X, inf):
        L = _frame_local(self.frame, X)
        r = np.hypot(L[:, 0], L[:, 1])
        phi = np.arctan2(L[:, 1], L[:, 0])
        psi, ok = self.map_angles(phi)
        axis = r == 0.0
        ok = ok | axis | inf
        out = L.copy()
        out[:, 0] = np.where(axis, L[:, 0], r * np.cos(psi))
        out[:, 1] = np.where(axis, L[:, 1], r * np.sin(psi))
        return _frame_global(self.frame, out), inf, ok

    def _seam_distance(self, X):
        L = _frame_local(self.frame, X)
        r = np.hypot(L[:, 0], L[:, 1])
        phi = np.arctan2(L[:, 1], L[:, 0])
        dist = r.copy()
        for s in self.src:
            dist = np.minimum(dist, _halfplane_distance(r, phi, s))
        return dist

    def _labels(self, X):
        L = _frame_local(self.frame, X)
        r = np.hypot(L[:, 0], L[:, 1])
        off, _ = self._offsets(np.arctan2(L[:, 1], L[:, 0]))
        return np.where(r == 0.0, -1, self._branch_of(off))

    def inverse(self) -> "AngularPL":
        return AngularPL(self.dst, self.src, self.frame)

    def dilatation(self, n: int) -> tuple[float, float]:
        ks = [folding_dilatation(s, n) for s in self.slopes if s > 0]
        return max(k[0] for k in ks), max(k[1] for k in ks)

    def to_json(self):
        return {"type": "angular_pl", "src": list(self.src), "dst": list(self.dst), "frame": _frame_json(self.frame)}


@dataclass(frozen=True, eq=False)
class Folding:
    """Angular-affine map of the wedge W(gamma_src, gamma_src + alpha_src)
    onto W(gamma_dst, gamma_dst + alpha_dst)."""

    alpha_src: float
    gamma_src: float
    alpha_dst: float
    gamma_dst: float
    frame: np.ndarray | None = None

    def __post_init__(self):
        for a in (self.alpha_src, self.alpha_dst):
            # an opening of exactly 2pi is the slit domain (space minus a half-plane)
            if not 0.0 < a <= TWO_PI:
                raise ValueError(f"folding openings must lie in (0, 2pi], got {a}")
        if self.frame is not None:
            object.__setattr__(self, "frame", check_orthogonal(self.frame))

    @property
    def ratio(self) -> float:
        return self.alpha_dst / self.alpha_src

    def as_pl(self) -> AngularPL:
        return AngularPL(
            (self.gamma_src, self.gamma_src + self.alpha_src),
            (self.gamma_dst, self.gamma_dst + self.alpha_dst),
            self.frame,
        )

    def _forward(self, X, inf):
        return self.as_pl()._forward(X, inf)

    def _seam_distance(self, X):
        return self.as_pl()._seam_distance(X)

    def _labels(self, X):
        return self.as_pl()._labels(X)

    def inverse(self) -> "Folding":
        return Folding(self.alpha_dst, self.gamma_dst, self.alpha_src, self.gamma_src, self.frame)

    def dilatation(self, n: int) -> tuple[float, float]:
        return folding_dilatation(self.ratio, n)

    def to_json(self):
        return {
            "type": "folding",
            "alpha_src": self.alpha_src,
            "gamma_src": self.gamma_src,
            "alpha_dst": self.alpha_dst,
            "gamma_dst": self.gamma_dst,
            "frame": _frame_json(self.frame),
        }


@dataclass(frozen=True, eq=False)
class PiecewiseFold:
    """Three-branch straightening map of the ball-chain construction.

    Sends W(pi - alpha1, pi) onto the half-space W(0, pi), is the identity on
    angles in (pi, pi + phi0] and stretches (pi + phi0, 3pi - alpha1] onto
    (pi + phi0, 2pi]. ``phi0 = 0`` drops the middle branch, which is the
    two-folding map taking a two-ball wedge to a half-space.
    """

    alpha1: float
    phi0: float
    frame: np.ndarray | None = None

    def __post_init__(self):
        if not PI < self.alpha1 < TWO_PI:
            raise ValueError(f"alpha1 must lie in (pi, 2pi), got {self.alpha1}")
        if not 0.0 <= self.phi0 < TWO_PI - self.alpha1:
            raise ValueError(
                f"phi0 must lie in [0, 2pi - alpha1) = [0, {TWO_PI - self.alpha1:.6g}), got {self.phi0}"
            )
        if self.frame is not None:
            object.__setattr__(self, "frame", check_orthogonal(self.frame))
        self._check_seams()

    def _branch_angle(self, branch: int, phi):
        a1, p0 = self.alpha1, self.phi0
        if branch == 0:
            return PI / a1 * (phi + (a1 - PI))
        if branch == 1:
            return phi
        return ((PI - p0) * phi + (PI + p0) * (PI - a1)) / ((PI - a1) + (PI - p0))

    def _check_seams(self):
        a1, p0 = self.alpha1, self.phi0
        checks = [
            (self._branch_angle(0, PI - a1), 0.0),
            (self._branch_angle(0, PI), PI),
            (self._branch_angle(2, 3 * PI - a1), TWO_PI),
            (self._branch_angle(2, PI + p0), PI + p0),
        ]
        if p0 > 0:
            checks.append((self._branch_angle(1, PI + p0), PI + p0))
        for got, want in checks:
            if abs(got - want) > CONTINUITY_TOL:
                raise ArithmeticError(
                    f"straightening map is discontinuous for alpha1={a1!r}, phi0={p0!r}: {got!r} != {want!r}"
                )

    def knots(self) -> tuple[tuple, tuple]:
        a1, p0 = self.alpha1, self.phi0
        if p0 > 0:
            return (PI - a1, PI, PI + p0, 3 * PI - a1), (0.0, PI, PI + p0, TWO_PI)
        return (PI - a1, PI, 3 * PI - a1), (0.0, PI, TWO_PI)

    def as_pl(self) -> AngularPL:
        s, d = self.knots()
        return AngularPL(s, d, self.frame)

    def map_angles(self, phi):
        a1, p0 = self.alpha1, self.phi0
        phi = np.mod(np.asarray(phi, dtype=float), TWO_PI)
        # bring angles into (pi - alpha1, 3pi - alpha1]
        phi = np.where(phi > 3 * PI - a1, phi - TWO_PI, phi)
        phi = np.where(phi <= PI - a1, phi + TWO_PI, phi)
        out = np.where(
            phi <= PI,
            self._branch_angle(0, phi),
            np.where(phi <= PI + p0, self._branch_angle(1, phi), self._branch_angle(2, phi)),
        )
        return out

    def _forward(self, X, inf):
        L = _frame_local(self.frame, X)
        r = np.hypot(L[:, 0], L[:, 1])
        psi = self.map_angles(np.arctan2(L[:, 1], L[:, 0]))
        axis = r == 0.0
        out = L.copy()
        out[:, 0] = np.where(axis, L[:, 0], r * np.cos(psi))
        out[:, 1] = np.where(axis, L[:, 1], r * np.sin(psi))
        return _frame_global(self.frame, out), inf, np.ones(len(X), dtype=bool)

    def _seam_distance(self, X):
        return self.as_pl()._seam_distance(X)

    def _labels(self, X):
        return self.as_pl()._labels(X)

    def inverse(self) -> AngularPL:
        return self.as_pl().inverse()

    def branch_ratios(self) -> list[float]:
        a1, p0 = self.alpha1, self.phi0
        ratios = [PI / a1]
        if p0 > 0:
            ratios.append(1.0)
        ratios.append((PI - p0) / (TWO_PI - a1 - p0))
        return ratios

    def dilatation(self, n: int) -> tuple[float, float]:
        ks = [folding_dilatation(r, n) for r in self.branch_ratios()]
        return max(k[0] for k in ks), max(k[1] for k in ks)

    def to_json(self):
        return {"type": "piecewise_fold", "alpha1": self.alpha1, "phi0": self.phi0, "frame": _frame_json(self.frame)}


@dataclass(frozen=True)
class Winding:
    """Multiply the angle in the coordinate plane ``plane`` by ``k``."""

    k: int
    plane: Tuple[int, int] = (0, 1)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"winding order must be an integer >= 2, got {self.k}")
        i, j = self.plane
        if i == j or i < 0 or j < 0:
            raise ValueError(f"winding plane needs two distinct axis indices, got {self.plane}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "plane", (int(i), int(j)))

    def _check_dim(self, X):
        if max(self.plane) >= X.shape[1]:
            raise DimensionError(f"winding plane {self.plane} does not fit in R^{X.shape[1]}")

    def _forward(self, X, inf):
        self._check_dim(X)
        i, j = self.plane
        r = np.hypot(X[:, i], X[:, j])
        phi = np.arctan2(X[:, j], X[:, i])
        Y = X.copy()
        Y[:, i] = r * np.cos(self.k * phi)
        Y[:, j] = r * np.sin(self.k * phi)
        return Y, inf, np.ones(len(X), dtype=bool)

    def _seam_distance(self, X):
        i, j = self.plane
        return np.hypot(X[:, i], X[:, j])

    def _labels(self, X):
        return np.zeros(len(X), dtype=int)

    def preimages(self, y: np.ndarray) -> list[np.ndarray]:
        """All points mapped to ``y``, by angular enumeration."""
        i, j = self.plane
        r = math.hypot(y[i], y[j])
        if r == 0.0:
            return [y.copy()]
        psi = math.atan2(y[j], y[i])
        out = []
        for m in range(self.k):
            t = (psi + TWO_PI * m) / self.k
            x = y.copy()
            x[i], x[j] = r * math.cos(t), r * math.sin(t)
            out.append(x)
        return out

    def dilatation(self, n: int) -> tuple[float, float]:
        return folding_dilatation(float(self.k), n)

    def to_json(self):
        return {"type": "winding", "k": self.k, "plane": list(self.plane)}


@dataclass(frozen=True, eq=False)
class Affine:
    """x -> scale * x + offset."""

    scale: float
    offset: np.ndarray

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"affine scale must be positive, got {self.scale}")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))

    def _forward(self, X, inf):
        return np.where(inf[:, None], X, self.scale * X + self.offset), inf, np.ones(len(X), dtype=bool)

    def inverse(self) -> "Affine":
        return Affine(1.0 / self.scale, -self.offset / self.scale)

    def to_json(self):
        return {"type": "affine", "scale": self.scale, "offset": self.offset.tolist()}


@dataclass(frozen=True)
class Compose:
    """Stages applied in order: ``stages[0]`` first."""

    stages: Tuple["MapExpr", ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    def to_json(self):
        return {"type": "compose", "stages": [to_json(s) for s in self.stages]}


MapExpr = Union[MobiusMap, Folding, PiecewiseFold, AngularPL, Winding, Affine, Compose]


def chain(*stages: MapExpr) -> Compose:
    """Apply ``stages`` left to right."""
    return Compose(tuple(stages))


def compose(*maps: MapExpr) -> Compose:
    """Function composition: ``compose(f, g)(x) == f(g(x))``."""
    return Compose(tuple(reversed(maps)))


def conjugate(f: MapExpr, g: MobiusMap) -> Compose:
    """g^-1 o f o g."""
    return Compose((g, f, g.inverse()))


def leaves(e: MapExpr) -> list:
    if isinstance(e, Compose):
        out = []
        for s in e.stages:
            out.extend(leaves(s))
        return out
    return [e]


def _stage_name(index: int, leaf) -> str:
    return f"#{index} ({type(leaf).__name__})"


def _leaf_forward(leaf, X, inf):
    if isinstance(leaf, MobiusMap):
        Y, inf2 = leaf.apply(X, inf)
        return Y, inf2, np.ones(len(X), dtype=bool)
    return leaf._forward(X, inf)


def _leaf_seams(leaf, X):
    if hasattr(leaf, "_seam_distance"):
        return leaf._seam_distance(X)
    return np.full(len(X), np.inf)


def _leaf_labels(leaf, X):
    if hasattr(leaf, "_labels"):
        return leaf._labels(X)
    return np.zeros(len(X), dtype=int)


def eval_batch(e: MapExpr, X: np.ndarray, inf: np.ndarray | None = None):
    """Evaluate on a batch of points. Returns ``(Y, at_infinity, ok)``;
    ``ok`` is False where some stage was handed a point outside its domain."""
    X = np.array(X, dtype=float, ndmin=2)
    inf = np.zeros(len(X), dtype=bool) if inf is None else np.asarray(inf, dtype=bool).copy()
    ok = np.ones(len(X), dtype=bool)
    for leaf in leaves(e):
        X, inf, good = _leaf_forward(leaf, X, inf)
        ok &= good
    return X, inf, ok


def trace_batch(e: MapExpr, X: np.ndarray):
    """Evaluate and record every stage's input points, seam distances and
    branch labels (used to keep finite-difference stencils off seams)."""
    X = np.array(X, dtype=float, ndmin=2)
    inf = np.zeros(len(X), dtype=bool)
    ok = np.ones(len(X), dtype=bool)
    records = []
    for leaf in leaves(e):
        records.append((X, _leaf_seams(leaf, X), _leaf_labels(leaf, X)))
        X, inf, good = _leaf_forward(leaf, X, inf)
        ok &= good
    return X, inf, ok, records


def eval_map(e: MapExpr, x: ExtPoint) -> ExtPoint:
    x = as_point(x)
    if x is INF:
        n = _guess_dim(e) or 2
        X, inf = np.zeros((1, n)), np.array([True])
    else:
        X, inf = x[None, :], np.array([False])
    for idx, leaf in enumerate(leaves(e)):
        X, inf, good = _leaf_forward(leaf, X, inf)
        if not good[0]:
            raise EvaluationError(_stage_name(idx, leaf), "point lies outside the source wedge")
    return INF if inf[0] else X[0]


def _guess_dim(e):
    for leaf in leaves(e):
        if isinstance(leaf, MobiusMap):
            from .mobius import _dimension

            d = _dimension(leaf)
            if d:
                return d
        if isinstance(leaf, Affine) and leaf.offset.ndim == 1:
            return leaf.offset.shape[0]
        frame = getattr(leaf, "frame", None)
        if frame is not None:
            return frame.shape[0]
    return None


def inverse(e: MapExpr) -> MapExpr:
    if isinstance(e, Compose):
        return Compose(tuple(inverse(s) for s in reversed(e.stages)))
    if isinstance(e, Winding):
        raise ValueError("winding maps are not injective; use preimages()")
    return e.inverse()


def preimages(e: MapExpr, y: np.ndarray) -> list[np.ndarray]:
    """All preimages of ``y``, enumerated stage by stage (windings branch)."""
    current = [np.asarray(y, dtype=float)]
    for leaf in reversed(leaves(e)):
        nxt = []
        for p in current:
            if isinstance(leaf, Winding):
                nxt.extend(leaf.preimages(p))
                continue
            inv = inverse(leaf)
            Y, inf, ok = eval_batch(inv, p[None, :])
            if ok[0] and not inf[0]:
                nxt.append(Y[0])
        current = nxt
    return current


def is_conformal(leaf) -> bool:
    return isinstance(leaf, (MobiusMap, Affine))


@dataclass(frozen=True)
class AnalyticDilatation:
    k_i: float
    k_o: float
    valid: bool = True
    bound_only: bool = False

    @property
    def k(self) -> float:
        return max(self.k_i, self.k_o)

    def to_json(self):
        return {"k_i": self.k_i, "k_o": self.k_o, "valid": self.valid, "bound_only": self.bound_only}


def analytic_dilatation(e: MapExpr, n: int) -> AnalyticDilatation:
    """Closed-form (K_I, K_O). Conformal stages contribute 1; with more than
    one non-conformal stage the product is returned as an upper bound."""
    k_i = k_o = 1.0
    nonconformal = 0
    for leaf in leaves(e):
        if is_conformal(leaf):
            continue
        ki, ko = leaf.dilatation(n)
        if ki == 1.0 and ko == 1.0:
            continue
        nonconformal += 1
        k_i *= ki
        k_o *= ko
    return AnalyticDilatation(k_i, k_o, True, nonconformal > 1)


# ---------------------------------------------------------------------------
# the non-closed winding example


def half_space_normalizer(n: int) -> MobiusMap:
    """Moebius g with g(B^n) = {x_2 > 0} and g(B^n_+) = W(0, pi/2), where
    B^n_+ = {|x| < 1, x_1 > 0}: sends -e_2 to infinity and e_2 to 0."""
    e2 = np.zeros(n)
    e2[1] = 1.0
    return MobiusMap((Translation(e2), Inversion(), Translation(-0.5 * e2)))


def half_ball_map(n: int) -> Compose:
    """Quasiconformal map of the unit ball onto the half-ball {x_1 > 0}."""
    g = half_space_normalizer(n)
    return conjugate(Folding(PI, 0.0, PI / 2, 0.0), g)


def winding_counterexample(n: int) -> Compose:
    """f3 o f2 o f1: ball -> half-ball -> ball minus a half-hyperplane ->
    ball minus {x_1 <= 0, x_2 = x_3 = 0}."""
    if n < 3:
        raise ValueError(f"the winding example needs n >= 3, got {n}")
    return chain(half_ball_map(n), Winding(2, (0, 1)), Winding(2, (0, 2)))


# ---------------------------------------------------------------------------
# JSON


def _frame_json(frame):
    return None if frame is None else frame.tolist()


def _frame_from(d):
    f = d.get("frame")
    return None if f is None else np.asarray(f, dtype=float)


def to_json(e: MapExpr) -> dict:
    return e.to_json()


def from_json(d: dict) -> MapExpr:
    t = d["type"]
    if t == "mobius":
        return MobiusMap.from_json(d)
    if t == "folding":
        return Folding(d["alpha_src"], d["gamma_src"], d["alpha_dst"], d["gamma_dst"], _frame_from(d))
    if t == "piecewise_fold":
        return PiecewiseFold(d["alpha1"], d["phi0"], _frame_from(d))
    if t == "angular_pl":
        return AngularPL(tuple(d["src"]), tuple(d["dst"]), _frame_from(d))
    if t == "winding":
        return Winding(d["k"], tuple(d["plane"]))
    if t == "affine":
        return Affine(d["scale"], np.asarray(d["offset"], dtype=float))
    if t == "compose":
        return Compose(tuple(from_json(s) for s in d["stages"]))
    raise ValueError(f"unknown map type {t!r}")
