"""Map a chain of overlapping balls onto the unit ball.

Each step normalizes the two leading balls onto a wedge by a Moebius map g,
straightens the wedge with a three-branch angular map that leaves the rest of
the chain in place, and pulls back by g^-1. The last step uses the two-branch
map and a final similarity onto the unit ball. The dilatation of the whole
map is at most the product of the per-step dilatations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dilatation import DEFAULT_SEED, sample_dilatation, union_sampler
from .geometry import TWO_PI, Ball, DimensionError, Wedge
from .mobius import MobiusMap, balls_to_wedge, image_region
from .qcmaps import Affine, Compose, MapExpr, PiecewiseFold, conjugate, eval_batch, inverse, to_json

PI = math.pi
PHI0_MARGIN = 1e-6
DISJOINT_TOL = 1e-12


class ChainValidationError(ValueError):
    pass


class ChainGeometryError(ArithmeticError):
    pass


@dataclass(frozen=True)
class BallChain:
    balls: tuple

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        if not self.balls:
            raise ValueError("a ball chain needs at least one ball")

    @property
    def dim(self) -> int:
        return self.balls[0].dim

    def __len__(self):
        return len(self.balls)

    def reversed(self) -> "BallChain":
        return BallChain(tuple(reversed(self.balls)))

    def transformed(self, scale: float = 1.0, rotation=None, shift=None) -> "BallChain":
        """Image under x -> scale * R x + shift."""
        n = self.dim
        R = np.eye(n) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
        return BallChain(tuple(Ball(scale * R @ b.center + t, scale * b.radius) for b in self.balls))

    def signed_distance(self, X: np.ndarray) -> np.ndarray:
        """min_j (|x - x_j| - r_j): negative inside, zero exactly on the boundary."""
        C = np.array([b.center for b in self.balls])
        R = np.array([b.radius for b in self.balls])
        return (np.linalg.norm(np.atleast_2d(X)[:, None, :] - C[None], axis=2) - R).min(axis=1)

    def to_json(self) -> dict:
        return {"balls": [b.to_json() for b in self.balls]}

    @classmethod
    def from_json(cls, d) -> "BallChain":
        items = d["balls"] if isinstance(d, dict) else d
        return cls(tuple(Ball.from_json(b) for b in items))


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    message: str = ""
    indices: tuple = ()

    def __bool__(self):
        return self.ok


def validate_chain(c: BallChain) -> ChainCheck:
    """First violated hypothesis of the chain theorem, or ok."""
    balls = c.balls
    n = balls[0].dim
    for j, b in enumerate(balls):
        if b.dim != n:
            return ChainCheck(False, f"ball {j} lives in R^{b.dim}, ball 0 in R^{n}", (j,))
    for j in range(len(balls) - 1):
        b1, b2 = balls[j], balls[j + 1]
        d = float(np.linalg.norm(b2.center - b1.center))
        lo, hi = abs(b2.radius - b1.radius), b1.radius + b2.radius
        if not d < hi:
            return ChainCheck(False, f"balls {j},{j + 1}: |x{j + 1}-x{j}| = {d:.17g} >= r{j}+r{j + 1} = {hi:.17g}", (j, j + 1))
        if not d > lo:
            return ChainCheck(False, f"balls {j},{j + 1}: |x{j + 1}-x{j}| = {d:.17g} <= |r{j + 1}-r{j}| = {lo:.17g}", (j, j + 1))
    for j in range(len(balls)):
        for k in range(j + 2, len(balls)):
            d = float(np.linalg.norm(balls[k].center - balls[j].center))
            s = balls[j].radius + balls[k].radius
            if not d > s + DISJOINT_TOL:
                return ChainCheck(
                    False, f"balls {j},{k}: closures meet, |x{k}-x{j}| = {d:.17g} <= r{j}+r{k} = {s:.17g}", (j, k)
                )
    return ChainCheck(True)


@dataclass
class ReductionStep:
    map: Compose
    k: float
    alpha: float
    phi0: float
    g: MobiusMap
    wedge: Wedge


def _angular_extent(g: MobiusMap, frame: np.ndarray, ball: Ball, alpha1: float) -> tuple[float, float]:
    """Angle interval, in frame coordinates, covered by g(ball), expressed in
    the window (2pi - alpha1, 3pi - alpha1) complementary to g(b1)."""
    R = image_region(g, ball)
    if R.kind != "ball":
        raise ChainGeometryError("chain geometry outside theorem hypothesis: a later ball meets the pole")
    c = frame @ R.center
    dist = math.hypot(c[0], c[1])
    if dist <= R.radius:
        raise ChainGeometryError("chain geometry outside theorem hypothesis: a later ball meets the wedge axis")
    half = math.asin(R.radius / dist)
    start = TWO_PI - alpha1
    mid = start + math.fmod(math.atan2(c[1], c[0]) - start, TWO_PI) % TWO_PI
    return mid - half, mid + half


def _angular_extent_sampled(g: MobiusMap, frame: np.ndarray, ball: Ball, alpha1: float, samples: int = 10_000):
    n = ball.dim
    rng = np.random.default_rng(DEFAULT_SEED)
    d = rng.normal(size=(samples, n))
    d /= np.linalg.norm(d, axis=1)[:, None]
    Y, inf = g.apply(ball.center + ball.radius * d)
    if inf.any():
        raise ChainGeometryError("chain geometry outside theorem hypothesis: a later ball meets the pole")
    L = Y @ frame.T
    start = TWO_PI - alpha1
    phi = start + np.mod(np.arctan2(L[:, 1], L[:, 0]) - start, TWO_PI)
    return float(phi.min()), float(phi.max())


def reduce_step(b1: Ball, b2: Ball, rest=(), method: str = "exact") -> ReductionStep:
    """One step: a map of b1 u b2 u rest onto b2 u rest.

    ``method='exact'`` reads phi0 from the projected image disks;
    ``'sampled'`` takes the supremum over 10^4 boundary points per ball.
    """
    g, W = balls_to_wedge(b1, b2)
    alpha1 = W.alpha
    phi0 = 0.0
    for b in rest:
        if method == "exact":
            lo, hi = _angular_extent(g, W.frame, b, alpha1)
        elif method == "sampled":
            lo, hi = _angular_extent_sampled(g, W.frame, b, alpha1)
        else:
            raise ValueError(f"unknown phi0 method {method!r}")
        if lo < TWO_PI - alpha1:
            raise ChainGeometryError("chain geometry outside theorem hypothesis: a later ball meets the first ball")
        phi0 = max(phi0, hi - PI)
    phi0 *= 1.0 + PHI0_MARGIN
    if not 0.0 <= phi0 < TWO_PI - alpha1:
        raise ChainGeometryError(
            f"chain geometry outside theorem hypothesis: phi0 = {phi0:.6g} not in [0, {TWO_PI - alpha1:.6g})"
        )
    f0 = PiecewiseFold(alpha1, phi0, W.frame)
    k_i, k_o = f0.dilatation(b1.dim)
    return ReductionStep(conjugate(f0, g), max(k_i, k_o), alpha1, phi0, g, W)


@dataclass
class QuasiballConstruction:
    chain: BallChain
    map: Compose
    k_bound: float
    per_step: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.chain.dim

    def to_json(self) -> dict:
        return {
            "n": self.dim,
            "chain": self.chain.to_json(),
            "k_bound": self.k_bound,
            "per_step": [{"alpha": a, "phi0": p, "k": k} for a, p, k in self.per_step],
            "map": to_json(self.map),
        }


def construct(c: BallChain, method: str = "exact") -> QuasiballConstruction:
    check = validate_chain(c)
    if not check:
        raise ChainValidationError(check.message)
    balls = c.balls
    stages = []
    per_step = []
    k_bound = 1.0
    for j in range(len(balls) - 1):
        step = reduce_step(balls[j], balls[j + 1], balls[j + 2:], method=method)
        stages.extend(step.map.stages)
        per_step.append((step.alpha, step.phi0, step.k))
        k_bound *= step.k
    last = balls[-1]
    stages.append(Affine(1.0 / last.radius, -last.center / last.radius))
    return QuasiballConstruction(c, Compose(tuple(stages)), k_bound, per_step)


# ---------------------------------------------------------------------------
# sampled verification


def _sphere_points(rng, n, count):
    d = rng.normal(size=(count, n))
    return d / np.linalg.norm(d, axis=1)[:, None]


def chain_boundary_points(c: BallChain, count: int, rng) -> np.ndarray:
    """Points of the boundary of the union, spread over the balls by area."""
    n = c.dim
    areas = np.array([b.radius ** (n - 1) for b in c.balls])
    out = []
    per = np.maximum(1, np.round(4 * count * areas / areas.sum()).astype(int))
    for b, m in zip(c.balls, per):
        P = b.center + b.radius * _sphere_points(rng, n, int(m))
        out.append(P[np.abs(c.signed_distance(P)) <= 1e-12 * max(1.0, b.radius)])
    P = np.concatenate(out)
    return P[rng.permutation(len(P))[:count]]


def exterior_sampler(c: BallChain, reach: float = 1.0):
    """Uniform among points at distance in (0, reach] from the union."""
    C = np.array([b.center for b in c.balls])
    R = np.array([b.radius for b in c.balls])
    lo = (C - R[:, None]).min(axis=0) - reach
    hi = (C + R[:, None]).max(axis=0) + reach

    def sample(rng, count):
        out = np.empty((0, C.shape[1]))
        while len(out) < count:
            X = lo + (hi - lo) * rng.random((4 * count, C.shape[1]))
            s = c.signed_distance(X)
            out = np.concatenate([out, X[(s > 0) & (s <= reach)]])
        return out[:count]

    return sample


@dataclass
class ConstructionCheck:
    inside_fraction: float
    outside_fraction: float
    boundary_distance: float
    k_max: float
    k_bound: float
    samples: int
    dilatation_samples: int

    @property
    def passed(self) -> bool:
        return (
            self.inside_fraction >= 0.999
            and self.outside_fraction >= 0.999
            and self.k_max <= self.k_bound * 1.02
        )

    def to_json(self) -> dict:
        return {
            "inside_fraction": self.inside_fraction,
            "outside_fraction": self.outside_fraction,
            "boundary_distance": self.boundary_distance,
            "k_max": self.k_max,
            "k_bound": self.k_bound,
            "samples": self.samples,
            "dilatation_samples": self.dilatation_samples,
            "passed": self.passed,
        }


def verify_construction(
    qc: QuasiballConstruction,
    samples: int = 100_000,
    dilatation_samples: int = 10_000,
    boundary_samples: int = 1000,
    seed: int = DEFAULT_SEED,
) -> ConstructionCheck:
    """Sampled image and dilatation checks of a construction.

    ``boundary_distance`` is a two-sided Hausdorff estimate: images of
    boundary points against the unit sphere, and preimages of unit-sphere
    points against the boundary of the union.
    """
    c = qc.chain
    n = c.dim
    rng = np.random.default_rng(seed)
    X_in = union_sampler(c.balls)(rng, samples)
    Y, inf, ok = eval_batch(qc.map, X_in)
    inside = float(np.mean(ok & ~inf & (np.linalg.norm(Y, axis=1) < 1 + 1e-6)))
    X_out = exterior_sampler(c)(rng, samples)
    Y, inf, ok = eval_batch(qc.map, X_out)
    outside = float(np.mean(ok & (inf | (np.linalg.norm(Y, axis=1) > 1 - 1e-6))))

    P = chain_boundary_points(c, boundary_samples, rng)
    Y, _, _ = eval_batch(qc.map, P)
    d1 = float(np.max(np.abs(np.linalg.norm(Y, axis=1) - 1.0)))
    U = _sphere_points(rng, n, boundary_samples)
    Xb, _, _ = eval_batch(inverse(qc.map), U)
    d2 = float(np.max(np.abs(c.signed_distance(Xb))))

    k_max = 1.0
    if dilatation_samples:
        rep = sample_dilatation(qc.map, union_sampler(c.balls), dilatation_samples, seed=seed)
        k_max = rep.k_max
    return ConstructionCheck(inside, outside, max(d1, d2), k_max, qc.k_bound, samples, dilatation_samples)
