"""Empirical checks of the modulus inequalities for concrete maps, the
preimage-size bound for closed maps, Blaschke test maps and a preimage
census."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import modulus as mod
from .geometry import Ball, TWO_PI, normalize_angle
from .mobius import MobiusMap, canonical_T, identity
from .qcmaps import (
    AngularPL,
    Affine,
    Compose,
    Folding,
    MapExpr,
    PiecewiseFold,
    Winding,
    analytic_dilatation,
    eval_batch,
    leaves,
    preimages,
    winding_counterexample,
)
from .dilatation import DEFAULT_SEED, annulus_sampler, sample_dilatation

CLOSED_FORM_TOL = 1e-9
NUMERIC_TOL = 0.05
BRANCH_EXCLUSION = 0.1
GENERIC_TOL = 1e-6
DET_TOL = 1e-8


class ImageFamilyError(ValueError):
    """The image of a family is not a condenser the modulus module can handle."""


class NonGenericTargetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class InequalityCheck:
    """lhs <= rhs * (1 + tol); intervals are compared at their unfavourable ends."""

    name: str
    lhs: float | tuple
    rhs: float | tuple
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def lhs_high(self) -> float:
        return max(self.lhs) if isinstance(self.lhs, tuple) else self.lhs

    @property
    def rhs_low(self) -> float:
        return min(self.rhs) if isinstance(self.rhs, tuple) else self.rhs

    @property
    def margin(self) -> float:
        return self.rhs_low - self.lhs_high

    @property
    def passed(self) -> bool:
        return bool(self.lhs_high <= self.rhs_low * (1 + self.tol))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "lhs": list(self.lhs) if isinstance(self.lhs, tuple) else self.lhs,
            "rhs": list(self.rhs) if isinstance(self.rhs, tuple) else self.rhs,
            "margin": self.margin,
            "tol": self.tol,
            "passed": self.passed,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# path families


@dataclass(frozen=True)
class AnnulusFamily:
    """Paths joining |x| = a and |x| = b inside the shell, about the origin."""

    a: float
    b: float
    n: int = 2

    def modulus(self) -> float:
        return mod.annulus_modulus(self.a, self.b, self.n)

    def to_json(self):
        return {"type": "annulus", "a": self.a, "b": self.b, "n": self.n}


@dataclass(frozen=True)
class SectorFamily:
    """Planar paths joining the two arcs of {a < r < b, gamma < phi < gamma + alpha}."""

    a: float
    b: float
    gamma: float
    alpha: float
    n: int = 2

    def modulus(self) -> float:
        return mod.sector_modulus(self.a, self.b, self.alpha)

    def to_json(self):
        return {"type": "sector", "a": self.a, "b": self.b, "gamma": self.gamma, "alpha": self.alpha}


@dataclass(frozen=True, eq=False)
class RingFamily:
    """Joining family of a planar ring, measured by the grid solver."""

    ring: mod.RingDomain
    grid: int = 256
    n: int = 2

    def modulus(self) -> float:
        return mod.capacity_2d(self.ring, self.grid)

    def to_json(self):
        return {"type": "ring", "ring": self.ring.to_json(), "grid": self.grid}


Family = AnnulusFamily | SectorFamily | RingFamily


def _is_numeric(f) -> bool:
    return isinstance(f, RingFamily)


def _as_ring(f) -> mod.RingDomain:
    if isinstance(f, RingFamily):
        return f.ring
    if isinstance(f, AnnulusFamily) and f.n == 2:
        return mod.RingDomain.annulus(f.a, f.b)
    raise ImageFamilyError(f"{type(f).__name__} cannot be moved by a Moebius map here")


def _conformal_image(m, fam, grid):
    if isinstance(m, Affine):
        m = MobiusMap(tuple(_affine_generators(m)))
    if not m.generators:
        return fam
    ring = mod.ring_image(_as_ring(fam), m)
    c_in, c_out = ring.inner.center, ring.outer.center
    if np.allclose(c_in, 0, atol=1e-12) and np.allclose(c_out, 0, atol=1e-12):
        return AnnulusFamily(ring.inner.radius, ring.outer.radius, 2)
    return RingFamily(ring, grid)


def _affine_generators(a: Affine):
    from .mobius import Scaling, Translation

    return [Scaling(a.scale), Translation(a.offset)]


def _same_angle(x, y):
    return abs(normalize_angle(x - y + math.pi) - math.pi) < 1e-12


def image_family(e: MapExpr, fam, grid: int = 256):
    """Image family and the multiplicity with which it is covered.

    Exact images are tracked for Moebius and affine stages (rings bounded by
    circles), windings and full-turn angular maps (annuli about the origin)
    and foldings (sectors matching their source wedge).
    """
    mult = 1
    for leaf in leaves(e):
        if isinstance(leaf, (MobiusMap, Affine)):
            fam = _conformal_image(leaf, fam, grid)
        elif isinstance(leaf, Winding):
            if not isinstance(fam, AnnulusFamily):
                raise ImageFamilyError("winding images are tracked for origin-centred annuli only")
            mult *= leaf.k
        elif isinstance(leaf, (AngularPL, PiecewiseFold)):
            pl = leaf.as_pl() if isinstance(leaf, PiecewiseFold) else leaf
            if not (pl.full_turn and isinstance(fam, AnnulusFamily)):
                raise ImageFamilyError("angular maps are tracked on full annuli only")
        elif isinstance(leaf, Folding):
            if not isinstance(fam, SectorFamily) or leaf.frame is not None:
                raise ImageFamilyError("foldings are tracked on planar sectors only")
            if not (_same_angle(fam.gamma, leaf.gamma_src) and abs(fam.alpha - leaf.alpha_src) < 1e-12):
                raise ImageFamilyError("sector does not match the folding's source wedge")
            fam = SectorFamily(fam.a, fam.b, leaf.gamma_dst, leaf.alpha_dst)
        else:
            raise ImageFamilyError(f"no image rule for {type(leaf).__name__}")
    return fam, mult


def _family_sampler(fam):
    if isinstance(fam, AnnulusFamily):
        return annulus_sampler(fam.a, fam.b, fam.n)
    if isinstance(fam, SectorFamily):
        def sample(rng, count):
            r = np.sqrt(rng.uniform(fam.a**2, fam.b**2, count))
            phi = fam.gamma + fam.alpha * rng.uniform(0.0, 1.0, count)
            return np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        return sample
    raise ImageFamilyError("no sampler for this family")


def _dilatation(e, fam, seed):
    """(K_I, K_O, source): closed form when available, sampled otherwise."""
    a = analytic_dilatation(e, fam.n)
    if a.valid:
        return a.k_i, a.k_o, "bound" if a.bound_only else "analytic"
    rep = sample_dilatation(e, _family_sampler(fam), 10_000, seed=seed)
    return rep.k_i_max, rep.k_o_max, "sampled"


def check_poletskii(e: MapExpr, fam, name: str | None = None, seed: int = DEFAULT_SEED) -> InequalityCheck:
    """M(f Gamma) <= K_I(f) M(Gamma)."""
    image, _ = image_family(e, fam)
    m0, m1 = fam.modulus(), image.modulus()
    k_i, _, src = _dilatation(e, fam, seed)
    tol = NUMERIC_TOL if _is_numeric(fam) or _is_numeric(image) else CLOSED_FORM_TOL
    return InequalityCheck(
        name or "poletskii",
        m1,
        k_i * m0,
        tol,
        {"M_family": m0, "M_image": m1, "K_I": k_i, "dilatation": src, "family": fam.to_json()},
    )


def check_ko(e: MapExpr, fam, N: int | None = None, name: str | None = None, seed: int = DEFAULT_SEED) -> InequalityCheck:
    """M(Gamma) <= K_O(f) N M(f Gamma); N defaults to the tracked covering multiplicity."""
    image, mult = image_family(e, fam)
    N = mult if N is None else int(N)
    if N < 1:
        raise ValueError(f"multiplicity must be positive, got {N}")
    m0, m1 = fam.modulus(), image.modulus()
    _, k_o, src = _dilatation(e, fam, seed)
    tol = NUMERIC_TOL if _is_numeric(fam) or _is_numeric(image) else CLOSED_FORM_TOL
    return InequalityCheck(
        name or "k_o",
        m0,
        k_o * N * m1,
        tol,
        {"M_family": m0, "M_image": m1, "K_O": k_o, "N": N, "dilatation": src, "family": fam.to_json()},
    )


# ---------------------------------------------------------------------------
# preimage-size bound


def preimage_exponent(n: int, K: float, p: int, t: float, k_i: float | None = None, k_o: float | None = None) -> float:
    """C(K, n, p, t) = (C(n, t) / (p K_I K_O))^(1/(n-1)); K_I and K_O default to K."""
    k_i = K if k_i is None else k_i
    k_o = K if k_o is None else k_o
    return (mod.comparison_constant(n, t) / (p * k_i * k_o)) ** (1.0 / (n - 1))


def preimage_size_bound(d2, n: int, K: float, p: int, t: float, radius: float = 1.0):
    """Lower bound h(d2) for the diameter of A1 when f A1 = f A2, A1 and A2
    disjoint continua in B(x, t r) and f closed and K-quasiregular with
    multiplicity p on B(x, r).

    The bound inverts the final inequality of the argument,
        (2 lam (1-t^2)/(1+t^2)^2 |z1-z2|)^C >= |y1-y2| / (1-t^2),
    using d(A1) >= |z1-z2| and |y1-y2| >= d(A2)/2, with lam the upper end of
    the lambda_n bracket. Diameters are measured in units of ``radius``.

    Chaining the two distortion estimates in the other order gives instead
    |T_y| <= lam (2 |T_z|)^C, i.e. lam outside the power; that variant is not
    used here.
    """
    if not 0 < t < 1:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    if K < 1 or p < 1 or radius <= 0:
        raise ValueError(f"need K >= 1, p >= 1 and radius > 0, got K={K}, p={p}, radius={radius}")
    d2 = np.asarray(d2, dtype=float)
    if np.any(d2 < 0):
        raise ValueError("diameters must be non-negative")
    C = preimage_exponent(n, K, p, t)
    lam = mod.lambda_bounds(n)[1]
    s = 1.0 - t * t
    scale = (1.0 + t * t) ** 2 / (2.0 * lam * s)
    # large exponents overflow to inf only for d2 far beyond the admissible 2 t r
    with np.errstate(over="ignore"):
        out = radius * scale * (d2 / radius / (2.0 * s)) ** (1.0 / C)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Blaschke products


@dataclass(frozen=True, eq=False)
class BlaschkeMap:
    """Finite Blaschke product prod (z - a)/(1 - conj(a) z) with unit constant.
    ``zeros`` lists each zero as often as its multiplicity."""

    zeros: tuple

    def __post_init__(self):
        zs = tuple(complex(*z) if np.ndim(z) else complex(z) for z in self.zeros)
        if not zs:
            raise ValueError("a Blaschke product needs at least one zero")
        if any(abs(z) >= 1 for z in zs):
            raise ValueError("Blaschke zeros must lie in the open unit disk")
        object.__setattr__(self, "zeros", zs)

    @property
    def degree(self) -> int:
        return len(self.zeros)

    def _c(self, w):
        out = np.ones_like(w)
        for a in self.zeros:
            out = out * (w - a) / (1 - np.conj(a) * w)
        return out

    def __call__(self, Z):
        Z = np.asarray(Z, dtype=float)
        W = self._c(Z[..., 0] + 1j * Z[..., 1])
        return np.stack([W.real, W.imag], axis=-1)

    def _polys(self):
        P = np.polynomial.Polynomial([1.0 + 0j])
        Q = np.polynomial.Polynomial([1.0 + 0j])
        for a in self.zeros:
            P = P * np.polynomial.Polynomial([-a, 1.0])
            Q = Q * np.polynomial.Polynomial([1.0, -np.conj(a)])
        return P, Q

    def critical_points(self) -> np.ndarray:
        """Zeros of the derivative inside the disk, with multiplicity."""
        P, Q = self._polys()
        num = P.deriv() * Q - P * Q.deriv()
        roots = num.roots() if num.degree() > 0 else np.array([])
        roots = roots[np.abs(roots) < 1]
        return np.column_stack([roots.real, roots.imag]) if len(roots) else np.zeros((0, 2))

    def critical_values(self) -> np.ndarray:
        c = self.critical_points()
        return self(c) if len(c) else c

    def preimages(self, W) -> np.ndarray:
        """All degree-many preimages of each row of ``W``; shape (N, degree, 2).
        Roots of P - w Q through batched companion matrices."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        w = W[:, 0] + 1j * W[:, 1]
        P, Q = self._polys()
        m = self.degree
        pc = np.zeros(m + 1, dtype=complex)
        qc = np.zeros(m + 1, dtype=complex)
        pc[: len(P.coef)] = P.coef
        qc[: len(Q.coef)] = Q.coef
        coef = pc[None, :] - w[:, None] * qc[None, :]
        coef = coef / coef[:, -1:]
        comp = np.zeros((len(w), m, m), dtype=complex)
        comp[:, 1:, :-1] = np.eye(m - 1)
        comp[:, :, -1] = -coef[:, :-1]
        roots = np.linalg.eigvals(comp) if m > 1 else -coef[:, :1]
        # polish against the product itself
        for _ in range(3):
            f = self._c(roots) - w[:, None]
            h = 1e-7
            d = (self._c(roots + h) - self._c(roots - h)) / (2 * h)
            step = np.where(np.abs(d) > 1e-14, f / np.where(d == 0, 1, d), 0)
            roots = roots - step
        return np.stack([roots.real, roots.imag], axis=-1)

    def to_json(self):
        return {"type": "blaschke", "zeros": [[z.real, z.imag] for z in self.zeros]}


def blaschke_eval(b: BlaschkeMap, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(np.linalg.norm(z, axis=-1) > 1 + 1e-12):
        raise ValueError("Blaschke products are evaluated on the closed unit disk")
    return b(z)


def _diameters(P: np.ndarray) -> np.ndarray:
    """Diameter of each point cloud in a batch of shape (..., m, d)."""
    D = np.linalg.norm(P[..., :, None, :] - P[..., None, :, :], axis=-1)
    return D.max(axis=(-1, -2))


@dataclass
class PreimageTrial:
    diameters: list
    bound_ratio: float


def preimage_trials(
    b: BlaschkeMap,
    t: float,
    count: int = 100,
    seed: int = DEFAULT_SEED,
    points: int = 64,
    max_length: float = 0.2,
    exclusion: float = BRANCH_EXCLUSION,
    max_attempts: int = 100_000,
):
    """Random straight continua in the image and their preimage branches.

    Each trial picks z0 in B(t) off the ``exclusion`` neighbourhood of the
    critical points, draws a segment from b(z0), follows every preimage
    branch along it, and keeps the trial when at least two branches stay in
    B(t) away from the critical points. Returns a list of (m, points, 2)
    arrays holding the admissible branches.
    """
    rng = np.random.default_rng(seed)
    crit = b.critical_points()
    out = []
    attempts = 0
    s = np.linspace(0.0, 1.0, points)
    while len(out) < count:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(f"only {len(out)} admissible continua after {max_attempts} attempts")
        r = t * math.sqrt(rng.uniform())
        th = rng.uniform(0, TWO_PI)
        z0 = np.array([r * math.cos(th), r * math.sin(th)])
        if len(crit) and np.min(np.linalg.norm(crit - z0, axis=1)) < exclusion:
            continue
        w0 = b(z0[None])[0]
        ang = rng.uniform(0, TWO_PI)
        length = max_length * rng.uniform(0.05, 1.0)
        W = w0 + np.outer(s * length, [math.cos(ang), math.sin(ang)])
        if np.any(np.linalg.norm(W, axis=1) >= 1):
            continue
        roots = b.preimages(W)
        # follow branches by nearest continuation
        m = b.degree
        branches = np.empty((m, points, 2))
        branches[:, 0] = roots[0]
        ok = True
        for i in range(1, points):
            prev = branches[:, i - 1]
            D = np.linalg.norm(prev[:, None, :] - roots[i][None], axis=2)
            pick = np.argmin(D, axis=1)
            if len(set(pick.tolist())) < m:
                ok = False
                break
            sep = np.sort(D, axis=1)
            if m > 1 and np.any(sep[:, 1] < 4 * sep[:, 0]):
                ok = False
                break
            branches[:, i] = roots[i][pick]
        if not ok:
            continue
        inside = np.all(np.linalg.norm(branches, axis=2) < t, axis=1)
        if len(crit):
            dc = np.linalg.norm(branches[:, :, None, :] - crit[None, None], axis=3).min(axis=(1, 2))
            inside &= dc >= exclusion
        if inside.sum() >= 2:
            out.append(branches[inside])
    return out


def check_preimage_bound(b: BlaschkeMap, t: float, count: int = 100, seed: int = DEFAULT_SEED, name: str | None = None) -> InequalityCheck:
    """d(A1) >= h(d(A2)) for every ordered pair of admissible preimage
    branches; lhs is the worst ratio h(d(A2)) / d(A1)."""
    trials = preimage_trials(b, t, count, seed)
    worst = 0.0
    pairs = 0
    for br in trials:
        d = _diameters(br)
        h = preimage_size_bound(d, 2, 1.0, b.degree, t)
        for i in range(len(d)):
            for j in range(len(d)):
                if i != j:
                    pairs += 1
                    worst = max(worst, h[j] / d[i])
    return InequalityCheck(
        name or "preimage",
        worst,
        1.0,
        0.0,
        {"trials": len(trials), "pairs": pairs, "t": t, "p": b.degree, "exclusion": BRANCH_EXCLUSION, "map": b.to_json()},
    )


# ---------------------------------------------------------------------------
# preimage census


def _as_function(f) -> tuple[Callable, int]:
    if isinstance(f, BlaschkeMap):
        def F(X):
            return f(X), np.linalg.norm(X, axis=1) <= 1.0
        return F, 2

    def F(X):
        Y, inf, ok = eval_batch(f, X)
        return Y, ok & ~inf
    return F, None


@dataclass
class Census:
    count: int
    preimages: np.ndarray
    min_jacobian: float


def multiplicity_census(f, y, domain: Ball | None = None, per_axis: int | None = None, h: float = 1e-7) -> Census:
    """Preimages of ``y`` in ``domain`` by dense sampling and Newton refinement.

    Every grid point whose residual is within a first-order reach of ``y``
    seeds a Newton iteration; converged roots within 1e-7 of each other are
    merged. At a generic target every preimage has local index 1, so the count
    is the multiplicity sum.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    F, _ = _as_function(f)
    domain = domain or Ball(np.zeros(n), 1.0)
    if isinstance(f, BlaschkeMap):
        cv = f.critical_values()
        if len(cv) and np.min(np.linalg.norm(cv - y, axis=1)) < GENERIC_TOL:
            raise NonGenericTargetError("non-generic target: within 1e-6 of a critical value")
    per_axis = per_axis or (400 if n == 2 else 60)
    axes = [np.linspace(c - domain.radius, c + domain.radius, per_axis) for c in domain.center]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    G = G[np.linalg.norm(G - domain.center, axis=1) < domain.radius]
    spacing = 2 * domain.radius / (per_axis - 1)
    Y, ok = F(G)
    res = np.linalg.norm(Y - y, axis=1)
    J = _jac(F, G, 1e-6)
    lip = np.linalg.norm(J, ord=2, axis=(1, 2))
    seeds = G[ok & (res <= 2.0 * math.sqrt(n) * spacing * np.nan_to_num(lip, nan=0.0) + 1e-12)]
    X = seeds.copy()
    for _ in range(40):
        Yx, okx = F(X)
        Jx = _jac(F, X, h)
        r = Yx - y
        with np.errstate(all="ignore"):
            step = np.linalg.solve(np.where(np.isfinite(Jx), Jx, np.eye(n)), r[..., None])[..., 0]
        X = np.where(okx[:, None] & np.isfinite(step), X - step, X)
    Yx, okx = F(X)
    conv = okx & (np.linalg.norm(Yx - y, axis=1) < 1e-10)
    conv &= np.linalg.norm(X - domain.center, axis=1) < domain.radius
    roots = []
    for x in X[conv]:
        if all(np.linalg.norm(x - r) > 1e-7 for r in roots):
            roots.append(x)
    roots = np.array(sorted(roots, key=lambda v: tuple(v))) if roots else np.zeros((0, n))
    dets = np.abs(np.linalg.det(_jac(F, roots, h))) if len(roots) else np.array([np.inf])
    if np.min(dets) < DET_TOL:
        raise NonGenericTargetError("non-generic target: Jacobian vanishes at a preimage")
    return Census(len(roots), roots, float(np.min(dets)))


def _jac(F, X, h):
    n = X.shape[1] if X.ndim == 2 else 2
    J = np.empty((len(X), n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, :, j] = (F(X + e)[0] - F(X - e)[0]) / (2 * h)
    return J


# ---------------------------------------------------------------------------
# the winding example


def cluster_witness(n: int = 3, base=(-0.3, 0.4), eps=(1e-2, 1e-3, 1e-4, 1e-6)) -> dict:
    """Preimages of points approaching the disk {x_2 = 0} of the winding
    example from either side; ``base`` gives (x_1, x_3) of the limit point.

    For each side and each distance the sorted norms of the preimages inside
    the ball are listed. One preimage runs to the unit sphere while the other
    converges to an interior point, so the limit point is a cluster value of
    f at the boundary although it lies in f(B^n).
    """
    e = winding_counterexample(n)
    out = {}
    for sign, key in ((1, "plus"), (-1, "minus")):
        rows = []
        for ep in eps:
            y = np.zeros(n)
            y[0], y[1], y[2] = base[0], sign * ep, base[1]
            pts = [p for p in preimages(e, y) if np.linalg.norm(p) < 1]
            rows.append(sorted(float(np.linalg.norm(p)) for p in pts))
        out[key] = rows
    return out


# ---------------------------------------------------------------------------
# default suite


ANNULI = ((1.0, math.e), (1.0, math.e**2), (0.5, 2.0))
FOLD_PAIRS = ((1.5 * math.pi, math.pi), (math.pi / 2, math.pi), (math.pi, 1.5 * math.pi))
PREIMAGE_MAPS = {
    "z2": BlaschkeMap((0j, 0j)),
    "z3": BlaschkeMap((0j, 0j, 0j)),
    "z2_b05": BlaschkeMap((0j, 0j, 0.5 + 0j)),
}
PREIMAGE_T = (0.3, 0.5, 0.7)


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def default_suite() -> dict[str, Callable[[], InequalityCheck]]:
    """Named check thunks; names determine report order."""
    maps = {"identity": identity(), "winding2": Winding(2), "winding3": Winding(3)}
    suite = {}
    for a, b in ANNULI:
        tag = f"{_fmt(a)}-{_fmt(b)}"
        for mname, m in maps.items():
            for n in (2, 3):
                fam = AnnulusFamily(a, b, n)
                suite[f"poletskii/{mname}/n{n}/annulus {tag}"] = lambda m=m, fam=fam: check_poletskii(m, fam)
                suite[f"k_o/{mname}/n{n}/annulus {tag}"] = lambda m=m, fam=fam: check_ko(m, fam)
        for alpha, beta in FOLD_PAIRS:
            fold = Folding(alpha, 0.0, beta, 0.0)
            fam = SectorFamily(a, b, 0.0, alpha)
            fname = f"folding {_fmt(alpha / math.pi)}pi-{_fmt(beta / math.pi)}pi"
            suite[f"poletskii/{fname}/sector {tag}"] = lambda f=fold, fam=fam: check_poletskii(f, fam)
            suite[f"k_o/{fname}/sector {tag}"] = lambda f=fold, fam=fam: check_ko(f, fam)
        pf = PiecewiseFold(1.5 * math.pi, 0.25)
        suite[f"poletskii/piecewise fold/annulus {tag}"] = lambda f=pf, a=a, b=b: check_poletskii(f, AnnulusFamily(a, b, 2))
        suite[f"k_o/piecewise fold/annulus {tag}"] = lambda f=pf, a=a, b=b: check_ko(f, AnnulusFamily(a, b, 2))
    # Moebius images are measured on the grid
    T = canonical_T(np.array([0.3, 0.1]))
    for a, b in ((0.1, 0.1 * math.e), (0.2, 0.6)):
        tag = f"{_fmt(a)}-{_fmt(b)}"
        fam = AnnulusFamily(a, b, 2)
        suite[f"poletskii/moebius T_a/annulus {tag}"] = lambda fam=fam: check_poletskii(T, fam)
        suite[f"k_o/moebius T_a/annulus {tag}"] = lambda fam=fam: check_ko(T, fam)
    for mname, bm in PREIMAGE_MAPS.items():
        for t in PREIMAGE_T:
            suite[f"preimage/{mname}/t={t}"] = lambda bm=bm, t=t: check_preimage_bound(bm, t)
    return suite


@dataclass
class SuiteReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "count": len(self.checks),
            "failures": sum(not c.passed for c in self.checks),
            "checks": [c.to_json() for c in self.checks],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def thread_count() -> int:
    env = os.environ.get("QBK_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_suite(suite: dict | None = None, threads: int | None = None) -> SuiteReport:
    suite = default_suite() if suite is None else suite
    names = sorted(suite)
    threads = threads or thread_count()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda k: suite[k](), names))
    checks = [
        InequalityCheck(name, c.lhs, c.rhs, c.tol, c.details) for name, c in zip(names, results)
    ]
    return SuiteReport(checks)
