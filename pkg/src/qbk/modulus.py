"""Conformal modulus: closed forms for spherical annuli, Groetzsch and
Teichmueller capacity bounds, comparison constants, and a finite-difference
capacity solver for planar ring domains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mobius import MobiusMap, image_region
from .geometry import Ball

# ---------------------------------------------------------------------------
# closed forms


def sphere_constants(n: int) -> tuple[float, float]:
    """Volume of the unit ball and surface area of the unit sphere in R^n."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    vol = math.pi ** (n / 2) / math.gamma(1 + n / 2)
    return vol, n * vol


def annulus_modulus(a: float, b: float, n: int) -> float:
    """Modulus of the family joining the spheres of radii a < b."""
    if not 0 < a < b:
        raise ValueError(f"need 0 < a < b, got a={a}, b={b}")
    return sphere_constants(n)[1] * math.log(b / a) ** (1 - n)


def sector_modulus(a: float, b: float, angle: float) -> float:
    """Planar modulus of the paths joining the two arcs of the sector
    {a < r < b, 0 < phi < angle}; the extremal density is 1/(r log(b/a))."""
    if not 0 < a < b:
        raise ValueError(f"need 0 < a < b, got a={a}, b={b}")
    if not 0 < angle <= 2 * math.pi:
        raise ValueError(f"sector angle must lie in (0, 2pi], got {angle}")
    return angle / math.log(b / a)


def lambda_bounds(n: int) -> tuple[float, float]:
    """Bracket for the Groetzsch ring constant (exact for n = 2)."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    if n == 2:
        return 4.0, 4.0
    return 2.0 * math.exp(0.76 * (n - 1)), 2.0 * math.exp(n - 1)


@dataclass(frozen=True)
class CapacityBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper:
            raise ValueError(f"invalid bounds [{self.lower}, {self.upper}]")

    def scaled(self, c: float) -> "CapacityBounds":
        return CapacityBounds(self.lower * c, self.upper * c)

    def contains(self, value: float, rel_tol: float = 0.0) -> bool:
        return self.lower * (1 - rel_tol) <= value <= self.upper * (1 + rel_tol)

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper}


def grotzsch_bounds(s: float, n: int) -> CapacityBounds:
    """Bounds for the Groetzsch capacity gamma_n(s), s > 1.

    For n >= 3 the lower bound uses the upper end of the lambda_n bracket,
    which keeps it valid whatever the true constant is.
    """
    if not s > 1:
        raise ValueError(f"Groetzsch capacity needs s > 1, got {s}")
    omega = sphere_constants(n)[1]
    lam = lambda_bounds(n)[1]
    return CapacityBounds(omega * math.log(lam * s) ** (1 - n), omega * math.log(s) ** (1 - n))


def teichmuller_bounds(t: float, n: int) -> CapacityBounds:
    """Bounds for tau_n(t), t > 0, through gamma_n(s) = 2^(n-1) tau_n(s^2 - 1)."""
    if not t > 0:
        raise ValueError(f"Teichmueller capacity needs t > 0, got {t}")
    return grotzsch_bounds(math.sqrt(t + 1.0), n).scaled(2.0 ** (1 - n))


def gehring_lower_bound(x, n: int | None = None) -> CapacityBounds:
    """Interval for gamma(1/|x|), a lower bound for the modulus of paths
    joining a continuum C containing 0 and x to the boundary of A, A inside the
    unit ball. Connectivity of C is the caller's obligation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[0] if n is None else n
    r = float(np.linalg.norm(x))
    if not 0 < r < 1:
        raise ValueError(f"need 0 < |x| < 1, got |x| = {r}")
    return grotzsch_bounds(1.0 / r, n)


def comparison_constant(n: int, r0: float, lam: str = "upper") -> float:
    """Constant C(n, r0) comparing gamma_n(1/r) with the annulus modulus for
    r < r0. ``lam='upper'`` (default) uses the upper end of the lambda_n
    bracket, giving the smaller and therefore always valid constant."""
    if not 0 < r0 < 1:
        raise ValueError(f"need 0 < r0 < 1, got {r0}")
    lo, hi = lambda_bounds(n)
    value = {"upper": hi, "lower": lo}[lam]
    return (1.0 - math.log(value) / math.log(r0)) ** (1 - n)


# ---------------------------------------------------------------------------
# planar ring domains


@dataclass(frozen=True, eq=False)
class Disk:
    """Closed disk (inner) or, as an outer boundary, the circle bounding the domain."""

    center: np.ndarray
    radius: float

    def inside(self, Z):
        return np.linalg.norm(Z - self.center, axis=-1) <= self.radius

    def _roots(self, P, Q):
        D = Q - P
        F = P - self.center
        a = np.einsum("ij,ij->i", D, D)
        b = 2 * np.einsum("ij,ij->i", F, D)
        c = np.einsum("ij,ij->i", F, F) - self.radius**2
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        return (-b - sq) / (2 * a), (-b + sq) / (2 * a), disc >= 0

    def hit_from_outside(self, P, Q):
        t1, t2, real = self._roots(P, Q)
        t = np.where(t1 >= 0, t1, t2)
        return np.where(real & (t >= 0) & (t <= 1), t, np.inf)

    def hit_from_inside(self, P, Q):
        _, t2, real = self._roots(P, Q)
        return np.where(real & (t2 >= 0) & (t2 <= 1), t2, np.inf)

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def to_json(self, role):
        return {"type": "ball" if role == "inner" else "sphere", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def inside(self, Z):
        d = _point_segment_distance(Z, self.a, self.b)
        return d <= 1e-12 * max(1.0, float(np.linalg.norm(self.b - self.a)))

    def hit_from_outside(self, P, Q):
        return _segment_hits(P, Q, self.a[None], self.b[None])

    def bbox(self):
        return np.minimum(self.a, self.b), np.maximum(self.a, self.b)

    def to_json(self, role):
        return {"type": "segment", "a": self.a.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Polygon:
    """Closed polygon given by its vertices; as inner set the filled polygon,
    as outer boundary the curve enclosing the domain."""

    vertices: np.ndarray

    def _path(self):
        from matplotlib.path import Path

        return Path(self.vertices)

    def inside(self, Z):
        shape = Z.shape[:-1]
        return self._path().contains_points(Z.reshape(-1, 2)).reshape(shape)

    def hit(self, P, Q):
        V = self.vertices
        return _segment_hits(P, Q, V, np.roll(V, -1, axis=0))

    hit_from_outside = hit
    hit_from_inside = hit

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def to_json(self, role):
        return {"type": "polygon", "vertices": self.vertices.tolist()}


@dataclass(frozen=True, eq=False)
class PointSet:
    """A sampled continuum; nodes within ``tol`` of a sample belong to it."""

    points: np.ndarray
    tol: float | None = None

    def inside(self, Z, h=None):
        tol = self.tol if self.tol is not None else 0.75 * (h or 0.0)
        flat = Z.reshape(-1, 2)
        best = np.full(len(flat), np.inf)
        for chunk in np.array_split(self.points, max(1, len(self.points) // 256)):
            best = np.minimum(best, np.linalg.norm(flat[:, None, :] - chunk[None], axis=2).min(axis=1))
        return (best <= tol).reshape(Z.shape[:-1])

    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def to_json(self, role):
        d = {"type": "points", "points": self.points.tolist()}
        if self.tol is not None:
            d["tol"] = self.tol
        return d


def _point_segment_distance(Z, a, b):
    d = b - a
    t = np.clip(((Z - a) @ d) / max(float(d @ d), 1e-300), 0.0, 1.0)
    return np.linalg.norm(Z - (a + t[..., None] * d), axis=-1)


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _segment_hits(P, Q, A, B, chunk=256):
    """Smallest parameter t in [0, 1] at which P + t(Q - P) meets any segment A_k B_k."""
    out = np.full(len(P), np.inf)
    R = Q - P
    S = B - A
    for lo in range(0, len(P), chunk):
        p, r = P[lo:lo + chunk, None, :], R[lo:lo + chunk, None, :]
        denom = _cross(r, S[None])
        qp = A[None] - p
        with np.errstate(divide="ignore", invalid="ignore"):
            t = _cross(qp, S[None]) / denom
            u = _cross(qp, r) / denom
        good = (denom != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
        out[lo:lo + chunk] = np.where(good, t, np.inf).min(axis=1)
    return out


_INNER_TYPES = ("ball", "segment", "polygon", "points")
_OUTER_TYPES = ("sphere", "polygon")


@dataclass(frozen=True, eq=False)
class RingDomain:
    """Planar condenser: potential 1 on ``inner``, 0 on and outside ``outer``."""

    inner: object
    outer: object
    n: int = 2

    @classmethod
    def annulus(cls, a: float, b: float, center=(0.0, 0.0)) -> "RingDomain":
        c = np.asarray(center, dtype=float)
        return cls(Disk(c, a), Disk(c, b))

    def to_json(self) -> dict:
        return {"n": self.n, "inner": self.inner.to_json("inner"), "outer": self.outer.to_json("outer")}

    @classmethod
    def from_json(cls, d: dict) -> "RingDomain":
        n = int(d.get("n", 2))
        if n != 2:
            raise ValueError("grid capacity is implemented for n = 2 only")
        return cls(_component(d["inner"], "inner"), _component(d["outer"], "outer"), n)


def _component(d: dict, role: str):
    t = d["type"]
    allowed = _INNER_TYPES if role == "inner" else _OUTER_TYPES
    if t not in allowed:
        raise ValueError(f"{role} component type {t!r} not in {allowed}")
    if t in ("ball", "sphere"):
        return Disk(np.asarray(d["center"], dtype=float), float(d["radius"]))
    if t == "segment":
        return Segment(np.asarray(d["a"], dtype=float), np.asarray(d["b"], dtype=float))
    if t == "polygon":
        return Polygon(np.asarray(d["vertices"], dtype=float))
    return PointSet(np.asarray(d["points"], dtype=float), d.get("tol"))


def ring_image(ring: RingDomain, m: MobiusMap) -> RingDomain:
    """Exact image of a ring bounded by two circles under a Moebius map."""
    if not (isinstance(ring.inner, Disk) and isinstance(ring.outer, Disk)):
        raise ValueError("exact Moebius images need circular inner and outer boundaries")
    inner = image_region(m, Ball(ring.inner.center, ring.inner.radius))
    outer_disk = image_region(m, Ball(ring.outer.center, ring.outer.radius))
    if inner.kind != "ball" or outer_disk.kind != "ball":
        raise ValueError("the pole lies in the ring or its inner disk; the image is unbounded")
    return RingDomain(Disk(inner.center, inner.radius), Disk(outer_disk.center, outer_disk.radius))


class DegenerateRingError(ValueError):
    pass


@dataclass
class CapacityResult:
    value: float
    sweeps: int
    residual: float
    resolution: int
    spacing: float


def _membership(comp, Z, h):
    if isinstance(comp, PointSet):
        return comp.inside(Z, h)
    return comp.inside(Z)


def _assemble(ring: RingDomain, res: int):
    inner, outer = ring.inner, ring.outer
    lo, hi = outer.bbox()
    ilo, ihi = inner.bbox()
    lo, hi = np.minimum(lo, ilo), np.maximum(hi, ihi)
    extent = float(np.max(hi - lo))
    h = extent / (res - 5)
    origin = lo - 2 * h
    xs = origin[0] + h * np.arange(res)
    ys = origin[1] + h * np.arange(res)
    Z = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    in_inner = _membership(inner, Z, h)
    if isinstance(outer, Polygon):
        in_outer = ~outer.inside(Z)
    else:
        in_outer = ~(np.linalg.norm(Z - outer.center, axis=-1) < outer.radius)
    if (in_inner & in_outer).any():
        raise DegenerateRingError("inner and outer sets overlap")
    domain = ~(in_inner | in_outer)
    if not domain.any():
        raise DegenerateRingError("no grid node lies inside the ring")
    if domain[0].any() or domain[-1].any() or domain[:, 0].any() or domain[:, -1].any():
        raise DegenerateRingError("ring domain reaches the grid border")

    shape = (res, res)
    coef = {}
    diag = np.zeros(shape)
    rhs = np.zeros(shape)
    cut_inner = cut_outer = 0
    cuts = []
    idx = np.argwhere(domain)
    P = Z[idx[:, 0], idx[:, 1]]
    for name, (di, dj) in {"E": (1, 0), "W": (-1, 0), "N": (0, 1), "S": (0, -1)}.items():
        J = idx + np.array([di, dj])
        Q = Z[J[:, 0], J[:, 1]]
        q_inner = in_inner[J[:, 0], J[:, 1]]
        q_outer = in_outer[J[:, 0], J[:, 1]]
        if isinstance(inner, PointSet):
            t_in = np.where(q_inner, 1.0, np.inf)
        elif isinstance(inner, Polygon):
            t_in = np.full(len(P), np.inf)
            sel = q_inner
            t_in[sel] = inner.hit(P[sel], Q[sel])
            t_in[sel & ~np.isfinite(t_in)] = 1.0
        else:
            t_in = inner.hit_from_outside(P, Q)
        if isinstance(outer, Polygon):
            t_out = np.full(len(P), np.inf)
            sel = q_outer
            t_out[sel] = outer.hit(P[sel], Q[sel])
            t_out[sel & ~np.isfinite(t_out)] = 1.0
        else:
            t_out = outer.hit_from_inside(P, Q)
        if (np.isfinite(t_in) & np.isfinite(t_out)).any():
            raise DegenerateRingError("inner and outer boundaries cross the same grid edge")
        t = np.minimum(t_in, t_out)
        is_cut = np.isfinite(t) | q_inner | q_outer
        t = np.where(np.isfinite(t), t, 1.0)
        theta = np.maximum(t, 1e-8)
        g = np.where(t_in <= t_out, 1.0, 0.0)
        a = np.zeros(shape)
        a[idx[:, 0], idx[:, 1]] = np.where(is_cut, 0.0, 1.0)
        coef[name] = a
        w = np.where(is_cut, 1.0 / theta, 1.0)
        diag[idx[:, 0], idx[:, 1]] += w
        rhs[idx[:, 0], idx[:, 1]] += np.where(is_cut, g / theta, 0.0)
        cut_inner += int(np.sum(is_cut & (g == 1.0)))
        cut_outer += int(np.sum(is_cut & (g == 0.0)))
        cuts.append((idx[is_cut], theta[is_cut], g[is_cut]))
    if cut_inner == 0 or cut_outer == 0:
        raise DegenerateRingError("inner or outer boundary is not resolved by the grid")
    return Z, h, domain, coef, diag, rhs, cuts


def solve_capacity_2d(ring: RingDomain, grid: int = 512, tol: float = 1e-10, max_sweeps: int = 200_000) -> CapacityResult:
    """Capacity of a planar ring by a 5-point finite-difference solve.

    Grid edges cut by a boundary are shortened to the crossing point (the
    symmetric irregular-boundary discretization), so the discrete Dirichlet
    energy
        sum over full edges (u_i - u_j)^2 + sum over cut edges (u_i - g)^2 / theta
    converges at second order for smooth boundaries. The potential is found
    by SOR until the largest scaled residual drops below ``tol``.
    """
    from ._sor import sor_solve

    if ring.n != 2:
        raise ValueError("grid capacity is implemented for n = 2 only")
    if grid < 16:
        raise ValueError("grid resolution must be at least 16")
    Z, h, domain, coef, diag, rhs, cuts = _assemble(ring, grid)
    u = np.zeros(domain.shape)
    safe_diag = np.where(domain, diag, 1.0)
    omega = 2.0 / (1.0 + math.sin(math.pi / grid))
    sweeps, residual = sor_solve(
        u, coef["E"], coef["W"], coef["N"], coef["S"], safe_diag, rhs, domain, omega, tol, max_sweeps, 10
    )
    if residual >= tol:
        raise ArithmeticError(f"SOR did not converge: residual {residual:.3g} after {sweeps} sweeps")
    energy = float(np.sum(coef["E"] * (np.roll(u, -1, axis=0) - u) ** 2) + np.sum(coef["N"] * (np.roll(u, -1, axis=1) - u) ** 2))
    for nodes, theta, g in cuts:
        energy += float(np.sum((u[nodes[:, 0], nodes[:, 1]] - g) ** 2 / theta))
    return CapacityResult(energy, int(sweeps), float(residual), grid, h)


def capacity_2d(ring: RingDomain, grid: int = 512, tol: float = 1e-10) -> float:
    return solve_capacity_2d(ring, grid, tol).value
