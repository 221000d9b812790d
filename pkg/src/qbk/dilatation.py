"""Pointwise and sampled dilatation of composed maps from central-difference
Jacobians."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .qcmaps import AnalyticDilatation, MapExpr, analytic_dilatation, eval_batch, trace_batch

DEFAULT_STEP = 1e-5
DEFAULT_SEED = 0x5EED

Sampler = Callable[[np.random.Generator, int], np.ndarray]


class SenseReversingError(ArithmeticError):
    pass


class NoValidSamplesError(ArithmeticError):
    pass


@dataclass
class DilatationSample:
    x: np.ndarray
    jac: np.ndarray
    op_norm: float
    min_stretch: float
    jacobian_det: float
    k_o_pt: float
    k_i_pt: float
    near_seam: bool = False


def _stencil(X: np.ndarray, h: float) -> np.ndarray:
    """Points x + h e_j then x - h e_j for every row; shape (N, 2n, n)."""
    n = X.shape[1]
    E = h * np.eye(n)
    return np.concatenate([X[:, None, :] + E[None], X[:, None, :] - E[None]], axis=1)


def jacobians(e: MapExpr, X: np.ndarray, h: float = DEFAULT_STEP):
    """Central-difference Jacobians at each row of ``X``.

    Returns ``(J, valid)``. A point is invalid when a stencil point leaves
    some stage's domain, or when at some stage the point sits closer to a
    seam (folding boundary or winding axis) than twice the stencil's spread
    there, or the stencil straddles two branches.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, n = X.shape
    S = _stencil(X, h)
    allpts = np.concatenate([X, S.reshape(-1, n)], axis=0)
    Y, inf, ok, records = trace_batch(e, allpts)
    valid = ~(inf.reshape(-1)[:N]) & ok[:N]
    okS = ok[N:].reshape(N, 2 * n) & ~inf[N:].reshape(N, 2 * n)
    valid &= okS.all(axis=1)
    for Xs, seam, labels in records:
        base = Xs[:N]
        st = Xs[N:].reshape(N, 2 * n, n)
        spread = np.max(np.linalg.norm(st - base[:, None, :], axis=2), axis=1)
        valid &= seam[:N] > 2.0 * spread
        lab = labels[N:].reshape(N, 2 * n)
        valid &= (lab == labels[:N, None]).all(axis=1)
    Ys = Y[N:].reshape(N, 2 * n, n)
    with np.errstate(invalid="ignore", over="ignore"):
        J = (Ys[:, :n, :] - Ys[:, n:, :]).transpose(0, 2, 1) / (2.0 * h)
    J[~valid] = np.nan
    return J, valid


def jacobian(e: MapExpr, x, h: float = DEFAULT_STEP) -> np.ndarray:
    from .qcmaps import EvaluationError

    J, valid = jacobians(e, np.asarray(x, dtype=float)[None, :], h)
    if not valid[0]:
        # tell a domain failure apart from seam proximity
        X = np.asarray(x, dtype=float)[None, :]
        _, inf, ok = eval_batch(e, np.concatenate([X, _stencil(X, h)[0]]))
        if not ok.all() or inf.any():
            raise EvaluationError("stencil", f"map cannot be evaluated on the stencil around {x}")
        raise ValueError(f"point {x} is within the seam exclusion zone")
    return J[0]


def _pointwise(J: np.ndarray):
    n = J.shape[-1]
    sv = np.linalg.svd(J, compute_uv=False)
    det = np.linalg.det(J)
    big, small = sv[:, 0], sv[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        k_o = big**n / det
        k_i = det / small**n
    return big, small, det, k_o, k_i


def pointwise(e: MapExpr, x, h: float = DEFAULT_STEP) -> DilatationSample:
    x = np.asarray(x, dtype=float)
    J, valid = jacobians(e, x[None, :], h)
    if not valid[0]:
        return DilatationSample(x, J[0], np.nan, np.nan, np.nan, np.nan, np.nan, near_seam=True)
    big, small, det, k_o, k_i = _pointwise(J)
    return DilatationSample(x, J[0], big[0], small[0], det[0], k_o[0], k_i[0])


@dataclass
class DilatationReport:
    samples: int
    k_o_max: float
    k_i_max: float
    k_max: float
    step: float
    excluded_fraction: float
    analytic_bound: AnalyticDilatation | None = None
    points: np.ndarray | None = field(default=None, repr=False)
    table: np.ndarray | None = field(default=None, repr=False)

    def within_bound(self, tol: float = 0.02) -> bool:
        b = self.analytic_bound
        if b is None or not b.valid:
            return True
        return self.k_o_max <= b.k_o * (1 + tol) and self.k_i_max <= b.k_i * (1 + tol)

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "k_o_max": self.k_o_max,
            "k_i_max": self.k_i_max,
            "k_max": self.k_max,
            "step": self.step,
            "excluded_fraction": self.excluded_fraction,
            "analytic_bound": None if self.analytic_bound is None else self.analytic_bound.to_json(),
        }

    def write_csv(self, path) -> None:
        if self.table is None:
            raise ValueError("report was built without keep_samples=True")
        n = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(n)] + ["sigma_max", "sigma_min", "J", "K_O", "K_I"])
            for p, row in zip(self.points, self.table):
                w.writerow([repr(float(v)) for v in p] + [repr(float(v)) for v in row])


def sample_dilatation(
    e: MapExpr,
    sampler: Sampler,
    count: int,
    h: float = DEFAULT_STEP,
    seed: int = DEFAULT_SEED,
    keep_samples: bool = False,
    batch: int = 20000,
) -> DilatationReport:
    """Suprema of pointwise K_O and K_I over ``count`` sampled points."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    X = np.asarray(sampler(rng, count), dtype=float)
    n = X.shape[1]
    rows = []
    valid_all = []
    for start in range(0, count, batch):
        Xb = X[start:start + batch]
        J, valid = jacobians(e, Xb, h)
        big, small, det, k_o, k_i = _pointwise(np.where(valid[:, None, None], J, np.eye(n)))
        scale = np.maximum(big, 1e-300) ** n
        bad = valid & (det < -1e-12 * scale)
        if bad.any():
            i = int(np.argmax(bad))
            raise SenseReversingError(
                f"negative Jacobian determinant {det[i]:.6g} at {Xb[i].tolist()}: map is not sense-preserving"
            )
        # degenerate Jacobians are treated like seam points
        valid &= det > 1e-12 * scale
        rows.append(np.column_stack([big, small, det, k_o, k_i]))
        valid_all.append(valid)
    table = np.concatenate(rows)
    valid = np.concatenate(valid_all)
    if not valid.any():
        raise NoValidSamplesError("every sample was excluded (seams, domain edge or degenerate Jacobian)")
    k_o_max = float(np.max(table[valid, 3]))
    k_i_max = float(np.max(table[valid, 4]))
    return DilatationReport(
        samples=int(valid.sum()),
        k_o_max=k_o_max,
        k_i_max=k_i_max,
        k_max=max(k_o_max, k_i_max),
        step=h,
        excluded_fraction=float(1.0 - valid.mean()),
        analytic_bound=analytic_dilatation(e, n),
        points=X[valid] if keep_samples else None,
        table=table[valid] if keep_samples else None,
    )


# ---------------------------------------------------------------------------
# samplers


def ball_sampler(center, radius: float) -> Sampler:
    center = np.asarray(center, dtype=float)

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        n = center.shape[0]
        d = rng.normal(size=(count, n))
        d /= np.linalg.norm(d, axis=1)[:, None]
        return center + radius * d * rng.random(count)[:, None] ** (1.0 / n)

    return sample


def box_sampler(lo, hi) -> Sampler:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    def sample(rng, count):
        return lo + (hi - lo) * rng.random((count, lo.shape[0]))

    return sample


def annulus_sampler(a: float, b: float, n: int) -> Sampler:
    """Uniform in the shell a < |x| < b."""

    def sample(rng, count):
        d = rng.normal(size=(count, n))
        d /= np.linalg.norm(d, axis=1)[:, None]
        u = rng.random(count)
        r = (a**n + u * (b**n - a**n)) ** (1.0 / n)
        return d * r[:, None]

    return sample


def wedge_sampler(gamma: float, alpha: float, n: int, radius: float = 1.0, frame=None) -> Sampler:
    """Uniform in the part of the wedge W(gamma, gamma + alpha) inside B^n(radius)."""

    def sample(rng, count):
        out = np.empty((0, n))
        while len(out) < count:
            X = ball_sampler(np.zeros(n), radius)(rng, 2 * count)
            L = X if frame is None else X @ np.asarray(frame).T
            off = np.mod(np.arctan2(L[:, 1], L[:, 0]) - gamma, 2 * np.pi)
            out = np.concatenate([out, X[off < alpha]])
        return out[:count]

    return sample


def union_sampler(balls) -> Sampler:
    """Uniform in a union of balls (rejection from the bounding box)."""
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])
    lo = (centers - radii[:, None]).min(axis=0)
    hi = (centers + radii[:, None]).max(axis=0)

    def sample(rng, count):
        out = np.empty((0, centers.shape[1]))
        while len(out) < count:
            X = lo + (hi - lo) * rng.random((2 * count, centers.shape[1]))
            d = np.linalg.norm(X[:, None, :] - centers[None], axis=2)
            out = np.concatenate([out, X[(d < radii).any(axis=1)]])
        return out[:count]

    return sample
