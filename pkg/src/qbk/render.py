"""SVG boundary plots and point clouds for planar constructions."""

from __future__ import annotations

import numpy as np

from .qcmaps import eval_batch
from .quasiball import QuasiballConstruction

PANEL = 400
PAD = 20


def union_boundary_arcs(chain, per_circle: int = 720) -> list[np.ndarray]:
    """Boundary of a union of disks as a list of polylines."""
    arcs = []
    t = np.linspace(0.0, 2 * np.pi, per_circle, endpoint=False)
    for b in chain.balls:
        P = b.center + b.radius * np.column_stack([np.cos(t), np.sin(t)])
        keep = chain.signed_distance(P) >= -1e-12 * b.radius
        if keep.all():
            arcs.append(np.vstack([P, P[:1]]))
            continue
        # rotate so that a run never wraps around the array end
        start = int(np.argmin(keep))
        P, keep = np.roll(P, -start, axis=0), np.roll(keep, -start)
        edges = np.flatnonzero(np.diff(keep.astype(int)))
        for lo, hi in zip(edges[::2] + 1, edges[1::2] + 1):
            arcs.append(P[lo:hi])
        if keep[-1] and len(edges) % 2:
            arcs.append(P[edges[-1] + 1:])
    return [a for a in arcs if len(a) > 1]


def _panel(arcs, x0, colour):
    pts = np.concatenate(arcs)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    scale = (PANEL - 2 * PAD) / max(float(np.max(hi - lo)), 1e-12)
    out = []
    for a in arcs:
        q = (a - lo) * scale
        coords = " ".join(f"{x0 + PAD + x:.3f},{PANEL - PAD - y:.3f}" for x, y in q)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
    return out


def construction_svg(qc: QuasiballConstruction, per_circle: int = 720) -> str:
    """Source union boundary (left) and its image (right)."""
    if qc.dim != 2:
        raise ValueError("SVG rendering is available for n = 2 only")
    arcs = union_boundary_arcs(qc.chain, per_circle)
    images = []
    for a in arcs:
        Y, inf, ok = eval_batch(qc.map, a)
        good = ok & ~inf
        if good.sum() > 1:
            images.append(Y[good])
    body = _panel(arcs, 0, "#1f4e9c") + _panel(images, PANEL, "#b0302a")
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * PANEL}" height="{PANEL}" '
        f'viewBox="0 0 {2 * PANEL} {PANEL}">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def point_cloud(qc: QuasiballConstruction, count: int, seed: int) -> np.ndarray:
    """Rows (x, f(x)) for points sampled in the union."""
    from .dilatation import union_sampler

    rng = np.random.default_rng(seed)
    X = union_sampler(qc.chain.balls)(rng, count)
    Y, inf, ok = eval_batch(qc.map, X)
    keep = ok & ~inf
    return np.hstack([X[keep], Y[keep]])
