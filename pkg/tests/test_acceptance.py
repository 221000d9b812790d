"""One test per acceptance criterion, at the stated tolerance."""

import json
import math
import time

import numpy as np
import pytest

from qbk import cli
from qbk.dilatation import wedge_sampler, sample_dilatation
from qbk.geometry import Ball
from qbk.mobius import Inversion, MobiusMap, Translation, canonical_T
from qbk.modulus import RingDomain, comparison_constant, grotzsch_bounds, ring_image, solve_capacity_2d
from qbk.qcmaps import Folding
from qbk.quasiball import BallChain, construct, verify_construction

pytestmark = pytest.mark.acceptance


def test_1_annulus_capacity(record):
    t0 = time.perf_counter()
    r = solve_capacity_2d(RingDomain.annulus(1.0, math.e), 512)
    dt = time.perf_counter() - t0
    err = abs(r.value - 2 * math.pi) / (2 * math.pi)
    ok = err < 0.02 and dt < 30
    record("1 annulus capacity", ok, f"value={r.value:.6f} rel_err={err:.2e} time={dt:.1f}s")
    assert ok


def test_2_conformal_invariance(record):
    m = MobiusMap((Translation(np.array([-3.0, 0.0])), Inversion()))
    ring = ring_image(RingDomain.annulus(1.0, math.e), m)
    r = solve_capacity_2d(ring, 512)
    err = abs(r.value - 2 * math.pi) / (2 * math.pi)
    record("2 conformal invariance", err < 0.03, f"value={r.value:.6f} rel_err={err:.2e}")
    assert err < 0.03


@pytest.mark.parametrize("n", [2, 3, 4])
def test_3_folding_dilatation(record, n):
    f = Folding(math.pi, 0.0, 2 * math.pi, 0.0)
    rep = sample_dilatation(f, wedge_sampler(0.0, math.pi, n), 10_000)
    e_i = abs(rep.k_i_max - 2) / 2
    e_o = abs(rep.k_o_max - 2 ** (n - 1)) / 2 ** (n - 1)
    ok = e_i < 0.02 and e_o < 0.02
    record(f"3 folding dilatation n={n}", ok, f"K_I={rep.k_i_max:.6f} K_O={rep.k_o_max:.6f}")
    assert ok


CHAINS = {
    "2-ball d=sqrt2": BallChain((Ball([0.0, 0.0], 1.0), Ball([math.sqrt(2), 0.0], 1.0))),
    "3-ball regression": BallChain(
        (Ball([0.0, 0.0], 1.0), Ball([1.2, 0.0], 1.0), Ball([2.45, 0.0], 0.6))
    ),
}


@pytest.mark.parametrize("key", list(CHAINS))
def test_4_chain_end_to_end(record, key):
    t0 = time.perf_counter()
    qc = construct(CHAINS[key])
    chk = verify_construction(qc, samples=100_000, dilatation_samples=10_000)
    dt = time.perf_counter() - t0
    ok = chk.passed and dt < 60
    record(
        f"4 chain {key}",
        ok,
        f"in={chk.inside_fraction:.5f} out={chk.outside_fraction:.5f} "
        f"k_max={chk.k_max:.4f} k_bound={chk.k_bound:.4f} time={dt:.1f}s",
    )
    assert ok


def _closed_ball(rng, n, s, count):
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = s * rng.uniform(size=(count, 1)) ** (1 / n)
    r[: count // 10] = s  # include boundary points
    return d * r


@pytest.mark.parametrize("s", [0.3, 0.6, 0.9])
def test_5_mobius_distortion(record, s):
    rng = np.random.default_rng(6)
    lo_c = (1 - s * s) / (1 + s * s) ** 2
    hi_c = 1 / (1 - s * s)
    violations = 0
    for n in (2, 3):
        A, X, Y = (_closed_ball(rng, n, s, 10_000) for _ in range(3))
        for a, x, y in zip(A, X, Y):
            T = canonical_T(a)
            P, _ = T.apply(np.stack([x, y]), np.zeros(2, dtype=bool))
            d = np.linalg.norm(P[0] - P[1])
            e = np.linalg.norm(x - y)
            violations += d < lo_c * e - 1e-12 or d > hi_c * e + 1e-12
    record(f"5 Moebius distortion s={s}", violations == 0, f"violations={violations}/10000 per n in (2, 3)")
    assert violations == 0


def test_6_inequality_suite(record, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = cli.main(["verify", "suite", "--json", str(out)])
    report = json.loads(out.read_text())
    ok = code == 0 and report["passed"]
    record("6 inequality suite", ok, f"exit={code} checks={report['count']} failures={report['failures']}")
    assert ok


def test_7_bounds_coherence(record):
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(1000):
        s = 1.0 + rng.exponential(5.0) + 1e-9
        n = int(rng.integers(2, 9))
        b = grotzsch_bounds(s, n)
        bad += not b.lower <= b.upper
    c = comparison_constant(2, 1 / math.e)
    hand = 1 / (1 + math.log(4))
    ok = bad == 0 and abs(c - hand) <= 1e-12
    record("7 bounds coherence", ok, f"incoherent={bad}/1000 C(2,1/e)-(1+log4)^-1={c - hand:.1e}")
    assert ok


def test_8_determinism(record, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["verify", "suite", "--json", str(a)]) == 0
    assert cli.main(["verify", "suite", "--json", str(b), "--threads", "1"]) == 0
    same = a.read_bytes() == b.read_bytes()
    record("8 determinism", same, f"bytes={len(a.read_bytes())}")
    assert same
