import math

import numpy as np
import pytest

from qbk.geometry import Ball
from qbk.qcmaps import Affine, eval_batch
from qbk.quasiball import (
    BallChain,
    ChainGeometryError,
    ChainValidationError,
    construct,
    reduce_step,
    validate_chain,
    verify_construction,
)

PI = math.pi
E1 = np.array([1.0, 0.0])


def _chain(centers, radii, n=2):
    return BallChain(tuple(Ball(np.pad(np.atleast_1d(c).astype(float), (0, n - np.size(c))), r) for c, r in zip(centers, radii)))


TWO = _chain([0.0, math.sqrt(2)], [1, 1])
THREE = _chain([0.0, 1.2, 2.45], [1, 1, 0.6])

# recorded by running the constructor; any change means the algorithm moved
THREE_K_BOUND = 4.093433272267763
THREE_PHI0 = 0.29606418998797374


def test_validate_examples():
    assert validate_chain(_chain([0.0], [1])).ok
    bad = validate_chain(_chain([0.0, 3.0], [1, 1]))
    assert not bad.ok and bad.indices == (0, 1) and "3 >= r0+r1 = 2" in bad.message
    # touching closures of B1 and B3
    bad = validate_chain(_chain([0.0, 1.0, 2.0], [1, 1, 1]))
    assert not bad.ok and bad.indices == (0, 2)
    # nested pair
    assert not validate_chain(_chain([0.0, 0.1], [1, 0.5])).ok
    assert validate_chain(THREE).ok


def test_spec_collinear_example_is_disjoint_not_tangent():
    # unit balls at 0, 1.5, 3: B1 and B3 are 1 apart, the consecutive pairs overlap
    assert validate_chain(_chain([0.0, 1.5, 3.0], [1, 1, 1])).ok


def test_construct_rejects_invalid():
    with pytest.raises(ChainValidationError):
        construct(_chain([0.0, 3.0], [1, 1]))


def test_single_ball_is_similarity():
    qc = construct(_chain([[2.0, 1.0]], [3.0]))
    assert qc.k_bound == 1.0 and len(qc.map.stages) == 1 and isinstance(qc.map.stages[0], Affine)
    chk = verify_construction(qc, samples=10_000, dilatation_samples=1000)
    assert chk.passed and chk.boundary_distance < 1e-12


def test_two_ball_example():
    qc = construct(TWO)
    (alpha, phi0, k), = qc.per_step
    assert alpha == pytest.approx(1.5 * PI) and phi0 == 0.0 and k == pytest.approx(2.0)
    chk = verify_construction(qc, samples=20_000, dilatation_samples=10_000)
    assert chk.passed and chk.boundary_distance < 1e-3
    assert chk.k_max <= qc.k_bound * 1.02


def test_three_ball_regression():
    qc = construct(THREE)
    assert qc.k_bound == pytest.approx(THREE_K_BOUND, rel=1e-12)
    assert qc.per_step[0][1] == pytest.approx(THREE_PHI0, rel=1e-12)
    assert 0 < qc.per_step[0][1] < 2 * PI - qc.per_step[0][0]
    assert qc.k_bound == pytest.approx(math.prod(s[2] for s in qc.per_step), rel=1e-9)
    chk = verify_construction(qc, samples=20_000, dilatation_samples=10_000)
    assert chk.passed and chk.boundary_distance < 1e-3


def test_sampled_phi0_agrees_with_exact():
    b = THREE.balls
    exact = reduce_step(b[0], b[1], b[2:])
    sampled = reduce_step(b[0], b[1], b[2:], method="sampled")
    assert sampled.phi0 <= exact.phi0
    assert sampled.phi0 == pytest.approx(exact.phi0, rel=1e-6)


def test_similarity_invariance():
    rot = np.array([[math.cos(0.7), -math.sin(0.7)], [math.sin(0.7), math.cos(0.7)]])
    base = construct(THREE)
    moved = construct(THREE.transformed(2.5, rot, [3.0, -1.0]))
    assert np.allclose([s[2] for s in moved.per_step], [s[2] for s in base.per_step], rtol=1e-9)


def test_reversed_chain_and_nonlinear_chain():
    for c in (THREE.reversed(), _chain([[0, 0], [1.3, 0.4], [2.0, 1.5], [1.5, 2.8]], [1.0, 0.8, 0.9, 0.7])):
        assert validate_chain(c).ok
        qc = construct(c)
        chk = verify_construction(qc, samples=20_000, dilatation_samples=5000)
        assert chk.passed, chk.to_json()


def test_three_dimensional_chain():
    c = _chain([0.0, 1.2, 2.45], [1, 1, 0.6], n=3)
    qc = construct(c)
    assert qc.k_bound >= 1
    chk = verify_construction(qc, samples=20_000, dilatation_samples=5000)
    assert chk.passed, chk.to_json()


def test_geometry_outside_hypothesis():
    # reduce_step called directly with a trailing ball that meets the first one
    b1, b2 = Ball([0.0, 0.0], 1.0), Ball([1.2, 0.0], 1.0)
    with pytest.raises(ChainGeometryError):
        reduce_step(b1, b2, [Ball([-0.5, 1.0], 0.6)])


def test_random_valid_chains_construct():
    rng = np.random.default_rng(11)
    done = 0
    while done < 10:
        m = int(rng.integers(3, 6))
        c, r, ang = [np.zeros(2)], [1.0], 0.0
        for _ in range(m - 1):
            ang += rng.uniform(-2, 2)
            rr = rng.uniform(0.5, 1.2)
            d = rng.uniform(abs(rr - r[-1]) + 0.05, rr + r[-1] - 0.05)
            c.append(c[-1] + d * np.array([math.cos(ang), math.sin(ang)]))
            r.append(rr)
        ch = BallChain(tuple(Ball(x, y) for x, y in zip(c, r)))
        if not validate_chain(ch):
            continue
        chk = verify_construction(construct(ch), samples=5000, dilatation_samples=2000)
        assert chk.passed, chk.to_json()
        done += 1


def test_json_round_trip():
    qc = construct(THREE)
    d = qc.to_json()
    assert BallChain.from_json(d["chain"]).to_json() == THREE.to_json()
    from qbk.qcmaps import from_json

    X = np.random.default_rng(0).uniform(-1, 3, size=(100, 2))
    assert np.array_equal(eval_batch(from_json(d["map"]), X)[0], eval_batch(qc.map, X)[0])
