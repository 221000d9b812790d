import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbk.dilatation import (
    NoValidSamplesError,
    SenseReversingError,
    annulus_sampler,
    ball_sampler,
    box_sampler,
    jacobian,
    jacobians,
    pointwise,
    sample_dilatation,
    wedge_sampler,
)
from qbk.mobius import MobiusMap, Orthogonal, Scaling, canonical_T, identity
from qbk.qcmaps import Affine, Folding, Winding, chain

PI = math.pi


def test_jacobian_examples():
    x = np.array([0.3, -0.2, 0.5])
    assert np.allclose(jacobian(identity(), x), np.eye(3), atol=1e-8)
    assert np.allclose(jacobian(MobiusMap((Scaling(3.0),)), x), 3 * np.eye(3), atol=1e-8)
    f = Folding(PI, 0.0, 2 * PI, 0.0)
    p = np.array([math.cos(PI / 4), math.sin(PI / 4), 0.0])
    sv = np.sort(np.linalg.svd(jacobian(f, p), compute_uv=False))
    assert np.allclose(sv, [1, 1, 2], atol=1e-4)


def test_jacobian_against_moebius_derivative():
    # |T_a'(x)| = (1 - |a|^2) / (1 - 2 a.x + |a|^2 |x|^2), a conformal matrix
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.uniform(-0.4, 0.4, 3)
        x = rng.uniform(-0.5, 0.5, 3)
        J = jacobian(canonical_T(a), x)
        lam = (1 - a @ a) / (1 - 2 * a @ x + (a @ a) * (x @ x))
        assert np.allclose(J.T @ J, lam**2 * np.eye(3), atol=1e-8)


def test_seam_points_flagged():
    f = Folding(PI, 0.0, 2 * PI, 0.0)
    s = pointwise(f, np.array([1.0, 1e-7, 0.0]))
    assert s.near_seam
    with pytest.raises(ValueError):
        jacobian(f, np.array([1.0, 1e-7, 0.0]))
    J, valid = jacobians(Winding(2), np.array([[1e-6, 0.0], [0.5, 0.5]]))
    assert valid.tolist() == [False, True]


def test_pointwise_invariants():
    rng = np.random.default_rng(1)
    e = chain(canonical_T(np.array([0.2, 0.1])), Winding(3), Affine(2.0, np.array([1.0, 0.0])))
    for x in rng.uniform(-0.7, 0.7, size=(200, 2)):
        s = pointwise(e, x)
        if s.near_seam:
            continue
        assert s.op_norm >= s.min_stretch >= 0
        assert s.jacobian_det > 0
        assert s.k_o_pt >= 1 - 1e-6 and s.k_i_pt >= 1 - 1e-6


def test_sample_examples():
    rep = sample_dilatation(canonical_T(np.array([0.3, 0.0])), ball_sampler([0.0, 0.0], 0.9), 1000)
    assert rep.k_max <= 1.01
    rep = sample_dilatation(Winding(2), annulus_sampler(0.1, 1.0, 2), 10_000)
    assert 1.98 <= rep.k_max <= 2.02
    f = Folding(PI, 0.0, 2 * PI, 0.0)
    rep = sample_dilatation(chain(f, f.inverse()), wedge_sampler(0.0, PI, 3), 10_000)
    assert rep.k_max <= 1.01
    assert rep.within_bound()
    assert rep.k_max == max(rep.k_o_max, rep.k_i_max)


def test_deterministic_and_batch_independent():
    f = Folding(0.7, 0.1, 2.0, 1.0)
    a = sample_dilatation(f, wedge_sampler(0.1, 0.7, 3), 5000, batch=5000)
    b = sample_dilatation(f, wedge_sampler(0.1, 0.7, 3), 5000, batch=777)
    assert a.to_json() == b.to_json()


def test_step_halving_converges():
    e = chain(canonical_T(np.array([0.2, 0.3])), Winding(2))
    s = annulus_sampler(0.2, 0.8, 2)
    k1 = sample_dilatation(e, s, 5000, h=1e-4).k_max
    k2 = sample_dilatation(e, s, 5000, h=5e-5).k_max
    assert abs(k1 - k2) / k2 < 0.005


def test_errors():
    reflect = MobiusMap((Orthogonal(np.diag([1.0, -1.0])),))
    with pytest.raises(SenseReversingError):
        sample_dilatation(reflect, box_sampler([-1, -1], [1, 1]), 100)
    f = Folding(PI / 2, 0.0, PI, 0.0)
    with pytest.raises(NoValidSamplesError):
        sample_dilatation(f, wedge_sampler(PI, PI / 2, 2), 50)
    with pytest.raises(ValueError):
        sample_dilatation(f, wedge_sampler(0.0, PI / 2, 2), 0)


def test_csv_export(tmp_path):
    rep = sample_dilatation(Winding(2), annulus_sampler(0.5, 1.0, 2), 20, keep_samples=True)
    p = tmp_path / "s.csv"
    rep.write_csv(p)
    rows = p.read_text().strip().splitlines()
    assert rows[0] == "x0,x1,sigma_max,sigma_min,J,K_O,K_I"
    assert len(rows) == rep.samples + 1


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 6.0), st.floats(0.2, 6.0), st.integers(2, 4))
def test_folding_sampled_matches_ratio(alpha, beta, n):
    f = Folding(alpha, 0.0, beta, 0.0)
    rep = sample_dilatation(f, wedge_sampler(0.0, alpha, n), 500)
    rho = beta / alpha
    s = max(rho, 1 / rho)
    assert rep.k_max == pytest.approx(s ** (n - 1), rel=0.02)
