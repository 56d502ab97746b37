import numpy as np
import pytest
import scipy.linalg as la

from dlqg.filtering import filter_pass, kalman_pass, local_error_pass, local_gain
from dlqg.model import InformationPattern, benchmark_problem, random_problem
from dlqg.runtime import build_policy, draw_noise, rollout
from dlqg.tensorops import FULL, NEIGHBOR, BlockPartition

from helpers import decoupled_scalar, innovation_maps, regression_local_gain


def test_scalar_predictor_step():
    P, K, Y = kalman_pass(decoupled_scalar(N=2))
    np.testing.assert_allclose(P[1], 1.5 * np.eye(3))
    np.testing.assert_allclose(K[0], 0.5 * np.eye(3))
    np.testing.assert_allclose(Y[0], 2 * np.eye(3))


def test_known_state_stays_known():
    P, K, _ = kalman_pass(decoupled_scalar(N=5, W=0, P0=0))
    assert not P.any() and not K.any()


def test_local_gain_block_diagonal_case():
    A = np.array([[0.7, 0, 1.3], [0.4, -0.5, 0], [0, 2.0, 0.9]])
    Pk = np.diag([2.0, 0.5, 3.0])
    V = np.diag([1.0, 0.25, 4.0])
    spec = decoupled_scalar(N=1, A=A, V=V)
    K1 = local_gain(spec, Pk)
    assert K1[0, 0] == pytest.approx(A[0, 0] * Pk[0, 0] / (Pk[0, 0] + V[0, 0]), rel=1e-14)
    assert K1[0, 2] == pytest.approx(A[0, 2] * Pk[2, 2] / (Pk[2, 2] + V[2, 2]), rel=1e-14)
    assert K1[0, 1] == 0.0
    assert NEIGHBOR.conforms(K1, spec.gain_part)


def test_full_mask_recovers_kalman_gain(rng):
    spec = random_problem(rng, 6, sizes=(2, 1, 1))
    filt = filter_pass(spec, mask=FULL)
    np.testing.assert_allclose(filt.K1, filt.K, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(filt.P1[1:], filt.P[1:-1], rtol=1e-12, atol=1e-12)
    assert np.abs(filt.Ptilde).max() < 1e-12


def test_local_gain_matches_regression_oracle(example_passes):
    _, filt = example_passes
    spec = benchmark_problem()
    for k in (0, 1, 5):
        np.testing.assert_allclose(filt.K1[k], regression_local_gain(spec, k), rtol=0, atol=1e-10)
    _, yt, cov = innovation_maps(spec, 5)
    np.testing.assert_allclose(filt.Ytilde[5], yt @ cov @ yt.T, rtol=1e-10)


def test_local_error_boundaries_and_ordering(rng):
    for _ in range(5):
        spec = random_problem(rng, 10, sizes=((1, 2, 1), (1, 1, 1), (1, 1, 2)))
        f = filter_pass(spec)
        assert np.array_equal(f.P1[0], spec.P0) and not f.Ptilde[0].any()
        np.testing.assert_allclose(f.Y1[0], spec.C @ spec.P0 @ spec.C.T + spec.V)
        floor = np.linalg.eigvalsh(spec.V)[0]
        for k in range(spec.N):
            assert np.linalg.eigvalsh(f.P1[k] - f.P[k])[0] >= -1e-10
            assert np.linalg.eigvalsh(f.Ytilde[k])[0] >= floor - 1e-10
            assert np.linalg.eigvalsh(f.Y1[k])[0] >= floor - 1e-10
            assert NEIGHBOR.conforms(f.K1[k], BlockPartition(spec.n, spec.p))


def test_local_error_with_exact_gain():
    spec = benchmark_problem(N=8)
    P, K, Y = kalman_pass(spec)
    P1, _, Pt = local_error_pass(spec, P, K, K, Y)
    np.testing.assert_array_equal(P1[1:], P[1:-1])
    assert not Pt.any()


def test_innovations_are_white():
    T = 20000
    spec = benchmark_problem(N=T)
    policy = build_policy(spec, InformationPattern.CENTRAL_0)
    x0, w, v = draw_noise(spec, 11, [0])
    preds = []
    _, _, ys, _ = rollout(policy, x0, w, v, observer=lambda k, x, y, s: preds.append(s.xhat_local[0]))
    yt = ys[0] - np.array(preds) @ spec.C.T
    # whiten each innovation by its own covariance
    white = np.stack([la.solve_triangular(la.cholesky(policy.filt.Ytilde[k], lower=True), yt[k], lower=True)
                      for k in range(T)])
    for lag in (1, 2, 3):
        acov = white[lag:].T @ white[:-lag] / T
        assert np.abs(acov).max() <= 4 / np.sqrt(T)


def test_predictor_splits_into_local_estimate_plus_correction():
    spec = benchmark_problem(N=40)
    policy = build_policy(spec, InformationPattern.THREE_PLAYER)
    f = policy.filt
    x0, w, v = draw_noise(spec, 5, range(8))
    states = []
    _, us, ys, _ = rollout(policy, x0, w, v, observer=lambda k, x, y, s: states.append(s))
    xp = np.zeros((8, 3))
    for k in range(spec.N):
        if k > 0:
            yt_prev = ys[:, k - 1] - prev_pred @ spec.C.T
            split = states[k].xhat_local + yt_prev @ (f.K[k - 1] - f.K1[k - 1]).T
            np.testing.assert_allclose(split, xp, rtol=0, atol=1e-10 * max(1.0, np.abs(xp).max()))
        prev_pred = xp
        xp = xp @ spec.A.T + us[:, k] @ spec.B.T + (ys[:, k] - xp @ spec.C.T) @ f.K[k].T
