import numpy as np
import pytest
import scipy.linalg as la

from dlqg.errors import NumericalError
from dlqg.model import InformationPattern, benchmark_problem, random_problem
from dlqg.riccati import riccati_backward
from dlqg.runtime import build_policy, draw_noise, rollout

from helpers import decoupled_scalar


def test_one_step_hand_computation():
    ric = riccati_backward(decoupled_scalar(N=1))
    np.testing.assert_allclose(ric.H[0], 2 * np.eye(3))
    # the control that minimises the cost is u = -x / 2
    np.testing.assert_allclose(ric.L[0], -0.5 * np.eye(3))
    np.testing.assert_allclose(ric.S[0], 1.5 * np.eye(3))
    np.testing.assert_allclose(ric.S[1], np.eye(3))


def test_zero_cost():
    ric = riccati_backward(decoupled_scalar(N=6, Qxx=0, Q0=0))
    assert not ric.S.any() and not ric.L.any() and ric.Jw == 0


def test_converges_to_algebraic_riccati(example_passes):
    ric, _ = example_passes
    spec = benchmark_problem()
    Sstar = la.solve_discrete_are(spec.A, spec.B, spec.Qxx, spec.Quu, s=spec.Qxu)
    assert np.linalg.norm(ric.S[0] - Sstar) / np.linalg.norm(Sstar) <= 1e-8
    assert np.abs(ric.S - np.swapaxes(ric.S, 1, 2)).max() <= 1e-12
    assert min(np.linalg.eigvalsh(H)[0] for H in ric.H) > 0


def test_terminal_and_jw(rng):
    spec = random_problem(rng, 5)
    ric = riccati_backward(spec)
    assert np.array_equal(ric.S[-1], spec.Q0)
    Jw = np.trace(ric.S[0] @ spec.P0) + sum(np.trace(ric.S[k + 1] @ spec.W) for k in range(5))
    assert ric.Jw == pytest.approx(Jw, rel=1e-14)


def test_trace_nondecreasing_in_horizon(rng):
    for _ in range(10):
        spec = random_problem(rng, 1).replace(Q0=np.zeros((3, 3)))
        traces = [np.trace(riccati_backward(spec.with_horizon(N)).S[0]) for N in range(1, 15)]
        assert np.all(np.diff(traces) >= -1e-9 * max(traces))


def test_singular_input_weight_is_reported():
    spec = decoupled_scalar(N=2, B=0, Quu=0)
    with pytest.raises(NumericalError, match="Quu must be positive definite"):
        riccati_backward(spec)


@pytest.mark.parametrize("pattern", [InformationPattern.THREE_PLAYER, InformationPattern.CENTRAL_2])
def test_cost_splits_into_jw_plus_control_deviation(rng, pattern):
    spec = random_problem(rng, 8, stable=True)
    policy = build_policy(spec, pattern)
    x0, w, v = draw_noise(spec, 7, range(4000))
    xs, us, _, costs = rollout(policy, x0, w, v)
    dev = us - np.einsum("kij,rkj->rki", policy.ric.L, xs[:, :-1])
    excess = np.einsum("rki,kij,rkj->r", dev, policy.ric.H, dev)
    rest = costs.sum(axis=1) - excess
    se = rest.std(ddof=1) / np.sqrt(rest.size)
    assert abs(rest.mean() - policy.ric.Jw) <= 3 * se
