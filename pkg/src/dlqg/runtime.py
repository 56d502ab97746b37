"""On-line controllers and the closed-loop plant simulator.

All step functions accept a leading batch dimension on the state and
measurement arrays, so many Monte Carlo runs advance together.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .filtering import FilterPass, filter_pass
from .errors import DimensionError
from .model import InformationPattern, ProblemSpec, require_valid
from .noise import STREAM_V, STREAM_W, STREAM_X0, gaussian
from .riccati import RiccatiPass, riccati_backward
from .synthesis import GainSchedule, central_filter_gains, onestep_gains, solve_gains
from .tensorops import NEIGHBOR, BlockPartition, block_get

# the only vectors propagated by the estimator dynamics
ESTIMATOR_FIELDS = ("xhat_delayed", "xhat_local")


def _mv(M, x):
    return x @ M.T


@dataclass(frozen=True)
class ControllerState:
    """Memory carried into step ``k``.

    ``xhat_delayed`` is xhat(k-1|k-2).  ``xhat_local`` is xhat1(k) for the
    three-player law, xhat(k|k-2) for the two-step delayed law and the
    one-step predictor xhat(k|k-1) for the undelayed and one-step sharing
    laws.  ``y_prev`` is y(k-1), the measurement the players exchange.
    Everything starts at zero.
    """

    k: int
    xhat_delayed: np.ndarray
    xhat_local: np.ndarray
    y_prev: np.ndarray

    def as_vector(self):
        return np.concatenate([self.xhat_delayed, self.xhat_local, self.y_prev], axis=-1)

    @classmethod
    def from_vector(cls, k, s, n, p):
        return cls(k, s[..., :n], s[..., n:2 * n], s[..., 2 * n:2 * n + p])


@dataclass(frozen=True)
class Policy:
    """A synthesized controller for one information pattern."""

    pattern: InformationPattern
    spec: ProblemSpec
    ric: RiccatiPass
    filt: FilterPass
    F: np.ndarray | None = None
    F1: np.ndarray | None = None
    gains: GainSchedule | None = None
    _dK: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # per-step K - K1 is looked up inside the time loop
        object.__setattr__(self, "_dK", np.asarray(self.filt.K - self.filt.K1))

    def initial_state(self, batch=()):
        n, _, p = self.spec.dims
        z = np.zeros(tuple(batch) + (n,))
        return ControllerState(0, z, z.copy(), np.zeros(tuple(batch) + (p,)))

    @property
    def state_size(self):
        n, _, p = self.spec.dims
        return 2 * n + p

    def step(self, state: ControllerState, y):
        if self.pattern is InformationPattern.THREE_PLAYER:
            return three_player_step(self, state, y)
        if self.pattern is InformationPattern.CENTRAL_2:
            return centralized_delay_step(self, state, y, 2)
        if self.pattern is InformationPattern.CENTRAL_0:
            return centralized_delay_step(self, state, y, 0)
        return one_step_sharing_step(self, state, y)


def build_policy(spec: ProblemSpec, pattern: InformationPattern, ric=None, filt=None) -> Policy:
    require_valid(spec)
    ric = riccati_backward(spec) if ric is None else ric
    filt = filter_pass(spec) if filt is None else filt
    if pattern is InformationPattern.THREE_PLAYER:
        gains = solve_gains(spec, ric, filt)
        return Policy(pattern, spec, ric, filt, gains.F, gains.F1, gains)
    if pattern is InformationPattern.ONE_STEP:
        return Policy(pattern, spec, ric, filt, onestep_gains(spec, ric, filt))
    if pattern is InformationPattern.CENTRAL_0:
        return Policy(pattern, spec, ric, filt, central_filter_gains(spec, ric, filt))
    return Policy(pattern, spec, ric, filt)


def policy_from_gains(spec: ProblemSpec, gains: dict) -> Policy:
    """Rebuild a policy from a loaded gain file, checking it fits ``spec``."""
    require_valid(spec)
    n, q, p = spec.dims
    N = spec.N
    if gains["N"] != N:
        raise DimensionError(f"gain file horizon {gains['N']} differs from problem horizon {N}")
    ric, filt = riccati_backward(spec), filter_pass(spec)
    for name, ref in (("L", ric.L), ("K", filt.K), ("K1", filt.K1)):
        got = gains[name]
        if got.shape != ref.shape or not np.allclose(got, ref, rtol=1e-9, atol=1e-12):
            raise DimensionError(f"gain file {name} does not belong to this problem")
    pattern = gains["pattern"]
    F = F1 = None
    if pattern in (InformationPattern.THREE_PLAYER, InformationPattern.ONE_STEP, InformationPattern.CENTRAL_0):
        F = gains["F"]
        if F.shape != (N, q, p):
            raise DimensionError(f"F has shape {F.shape}, expected {(N, q, p)}")
    if pattern is InformationPattern.THREE_PLAYER:
        F1 = gains["F1"]
        if F1.shape != (N - 1, q, p):
            raise DimensionError(f"F1 has shape {F1.shape}, expected {(N - 1, q, p)}")
        F1 = np.concatenate([np.zeros((1, q, p)), F1])
    return Policy(pattern, spec, ric, filt, F, F1)


def _check_time(policy, state):
    if not 0 <= state.k < policy.spec.N:
        raise IndexError(f"time index {state.k} outside [0, {policy.spec.N})")


def three_player_step(policy: Policy, state: ControllerState, y):
    """Optimal delayed-sharing law.

    u(k) = F(k) (y(k) - C xhat1(k)) + F1(k) ytilde(k-1) + L(k) xhat(k)
    with xhat(k) = xhat1(k) - (B F(k-1) + K1(k-1)) ytilde(k-1).
    """
    _check_time(policy, state)
    spec, filt, k = policy.spec, policy.filt, state.k
    A, B, C = spec.A, spec.B, spec.C
    F, F1, L = policy.F, policy.F1, policy.ric.L
    local = state.xhat_local
    if k > 0:
        yt_prev = state.y_prev - _mv(C, state.xhat_delayed)
        common = local - _mv(B @ F[k - 1] + filt.K1[k - 1], yt_prev)
        pred = local + _mv(policy._dK[k - 1], yt_prev)
        u = _mv(F[k], y - _mv(C, local)) + _mv(F1[k], yt_prev) + _mv(L[k], common)
    else:
        pred = local
        u = _mv(F[0], y - _mv(C, local)) + _mv(L[0], local)
    local_next = _mv(A, pred) + _mv(B, u) + _mv(filt.K1[k], y - _mv(C, pred))
    return u, ControllerState(k + 1, pred, local_next, np.array(y, dtype=float))


def centralized_delay_step(policy: Policy, state: ControllerState, y, d: int):
    """Certainty-equivalent LQG law using y(0:k-d), d in {0, 2}."""
    if d not in (0, 2):
        raise ValueError(f"centralized delay must be 0 or 2, got {d}")
    _check_time(policy, state)
    if d == 0:
        return _predictor_step(policy, state, y, policy.F)
    spec, filt, k = policy.spec, policy.filt, state.k
    A, B, C = spec.A, spec.B, spec.C
    if k > 0:
        pred = state.xhat_local + _mv(filt.K[k - 1], state.y_prev - _mv(C, state.xhat_delayed))
    else:
        pred = state.xhat_local
    u = _mv(policy.ric.L[k], state.xhat_local)
    return u, ControllerState(k + 1, pred, _mv(A, pred) + _mv(B, u), np.array(y, dtype=float))


def one_step_sharing_step(policy: Policy, state: ControllerState, y):
    """u(k) = L(k) xhat(k|k-1) + F(k) ytilde(k) with block-diagonal F(k)."""
    _check_time(policy, state)
    return _predictor_step(policy, state, y, policy.F)


def _predictor_step(policy, state, y, gain):
    spec, k = policy.spec, state.k
    pred = state.xhat_local
    yt = y - _mv(spec.C, pred)
    u = _mv(policy.ric.L[k], pred) + _mv(gain[k], yt)
    nxt = _mv(spec.A, pred) + _mv(spec.B, u) + _mv(policy.filt.K[k], yt)
    return u, ControllerState(k + 1, state.xhat_delayed, nxt, np.array(y, dtype=float))


def common_estimate(policy: Policy, state: ControllerState):
    """xhat(k) = E{x(k) | y(0:k-2)} for the three-player law."""
    if state.k == 0:
        return state.xhat_local
    spec, filt, k = policy.spec, policy.filt, state.k
    yt_prev = state.y_prev - _mv(spec.C, state.xhat_delayed)
    return state.xhat_local - _mv(spec.B @ policy.F[k - 1] + filt.K1[k - 1], yt_prev)


def common_input(policy: Policy, before: ControllerState):
    """Component of u(k) fixed by y(0:k-2) alone, from the state entering step k-1.

    Replays steps k-1 and k with y(k-1) and y(k) replaced by their
    conditional means given the shared history.
    """
    C = policy.spec.C
    if before.k == 0:
        y_mean = _mv(C, before.xhat_local)
    else:
        y_mean = _mv(C, before.xhat_local + _mv(policy._dK[before.k - 1], before.y_prev - _mv(C, before.xhat_delayed)))
    _, mid = policy.step(before, y_mean)
    u, _ = policy.step(mid, _mv(C, common_estimate(policy, mid)))
    return u


def raw_output_form(policy: Policy, state: ControllerState, y):
    """Three-player input written as F y(k) + G y(k-1) + f(y(0:k-2))."""
    spec, k = policy.spec, state.k
    G = policy.gains.G
    xh = common_estimate(policy, state)
    f = _mv(policy.ric.L[k] - policy.F[k] @ spec.C, xh)
    u = _mv(policy.F[k], y) + f
    if k > 0:
        u = u + _mv(G[k], state.y_prev) - _mv(G[k] @ spec.C, state.xhat_delayed)
    return u


def player_input(policy: Policy, i: int, y_hist, k: int):
    """u_i(k) of the three-player law computed by player ``i`` alone.

    Reads only y(0:k-2), y_j(k-1) for the neighbours j of i and y_i(k)
    from ``y_hist``; all other entries may hold anything, NaN included.
    """
    spec, filt = policy.spec, policy.filt
    A, B, C = spec.A, spec.B, spec.C
    F, F1, L = policy.F, policy.F1, policy.ric.L
    blocks = range(len(spec.n))
    xp, yp, up = BlockPartition(spec.n, (1,)), BlockPartition(spec.p, (1,)), BlockPartition(spec.q, (1,))

    def part(v, P, idx):
        return block_get(np.asarray(v).reshape(-1, 1), P, idx, [0]).ravel()

    def gblock(M, rows, cols, rp, cp):
        return block_get(M, BlockPartition(rp, cp), rows, cols)

    me = [i]
    yi_now = part(y_hist[k], yp, me)
    if k == 0:
        return gblock(F[0], me, me, spec.q, spec.p) @ yi_now

    # everything below up to ``common_u`` uses the shared history y(0:k-2)
    state = policy.initial_state()
    for j in range(k - 1):
        _, state = policy.step(state, y_hist[j])
    m = k - 1
    if m > 0:
        yt2 = state.y_prev - C @ state.xhat_delayed
        pred = state.xhat_local + policy._dK[m - 1] @ yt2
        common_prev = state.xhat_local - (B @ F[m - 1] + filt.K1[m - 1]) @ yt2
        common_u = F[m] @ C @ (pred - state.xhat_local) + F1[m] @ yt2 + L[m] @ common_prev
    else:
        pred = np.zeros(sum(spec.n))
        common_u = np.zeros(sum(spec.q))
    xhat_k = A @ pred + B @ common_u

    seen = NEIGHBOR.row(i)
    yt_seen = part(y_hist[m], yp, seen) - gblock(C, seen, list(blocks), spec.p, spec.n) @ pred
    yt_mine = part(y_hist[m], yp, me) - gblock(C, me, list(blocks), spec.p, spec.n) @ pred
    u_mine_prev = part(common_u, up, me) + gblock(F[m], me, me, spec.q, spec.p) @ yt_mine
    local = (
        gblock(A, me, list(blocks), spec.n, spec.n) @ pred
        + gblock(B, me, me, spec.n, spec.q) @ u_mine_prev
        + gblock(filt.K1[m], me, seen, spec.n, spec.p) @ yt_seen
    )
    return (
        gblock(F[k], me, me, spec.q, spec.p) @ (yi_now - gblock(C, me, me, spec.p, spec.n) @ local)
        + gblock(F1[k], me, seen, spec.q, spec.p) @ yt_seen
        + gblock(L[k], me, list(blocks), spec.q, spec.n) @ xhat_k
    )


@dataclass(frozen=True)
class Trajectory:
    x: np.ndarray           # (N+1, n)
    u: np.ndarray           # (N, q)
    y: np.ndarray           # (N, p)
    stage_cost: np.ndarray  # (N+1,), last entry is the terminal cost
    cost: float

    def to_csv(self, path):
        N, n = self.x.shape[0] - 1, self.x.shape[1]
        q, p = self.u.shape[1], self.y.shape[1]
        header = (["k"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(q)]
                  + [f"y{i + 1}" for i in range(p)] + ["stage_cost"])
        fmt = lambda v: format(float(v), ".17g")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(N + 1):
                if k < N:
                    extra = [fmt(v) for v in self.u[k]] + [fmt(v) for v in self.y[k]]
                else:
                    extra = [""] * (q + p)
                w.writerow([k] + [fmt(v) for v in self.x[k]] + extra + [fmt(self.stage_cost[k])])


def stage_costs(spec: ProblemSpec, x, u):
    """Per-step quadratic cost for batched trajectories; last column is terminal."""
    run = (np.einsum("...ki,ij,...kj->...k", x[..., :-1, :], spec.Qxx, x[..., :-1, :])
           + 2 * np.einsum("...ki,ij,...kj->...k", x[..., :-1, :], spec.Qxu, u)
           + np.einsum("...ki,ij,...kj->...k", u, spec.Quu, u))
    term = np.einsum("...i,ij,...j->...", x[..., -1, :], spec.Q0, x[..., -1, :])
    return np.concatenate([run, term[..., None]], axis=-1)


def draw_noise(spec: ProblemSpec, seed: int, runs):
    """Initial states, process and measurement noise for the given run ids."""
    N = spec.N
    x0 = np.stack([gaussian(seed, r, STREAM_X0, 1, spec.P0)[0] for r in runs])
    w = np.stack([gaussian(seed, r, STREAM_W, N, spec.W) for r in runs])
    v = np.stack([gaussian(seed, r, STREAM_V, N, spec.V) for r in runs])
    return x0, w, v


def rollout(policy: Policy, x0, w, v, observer=None):
    """Run the closed loop on explicit noise; batch dimension first."""
    spec = policy.spec
    A, B, C = spec.A, spec.B, spec.C
    R, N = x0.shape[0], spec.N
    n, q, p = spec.dims
    xs = np.empty((R, N + 1, n))
    us = np.empty((R, N, q))
    ys = np.empty((R, N, p))
    x = x0
    state = policy.initial_state((R,))
    for k in range(N):
        y = _mv(C, x) + v[:, k]
        if observer is not None:
            observer(k, x, y, state)
        u, state = policy.step(state, y)
        xs[:, k], us[:, k], ys[:, k] = x, u, y
        x = _mv(A, x) + _mv(B, u) + w[:, k]
    xs[:, N] = x
    costs = stage_costs(spec, xs, us)
    return xs, us, ys, costs


def simulate(spec: ProblemSpec, policy: Policy, seed: int, run: int = 0) -> Trajectory:
    """One closed-loop realization; the same (seed, run) always gives the same trajectory."""
    x0, w, v = draw_noise(spec, seed, [run])
    xs, us, ys, costs = rollout(policy, x0, w, v)
    return Trajectory(xs[0], us[0], ys[0], costs[0], float(costs[0].sum()))


def simulate_costs(policy: Policy, seed: int, runs: int, batch: int = 1000):
    """Realized total cost of runs 0..runs-1 (common random numbers across policies)."""
    out = []
    for start in range(0, runs, batch):
        ids = range(start, min(runs, start + batch))
        x0, w, v = draw_noise(policy.spec, seed, ids)
        out.append(rollout(policy, x0, w, v)[3].sum(axis=1))
    return np.concatenate(out)
