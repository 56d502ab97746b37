"""Kalman filtering for the delayed-sharing problem.

Besides the standard one-step predictor this computes the gain ``K1``
each player applies to the innovations it can see one step late, and the
covariances of the resulting local estimation errors.  Nothing here
depends on the control sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import ProblemSpec
from .tensorops import NEIGHBOR, BlockPartition, SparsityMask, block_get, block_set, spd_solve, symmetrize


@dataclass(frozen=True)
class FilterPass:
    """All off-line estimator quantities.

    ``K1[k]`` multiplies the innovation ``ytilde(k)`` (it is applied at time
    k+1).  ``P1``, ``Y1`` and ``Ptilde`` are indexed by the time of the
    local estimate, with ``P1[0] = P0`` and ``Ptilde[0] = 0``.
    """

    P: np.ndarray       # (N+1, n, n) prediction-error covariance
    K: np.ndarray       # (N, n, p)   Kalman predictor gain
    Ytilde: np.ndarray  # (N, p, p)   innovation covariance
    K1: np.ndarray      # (N, n, p)   local-information gain
    P1: np.ndarray      # (N, n, n)   covariance of x - xhat1
    Y1: np.ndarray      # (N, p, p)   covariance of y - C xhat1
    Ptilde: np.ndarray  # (N, n, p)   E{e1(k) ytilde(k-1)'}

    @property
    def dK(self):
        return self.K - self.K1


def kalman_pass(spec: ProblemSpec):
    """Return ``(P, K, Ytilde)`` for the one-step predictor started at ``P0``."""
    A, C, W, V = spec.A, spec.C, spec.W, spec.V
    n, _, p = spec.dims
    N = spec.N
    P = np.empty((N + 1, n, n))
    K = np.empty((N, n, p))
    Y = np.empty((N, p, p))
    P[0] = symmetrize(spec.P0)
    for k in range(N):
        Y[k] = symmetrize(C @ P[k] @ C.T + V)
        try:
            K[k] = spd_solve(Y[k], C @ P[k] @ A.T, what=f"Ytilde({k})").T
        except NumericalError as exc:
            raise NumericalError(f"{exc}; the measurement noise covariance V must be positive definite") from None
        P[k + 1] = symmetrize(A @ P[k] @ A.T + W - K[k] @ C @ P[k] @ A.T)
    return P, K, Y


def local_gain(spec: ProblemSpec, Pk, mask: SparsityMask = NEIGHBOR):
    """Gain applied by the players to the innovations of their neighbours.

    Row block ``i`` only sees the innovations of the blocks listed in
    ``mask.row(i)``; each row is the regression of ``A_i x`` on those
    innovations.  Off-pattern blocks are exactly zero.
    """
    A, C, V = spec.A, spec.C, spec.V
    xpart = spec.state_part
    cpart = BlockPartition(spec.p, spec.n)
    vpart = BlockPartition(spec.p, spec.p)
    apart = BlockPartition(spec.n, spec.n)
    kpart = BlockPartition(spec.n, spec.p)
    everyone = list(range(len(spec.n)))
    K1 = np.zeros(kpart.shape)
    for i in everyone:
        seen = mask.row(i)
        Ai = block_get(A, apart, [i], everyone)
        Cs = block_get(C, cpart, seen, seen)
        cross = block_get(Pk, xpart, everyone, seen) @ Cs.T
        Ys = Cs @ block_get(Pk, xpart, seen, seen) @ Cs.T + block_get(V, vpart, seen, seen)
        block_set(K1, kpart, [i], seen, spd_solve(Ys, (Ai @ cross).T, what=f"local innovation covariance {i}").T)
    return K1


def local_gain_pass(spec: ProblemSpec, P, mask: SparsityMask = NEIGHBOR):
    return np.stack([local_gain(spec, P[k], mask) for k in range(spec.N)])


def local_error_pass(spec: ProblemSpec, P, K, K1, Ytilde):
    """Return ``(P1, Y1, Ptilde)`` for the local estimation error ``x - xhat1``."""
    C, V = spec.C, spec.V
    n, _, p = spec.dims
    N = spec.N
    P1 = np.empty((N, n, n))
    Y1 = np.empty((N, p, p))
    Pt = np.zeros((N, n, p))
    P1[0] = symmetrize(spec.P0)
    for k in range(1, N):
        dK = K[k - 1] - K1[k - 1]
        P1[k] = symmetrize(P[k] + dK @ Ytilde[k - 1] @ dK.T)
        Pt[k] = dK @ Ytilde[k - 1]
    for k in range(N):
        Y1[k] = symmetrize(C @ P1[k] @ C.T + V)
    return P1, Y1, Pt


def filter_pass(spec: ProblemSpec, mask: SparsityMask = NEIGHBOR) -> FilterPass:
    P, K, Y = kalman_pass(spec)
    K1 = local_gain_pass(spec, P, mask)
    P1, Y1, Pt = local_error_pass(spec, P, K, K1, Y)
    arrays = (P, K, Y, K1, P1, Y1, Pt)
    for arr in arrays:
        arr.setflags(write=False)
    return FilterPass(*arrays)
