"""Independent oracles shared by several test modules."""

import numpy as np

from dlqg.model import ProblemSpec
from dlqg.tensorops import NEIGHBOR


def decoupled_scalar(N=1, **overrides):
    """Three identical uncoupled scalar loops; every matrix a multiple of I."""
    I = np.eye(3)
    mats = dict(A=I, B=I, C=I, W=I, V=I, P0=I, Qxx=I, Qxu=0 * I, Quu=I, Q0=I)
    mats.update({k: v * I if np.isscalar(v) else v for k, v in overrides.items()})
    return ProblemSpec(n=(1, 1, 1), q=(1, 1, 1), p=(1, 1, 1), N=N, **mats)


def innovation_maps(spec: ProblemSpec, k: int):
    """Linear maps from primitive noise to x(k) and ytilde(k), plus noise covariance.

    The primitive vector stacks x(0), w(0..k-1), v(0..k).  The predictor is
    the plain regression of x(k) on y(0:k-1) with zero input; no Kalman
    recursion is involved.
    """
    n, _, p = spec.dims
    dim = n + k * n + (k + 1) * p
    cov = np.zeros((dim, dim))
    cov[:n, :n] = spec.P0
    for j in range(k):
        s = n + j * n
        cov[s:s + n, s:s + n] = spec.W
    for j in range(k + 1):
        s = n + k * n + j * p
        cov[s:s + p, s:s + p] = spec.V
    X = np.zeros((n, dim))
    X[:, :n] = np.eye(n)
    Ys = []
    for j in range(k + 1):
        Yj = spec.C @ X
        Yj[:, n + k * n + j * p:n + k * n + (j + 1) * p] += np.eye(p)
        Ys.append(Yj)
        if j < k:
            X = spec.A @ X
            X[:, n + j * n:n + (j + 1) * n] += np.eye(n)
    if k == 0:
        yt = Ys[0]
    else:
        past = np.vstack(Ys[:k])
        gain = np.linalg.solve(past @ cov @ past.T, past @ cov @ X.T).T
        yt = Ys[k] - spec.C @ gain @ past
    return X, yt, cov


def regression_local_gain(spec: ProblemSpec, k: int, mask=NEIGHBOR):
    """A_i Cov{x, yt_S} Cov{yt_S}^-1 for every player (scalar blocks)."""
    X, yt, cov = innovation_maps(spec, k)
    n, _, p = spec.dims
    out = np.zeros((n, p))
    for i in range(3):
        seen = mask.row(i)
        cxy = X @ cov @ yt[seen].T
        cyy = yt[seen] @ cov @ yt[seen].T
        out[i, seen] = spec.A[i] @ np.linalg.solve(cyy, cxy.T).T
    return out
