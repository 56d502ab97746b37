"""Backward LQR recursion and the control-independent part of the cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import ProblemSpec
from .tensorops import spd_solve, symmetrize


@dataclass(frozen=True)
class RiccatiPass:
    S: np.ndarray  # (N+1, n, n), S[N] = Q0
    H: np.ndarray  # (N, q, q)
    L: np.ndarray  # (N, q, n)
    Jw: float


def riccati_backward(spec: ProblemSpec) -> RiccatiPass:
    """Cost-to-go matrices S(k), input weights H(k) and LQR gains L(k).

    With these, the expected cost of any causal policy splits as
    ``sum_k E{(u - L x)' H (u - L x)} + Jw``, so ``u = L x`` is the LQR law
    and ``L = -H^-1 (B' S A + Qxu')`` carries a minus sign.
    """
    A, B = spec.A, spec.B
    n, q, _ = spec.dims
    N = spec.N
    S = np.empty((N + 1, n, n))
    H = np.empty((N, q, q))
    L = np.empty((N, q, n))
    S[N] = symmetrize(spec.Q0)
    for k in range(N - 1, -1, -1):
        Sn = S[k + 1]
        H[k] = symmetrize(B.T @ Sn @ B + spec.Quu)
        cross = B.T @ Sn @ A + spec.Qxu.T
        try:
            L[k] = -spd_solve(H[k], cross, what=f"H({k})")
        except NumericalError as exc:
            raise NumericalError(f"{exc}; the input weight Quu must be positive definite") from None
        S[k] = symmetrize(A.T @ Sn @ A + spec.Qxx + cross.T @ L[k])
    Jw = float(np.trace(S[0] @ spec.P0) + sum(np.trace(S[k + 1] @ spec.W) for k in range(N)))
    for arr in (S, H, L):
        arr.setflags(write=False)
    return RiccatiPass(S, H, L, Jw)
