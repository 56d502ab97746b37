"""Gain synthesis for the local-correction part of the controller.

The correction gains ``F(k)`` (block diagonal) and ``F1(k)`` (neighbour
pattern) minimise

    Jt = sum_k Tr{H F V F'} + Tr{H (F C - L) P1 (F C - L)'}
              + Tr{H M Yt M'} + 2 Tr{H (F C - L) Pt M'},
    M(k) = F1(k) - L(k) (K1(k-1) + B F(k-1)),

where every covariance comes from the filter pass.  After vectorising
the nonzero blocks into

    zeta(k) = [xi1(k-1); xi2(k)],  k = 1..N-1,     zeta(N) = xi1(N-1),

``Jt / 2`` becomes the chain-structured quadratic

    sum_k 1/2 zeta(k)' Z1(k) zeta(k) + zeta(k)' Z2(k) zeta(k+1) - zeta(k)' b(k)

plus a constant, which a backward Riccati-like sweep minimises exactly.
``b(k)`` collects every linear term of the expansion, including the two
produced by the cross term with ``Pt``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .errors import DimensionError, NumericalError
from .filtering import FilterPass
from .model import InformationPattern, ProblemSpec
from .riccati import RiccatiPass
from .tensorops import (
    DIAGONAL,
    DIAGONAL_ORDER,
    NEIGHBOR,
    NEIGHBOR_ORDER,
    SelectorMatrix,
    SparsityMask,
    build_selector,
    kron,
    min_eig,
    spd_solve,
    symmetrize,
    vec,
)

PD_TOL = 1e-10
MASK_TOL = 1e-10


@dataclass(frozen=True)
class QpAssembly:
    """Per-stage data of the structured QP; list index ``k - 1`` holds stage ``k``."""

    E1: SelectorMatrix
    E2: SelectorMatrix
    Z1: list
    Z2: list
    b: list
    constant: float  # Jt at zeta = 0

    @property
    def N(self):
        return len(self.Z1)

    @property
    def dims(self):
        return [z.shape[0] for z in self.Z1]

    @property
    def E(self):
        return la.block_diag(self.E1.entries, self.E2.entries)

    def objective(self, zetas):
        """Value of the reduced quadratic (``Jt = 2 * objective + constant``)."""
        total = 0.0
        for k, z in enumerate(zetas):
            total += 0.5 * z @ self.Z1[k] @ z - z @ self.b[k]
            if k < self.N - 1:
                total += z @ self.Z2[k] @ zetas[k + 1]
        return float(total)

    def gradient(self, zetas):
        grads = []
        for k, z in enumerate(zetas):
            g = self.Z1[k] @ z - self.b[k]
            if k < self.N - 1:
                g = g + self.Z2[k] @ zetas[k + 1]
            if k > 0:
                g = g + self.Z2[k - 1].T @ zetas[k - 1]
            grads.append(g)
        return grads


@dataclass(frozen=True)
class GainSchedule:
    """Optimal correction gains.

    ``F1[0]`` and ``G[0]`` are zero: there is no delayed innovation at k = 0.
    """

    F: np.ndarray   # (N, q, p), block diagonal
    F1: np.ndarray  # (N, q, p), neighbour pattern
    G: np.ndarray   # (N, q, p), neighbour pattern
    R: list
    c: list
    zeta: list
    qp_value: float
    Jtilde: float   # optimal Jt including the constant dropped by the QP


def selectors(spec: ProblemSpec):
    E1 = build_selector(DIAGONAL, spec.q, spec.p, DIAGONAL_ORDER)
    E2 = build_selector(NEIGHBOR, spec.q, spec.p, NEIGHBOR_ORDER)
    return E1, E2


def trace_objective(spec: ProblemSpec, ric: RiccatiPass, filt: FilterPass, F, F1):
    """Evaluate ``Jt`` directly from its trace expansion (``F1[0]`` is ignored)."""
    C, B, V = spec.C, spec.B, spec.V
    H, L = ric.H, ric.L
    total = 0.0
    for k in range(spec.N):
        D = F[k] @ C - L[k]
        total += np.trace(H[k] @ F[k] @ V @ F[k].T) + np.trace(H[k] @ D @ filt.P1[k] @ D.T)
        if k >= 1:
            M = F1[k] - L[k] @ (filt.K1[k - 1] + B @ F[k - 1])
            total += np.trace(H[k] @ M @ filt.Ytilde[k - 1] @ M.T)
            total += 2.0 * np.trace(H[k] @ D @ filt.Ptilde[k] @ M.T)
    return float(total)


def assemble_qp(spec: ProblemSpec, ric: RiccatiPass, filt: FilterPass, cross_terms=True) -> QpAssembly:
    """Stage matrices of the QP in ``zeta``.

    ``cross_terms=False`` drops the linear terms contributed by the
    ``Ptilde`` cross products; the resulting gains are suboptimal and the
    switch exists only to measure how much those terms matter.
    """
    N = spec.N
    _, q, p = spec.dims
    C, B = spec.C, spec.B
    H, L = ric.H, ric.L
    if ric.H.shape[0] != N or filt.K.shape[0] != N:
        raise DimensionError("Riccati and filter passes were computed for a different horizon")
    E1, E2 = selectors(spec)
    e1, e2 = E1.entries, E2.entries
    c1, c2 = E1.columns, E2.columns
    Ip = np.eye(p)

    def top(k):
        # [I 0] E restricted to stage k: vec F(k-1) as a function of zeta(k)
        return e1 if k == N else np.hstack([e1, np.zeros((q * p, c2))])

    def bottom(k):
        # vec(F1(k) - L(k) B F(k-1)) as a function of zeta(k)
        return np.hstack([-kron(Ip, L[k] @ B) @ e1, e2])

    Z1, Z2, b = [], [], []
    for k in range(1, N + 1):
        T = top(k)
        D1 = kron(filt.Y1[k - 1], H[k - 1])
        z1 = T.T @ D1 @ T
        bk = T.T @ kron(C @ filt.P1[k - 1], H[k - 1]) @ vec(L[k - 1])
        if k >= 2 and cross_terms:
            bk += T.T @ kron(C @ filt.Ptilde[k - 1], H[k - 1]) @ vec(L[k - 1] @ filt.K1[k - 2])
        if k < N:
            Mb = bottom(k)
            D2 = kron(filt.Ytilde[k - 1], H[k])
            z1 = z1 + Mb.T @ D2 @ Mb
            bk += Mb.T @ D2 @ vec(L[k] @ filt.K1[k - 1])
            if cross_terms:
                bk += Mb.T @ kron(filt.Ptilde[k].T, H[k]) @ vec(L[k])
            Z2.append(Mb.T @ kron(filt.Ptilde[k].T @ C.T, H[k]) @ top(k + 1))
        z1 = symmetrize(z1)
        if min_eig(z1) <= PD_TOL * max(1.0, np.abs(z1).max()):
            raise NumericalError(f"Z1({k}) is not positive definite")
        Z1.append(z1)
        b.append(bk)

    zero = np.zeros((N, q, p))
    constant = trace_objective(spec, ric, filt, zero, zero)
    return QpAssembly(E1, E2, Z1, Z2, b, constant)


def solve_chain(asm: QpAssembly):
    """Backward sweep for ``R, c`` then forward substitution for ``zeta``."""
    N = asm.N
    R = [None] * N
    c = [None] * N
    R[N - 1] = asm.Z1[N - 1]
    c[N - 1] = asm.b[N - 1]
    for k in range(N - 2, -1, -1):
        Z2 = asm.Z2[k]
        X = spd_solve(R[k + 1], np.column_stack([Z2.T, c[k + 1]]), what=f"R({k + 2})")
        R[k] = symmetrize(asm.Z1[k] - Z2 @ X[:, :-1])
        c[k] = asm.b[k] - Z2 @ X[:, -1]
        if min_eig(R[k]) <= 0:
            raise NumericalError(f"R({k + 1}) lost positive definiteness")
    zeta = [spd_solve(R[0], c[0], what="R(1)")]
    for k in range(1, N):
        zeta.append(spd_solve(R[k], c[k] - asm.Z2[k - 1].T @ zeta[k - 1], what=f"R({k + 1})"))
    return R, c, zeta


def unpack(spec: ProblemSpec, asm: QpAssembly, zetas):
    """Turn the stacked ``zeta`` vectors back into ``F`` and ``F1`` sequences."""
    N = spec.N
    _, q, p = spec.dims
    c1 = asm.E1.columns
    F = np.zeros((N, q, p))
    F1 = np.zeros((N, q, p))
    for k in range(1, N + 1):
        z = zetas[k - 1]
        F[k - 1] = asm.E1.expand(z[:c1])
        if k < N:
            F1[k] = asm.E2.expand(z[c1:])
    return F, F1


def pack(spec: ProblemSpec, asm: QpAssembly, F, F1):
    N = spec.N
    out = []
    for k in range(1, N + 1):
        xi1 = asm.E1.compress(F[k - 1])
        out.append(xi1 if k == N else np.concatenate([xi1, asm.E2.compress(F1[k])]))
    return out


def derive_G(spec: ProblemSpec, filt: FilterPass, F, F1):
    """Coefficient of ``y(k-1)`` when the control law is written in raw outputs."""
    G = np.zeros_like(F1)
    part = spec.gain_part
    for k in range(1, spec.N):
        Gk = F1[k] - F[k] @ spec.C @ (filt.K1[k - 1] + spec.B @ F[k - 1])
        if not NEIGHBOR.conforms(Gk, part, atol=MASK_TOL * max(1.0, np.abs(Gk).max())):
            raise NumericalError(f"G({k}) violates the neighbour sparsity pattern")
        G[k] = NEIGHBOR.apply(Gk, part)
    return G


def solve_gains(spec: ProblemSpec, ric: RiccatiPass, filt: FilterPass, asm: QpAssembly | None = None) -> GainSchedule:
    if asm is None:
        asm = assemble_qp(spec, ric, filt)
    R, c, zeta = solve_chain(asm)
    F, F1 = unpack(spec, asm, zeta)
    G = derive_G(spec, filt, F, F1)
    value = asm.objective(zeta)
    for arr in (F, F1, G):
        arr.setflags(write=False)
    return GainSchedule(F, F1, G, R, c, zeta, value, 2.0 * value + asm.constant)


def dense_qp_oracle(asm: QpAssembly):
    """Solve the whole stacked system at once (verification only)."""
    sizes = asm.dims
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = offsets[-1]
    Hs = np.zeros((total, total))
    rhs = np.zeros(total)
    for k in range(asm.N):
        sk = slice(offsets[k], offsets[k + 1])
        Hs[sk, sk] = asm.Z1[k]
        rhs[sk] = asm.b[k]
        if k < asm.N - 1:
            sn = slice(offsets[k + 1], offsets[k + 2])
            Hs[sk, sn] = asm.Z2[k]
            Hs[sn, sk] = asm.Z2[k].T
    lo = min_eig(Hs)
    if lo <= 0:
        raise NumericalError(f"stacked Hessian is not positive definite (min eigenvalue {lo:.3e})")
    sol = la.cho_solve(la.cho_factor(Hs), rhs)
    return [sol[offsets[k]:offsets[k + 1]] for k in range(asm.N)]


def onestep_gains(spec: ProblemSpec, ric: RiccatiPass, filt: FilterPass, mask: SparsityMask = DIAGONAL):
    """Per-step gains on the current local innovation for one-step delayed sharing.

    With ``u(k) = L(k) xhat(k|k-1) + F(k) ytilde(k)`` the stage cost in ``F``
    is ``Tr{H F Yt F'} - 2 Tr{H F C P L'}`` plus a constant, minimised over
    gains with the given block pattern.
    """
    order = DIAGONAL_ORDER if mask is DIAGONAL else None
    E = build_selector(mask, spec.q, spec.p, order)
    e = E.entries
    _, q, p = spec.dims
    F = np.zeros((spec.N, q, p))
    for k in range(spec.N):
        H = ric.H[k]
        lhs = e.T @ kron(filt.Ytilde[k], H) @ e
        rhs = e.T @ kron(spec.C @ filt.P[k], H) @ vec(ric.L[k])
        F[k] = E.expand(spd_solve(lhs, rhs, what=f"one-step normal equations ({k})"))
    F.setflags(write=False)
    return F


def central_filter_gains(spec: ProblemSpec, ric: RiccatiPass, filt: FilterPass):
    """``L(k) P(k) C' Yt(k)^-1``: the innovation gain of the undelayed LQG law."""
    out = np.empty((spec.N, spec.dims[1], spec.dims[2]))
    for k in range(spec.N):
        out[k] = ric.L[k] @ spd_solve(filt.Ytilde[k], spec.C @ filt.P[k]).T
    return out


def _matrices(arr):
    return [np.asarray(m).tolist() for m in arr]


def gains_document(pattern: InformationPattern, spec: ProblemSpec, ric: RiccatiPass, filt: FilterPass, F=None, F1=None, G=None):
    """Serializable gain schedule; ``F1`` and ``G`` start at k = 1."""
    empty = np.zeros((0, spec.dims[1], spec.dims[2]))
    F = empty if F is None else F
    F1 = empty if F1 is None else F1[1:]
    G = empty if G is None else G[1:]
    return {
        "pattern": pattern.value,
        "N": spec.N,
        "F": _matrices(F),
        "F1": _matrices(F1),
        "G": _matrices(G),
        "L": _matrices(ric.L),
        "K": _matrices(filt.K),
        "K1": _matrices(filt.K1),
    }


def dump_gains(doc) -> str:
    # repr-based float output is the shortest exact round-trip form
    return json.dumps(doc, separators=(",", ":")) + "\n"


def save_gains(doc, path):
    Path(path).write_text(dump_gains(doc))


def load_gains(path):
    doc = json.loads(Path(path).read_text())
    required = {"pattern", "N", "F", "F1", "G", "L", "K", "K1"}
    if set(doc) != required:
        raise DimensionError(f"gain file fields {sorted(doc)} differ from {sorted(required)}")
    out = {"pattern": InformationPattern.parse(doc["pattern"]), "N": int(doc["N"])}
    for name in ("F", "F1", "G", "L", "K", "K1"):
        out[name] = np.array(doc[name], dtype=float)
    return out
