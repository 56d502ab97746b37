"""Block indexing, vec/Kronecker algebra and selector matrices.

Block indices are 0-based throughout: player 1 of the three-player
problem is block 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .errors import NumericalError

COND_LIMIT = 1e12


def vec(M):
    """Stack the columns of ``M`` into a 1-D array."""
    return np.asarray(M).reshape(-1, order="F")


def unvec(v, rows, cols):
    return np.asarray(v).reshape((rows, cols), order="F")


def kron(A, B):
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def commutation_matrix(m: int, n: int) -> np.ndarray:
    """Permutation ``P`` with ``vec(X.T) == P @ vec(X)`` for every m x n ``X``.

    Built as the sum of ``E_ij kron E_ij.T`` over the unit matrices ``E_ij``.
    """
    if m < 1 or n < 1:
        raise ValueError(f"commutation matrix needs m, n >= 1, got {m}, {n}")
    P = np.zeros((m * n, m * n))
    for i in range(m):
        for j in range(n):
            Eij = np.zeros((m, n))
            Eij[i, j] = 1.0
            P += np.kron(Eij, Eij.T)
    return P


@dataclass(frozen=True)
class BlockPartition:
    row_sizes: tuple
    col_sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "row_sizes", tuple(int(s) for s in self.row_sizes))
        object.__setattr__(self, "col_sizes", tuple(int(s) for s in self.col_sizes))
        if min(self.row_sizes + self.col_sizes) < 1:
            raise ValueError("block sizes must be positive")

    @property
    def shape(self):
        return sum(self.row_sizes), sum(self.col_sizes)

    def row_slice(self, i):
        start = sum(self.row_sizes[:i])
        return slice(start, start + self.row_sizes[i])

    def col_slice(self, j):
        start = sum(self.col_sizes[:j])
        return slice(start, start + self.col_sizes[j])

    def row_index(self, blocks):
        return np.concatenate([np.arange(self.shape[0])[self.row_slice(i)] for i in blocks])

    def col_index(self, blocks):
        return np.concatenate([np.arange(self.shape[1])[self.col_slice(j)] for j in blocks])


def block_get(X, part: BlockPartition, rows: Sequence[int], cols: Sequence[int]):
    """Sub-matrix made of the blocks in ``rows`` x ``cols``, in the given order.

    ``block_get(X, part, [0], [1, 2])`` is ``[X01 X02]``.
    """
    X = np.asarray(X)
    if X.shape != part.shape:
        raise ValueError(f"matrix shape {X.shape} does not match partition {part.shape}")
    nr, nc = len(part.row_sizes), len(part.col_sizes)
    if any(not 0 <= i < nr for i in rows) or any(not 0 <= j < nc for j in cols):
        raise IndexError(f"block index out of range: rows={list(rows)}, cols={list(cols)}")
    return X[np.ix_(part.row_index(rows), part.col_index(cols))]


def block_set(X, part: BlockPartition, rows, cols, value):
    X[np.ix_(part.row_index(rows), part.col_index(cols))] = value


@dataclass(frozen=True)
class SparsityMask:
    """Block-level zero/nonzero pattern."""

    pattern: np.ndarray

    def __post_init__(self):
        pat = np.array(self.pattern, dtype=bool)
        if pat.ndim != 2:
            raise ValueError("mask pattern must be 2-D")
        pat.setflags(write=False)
        object.__setattr__(self, "pattern", pat)

    @classmethod
    def from_blocks(cls, blocks, shape=(3, 3)):
        pat = np.zeros(shape, dtype=bool)
        for i, j in blocks:
            pat[i, j] = True
        return cls(pat)

    def row(self, i):
        """Column blocks allowed in block row ``i``."""
        return [int(j) for j in np.flatnonzero(self.pattern[i])]

    def blocks(self):
        """Masked-in blocks in column-major order."""
        return [(int(i), int(j)) for j, i in zip(*np.nonzero(self.pattern.T))]

    def conforms(self, X, part: BlockPartition, atol=0.0):
        X = np.asarray(X)
        for i in range(self.pattern.shape[0]):
            for j in range(self.pattern.shape[1]):
                if not self.pattern[i, j]:
                    if np.max(np.abs(X[part.row_slice(i), part.col_slice(j)]), initial=0.0) > atol:
                        return False
        return True

    def apply(self, X, part: BlockPartition):
        """Copy of ``X`` with off-pattern blocks set to exactly zero."""
        out = np.array(X, dtype=float)
        for i in range(self.pattern.shape[0]):
            for j in range(self.pattern.shape[1]):
                if not self.pattern[i, j]:
                    out[part.row_slice(i), part.col_slice(j)] = 0.0
        return out


DIAGONAL = SparsityMask.from_blocks([(0, 0), (1, 1), (2, 2)])
NEIGHBOR = SparsityMask.from_blocks([(0, 0), (0, 2), (1, 0), (1, 1), (2, 1), (2, 2)])
FULL = SparsityMask(np.ones((3, 3), dtype=bool))

# stacking order of the nonzero blocks of F and F^[1] inside the QP variable
DIAGONAL_ORDER = ((0, 0), (1, 1), (2, 2))
NEIGHBOR_ORDER = ((0, 0), (1, 0), (1, 1), (2, 1), (0, 2), (2, 2))


@dataclass(frozen=True)
class SelectorMatrix:
    entries: np.ndarray
    column_map: tuple
    row_sizes: tuple
    col_sizes: tuple

    @property
    def columns(self):
        return self.entries.shape[1]

    def column_slices(self):
        """Map each block in ``column_map`` to its slice of the reduced vector."""
        out, start = {}, 0
        for i, j in self.column_map:
            size = self.row_sizes[i] * self.col_sizes[j]
            out[(i, j)] = slice(start, start + size)
            start += size
        return out

    def compress(self, M):
        """Stacked vec of the masked-in blocks of ``M`` (inverse of ``expand``)."""
        return self.entries.T @ vec(M)

    def expand(self, xi):
        rows, cols = sum(self.row_sizes), sum(self.col_sizes)
        return unvec(self.entries @ xi, rows, cols)


def build_selector(mask: SparsityMask, row_sizes, col_sizes, block_order=None) -> SelectorMatrix:
    """Full-column-rank 0/1 matrix ``E`` with ``vec(M) = E @ xi``.

    ``xi`` stacks ``vec`` of the nonzero blocks of ``M`` in ``block_order``.
    ``E = P @ T``: ``T`` picks the masked-in blocks out of the column-major
    list of all blocks and ``P`` reorders that list into ``vec(M)`` using
    commutation matrices, one block column at a time.
    """
    row_sizes, col_sizes = tuple(row_sizes), tuple(col_sizes)
    allowed = mask.blocks()
    if not allowed:
        raise ValueError("empty sparsity mask")
    if block_order is None:
        block_order = allowed
    block_order = tuple((int(i), int(j)) for i, j in block_order)
    if sorted(block_order) != sorted(allowed) or len(set(block_order)) != len(block_order):
        raise ValueError(f"block order {block_order} does not list exactly the masked-in blocks {allowed}")
    if min(row_sizes + col_sizes) < 1:
        raise ValueError("block sizes must be positive")

    n = sum(row_sizes)
    per_column = []
    for mj in col_sizes:
        inner = la.block_diag(*[commutation_matrix(ni, mj) for ni in row_sizes])
        per_column.append(commutation_matrix(mj, n) @ inner)
    P = la.block_diag(*per_column)

    # offsets of vec(A_ij) inside the column-major list of all blocks
    offsets, pos = {}, 0
    for j, mj in enumerate(col_sizes):
        for i, ni in enumerate(row_sizes):
            offsets[(i, j)] = pos
            pos += ni * mj
    width = sum(row_sizes[i] * col_sizes[j] for i, j in block_order)
    T = np.zeros((pos, width))
    col = 0
    for i, j in block_order:
        size = row_sizes[i] * col_sizes[j]
        T[offsets[(i, j)]:offsets[(i, j)] + size, col:col + size] = np.eye(size)
        col += size

    E = P @ T
    if not np.array_equal(E.T @ E, np.eye(width)):
        raise AssertionError("selector construction lost orthonormality")
    E.setflags(write=False)
    return SelectorMatrix(E, block_order, row_sizes, col_sizes)


def symmetrize(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def spd_solve(M, rhs, what="matrix"):
    """Solve ``M X = rhs`` for symmetric positive definite ``M``.

    Raises NumericalError when ``M`` is not numerically positive definite
    or its condition number exceeds ``COND_LIMIT``.
    """
    M = symmetrize(np.atleast_2d(M))
    eig = np.linalg.eigvalsh(M)
    if eig[0] <= 0 or eig[-1] > COND_LIMIT * eig[0]:
        raise NumericalError(
            f"{what} is not safely positive definite "
            f"(eigenvalues in [{eig[0]:.3e}, {eig[-1]:.3e}])"
        )
    return la.cho_solve(la.cho_factor(M), rhs)


def min_eig(M):
    return float(np.linalg.eigvalsh(symmetrize(np.atleast_2d(M)))[0])
