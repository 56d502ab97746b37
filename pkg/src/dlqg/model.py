"""Problem instances for the three-player delayed-sharing LQG problem."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionError, ValidationError
from .tensorops import DIAGONAL, NEIGHBOR, BlockPartition, SparsityMask

PSD_TOL = 1e-10

_MATRIX_FIELDS = ("A", "B", "C", "W", "V", "P0", "Qxx", "Qxu", "Quu", "Q0")


class InformationPattern(enum.Enum):
    THREE_PLAYER = "three-player"
    CENTRAL_0 = "central-0"
    CENTRAL_2 = "central-2"
    ONE_STEP = "one-step"

    @property
    def delay(self):
        """Delay of the centralized patterns, None otherwise."""
        return {"central-0": 0, "central-2": 2}.get(self.value)

    @classmethod
    def parse(cls, name):
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown pattern {name!r} (choose from {choices})") from None


TABLE_ORDER = (
    InformationPattern.CENTRAL_2,
    InformationPattern.THREE_PLAYER,
    InformationPattern.ONE_STEP,
    InformationPattern.CENTRAL_0,
)


@dataclass(frozen=True)
class ProblemSpec:
    n: tuple
    q: tuple
    p: tuple
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray
    P0: np.ndarray
    N: int
    Qxx: np.ndarray
    Qxu: np.ndarray
    Quu: np.ndarray
    Q0: np.ndarray
    a_mask: SparsityMask = field(default=NEIGHBOR, compare=False)

    def __post_init__(self):
        for name in ("n", "q", "p"):
            object.__setattr__(self, name, tuple(int(s) for s in getattr(self, name)))
        for name in _MATRIX_FIELDS:
            M = np.array(getattr(self, name), dtype=float, ndmin=2)
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        object.__setattr__(self, "N", int(self.N))

    @property
    def dims(self):
        return sum(self.n), sum(self.q), sum(self.p)

    @property
    def state_part(self):
        return BlockPartition(self.n, self.n)

    @property
    def gain_part(self):
        """Partition of q x p gains such as F, F^[1], G."""
        return BlockPartition(self.q, self.p)

    @property
    def Q(self):
        return np.block([[self.Qxx, self.Qxu], [self.Qxu.T, self.Quu]])

    def with_horizon(self, N):
        return replace(self, N=N)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = {"partition": {"n": list(self.n), "q": list(self.q), "p": list(self.p)}}
        for name in ("A", "B", "C", "W", "V", "P0"):
            out[name] = getattr(self, name).tolist()
        out["N"] = self.N
        for name in ("Qxx", "Qxu", "Quu", "Q0"):
            out[name] = getattr(self, name).tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        expected = {"partition", "N", *_MATRIX_FIELDS}
        unknown = set(data) - expected
        if unknown:
            raise ValidationError([f"unknown field(s): {sorted(unknown)}"])
        missing = expected - set(data)
        if missing:
            raise ValidationError([f"missing field(s): {sorted(missing)}"])
        part = data["partition"]
        if not isinstance(part, dict) or set(part) != {"n", "q", "p"}:
            raise ValidationError(["partition must have exactly the keys n, q, p"])
        N = data["N"]
        if isinstance(N, bool) or not isinstance(N, int) or N < 1:
            raise ValidationError([f"horizon N must be a positive integer, got {N!r}"])
        try:
            mats = {name: np.array(data[name], dtype=float, ndmin=2) for name in _MATRIX_FIELDS}
        except (TypeError, ValueError) as exc:
            raise ValidationError([f"matrix entries must be numbers: {exc}"]) from None
        return cls(n=part["n"], q=part["q"], p=part["p"], N=N, **mats)


def load_problem(path) -> ProblemSpec:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError([f"malformed JSON in {path}: {exc}"]) from None
    if not isinstance(data, dict):
        raise ValidationError(["problem file must hold a JSON object"])
    return ProblemSpec.from_dict(data)


def save_problem(spec: ProblemSpec, path):
    Path(path).write_text(json.dumps(spec.to_dict(), indent=1) + "\n")


def check_dimensions(spec: ProblemSpec):
    """Raise DimensionError if any matrix disagrees with the partition."""
    if not (len(spec.n) == len(spec.q) == len(spec.p) == 3):
        raise DimensionError("the partition must describe exactly three subsystems")
    if min(spec.n + spec.q + spec.p) < 1:
        raise DimensionError("block sizes must be positive")
    n, q, p = spec.dims
    expected = {
        "A": (n, n), "B": (n, q), "C": (p, n), "W": (n, n), "V": (p, p),
        "P0": (n, n), "Qxx": (n, n), "Qxu": (n, q), "Quu": (q, q), "Q0": (n, n),
    }
    for name, shape in expected.items():
        got = getattr(spec, name).shape
        if got != shape:
            raise DimensionError(f"{name} has shape {got}, expected {shape}")
    if spec.N < 1:
        raise DimensionError(f"horizon must be positive, got {spec.N}")


def _psd_violation(name, M, strict=False):
    if not np.allclose(M, M.T, rtol=0, atol=PSD_TOL * max(1.0, np.abs(M).max())):
        return f"{name} is not symmetric"
    lo = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
    if strict and lo <= PSD_TOL:
        return f"{name} is not positive definite (min eigenvalue {lo:.3e})"
    if not strict and lo < -PSD_TOL:
        return f"{name} is not positive semidefinite (min eigenvalue {lo:.3e})"
    return None


def validate(spec: ProblemSpec):
    """List every violated structural assumption; empty means the instance is fine.

    Dimension problems are not reported here; they raise DimensionError.
    """
    check_dimensions(spec)
    problems = []
    if not spec.a_mask.conforms(spec.A, spec.state_part):
        problems.append("A does not conform to the neighbor sparsity pattern")
    if not DIAGONAL.conforms(spec.B, BlockPartition(spec.n, spec.q)):
        problems.append("B is not block diagonal")
    if not DIAGONAL.conforms(spec.C, BlockPartition(spec.p, spec.n)):
        problems.append("C is not block diagonal")
    checks = [
        ("V", spec.V, True),
        ("Quu", spec.Quu, True),
        ("Q", spec.Q, False),
        ("Q0", spec.Q0, False),
        ("W", spec.W, False),
        ("P0", spec.P0, False),
    ]
    for name, M, strict in checks:
        msg = _psd_violation(name, M, strict)
        if msg:
            problems.append(msg)
    return problems


def require_valid(spec: ProblemSpec):
    problems = validate(spec)
    if problems:
        raise ValidationError(problems)
    return spec


def benchmark_problem(N=1000, P0=None) -> ProblemSpec:
    """Benchmark plant: three coupled scalar subsystems, unit noise, N = 1000.

    ``P0`` defaults to the identity.
    """
    I = np.eye(3)
    Qxx = np.array([[3.0, 1, 1], [1, 3, 1], [1, 1, 3]])
    return ProblemSpec(
        n=(1, 1, 1), q=(1, 1, 1), p=(1, 1, 1),
        A=np.array([[2.0, 0, 1], [1, 2, 0], [0, 1, 2]]),
        B=I, C=I, W=I, V=I,
        P0=I if P0 is None else P0,
        N=N,
        Qxx=Qxx,
        Qxu=np.array([[1.0, 0, -1], [-1, 1, 0], [0, -1, 1]]),
        Quu=2 * I,
        Q0=Qxx,
    )


def random_problem(rng, N, sizes=(1, 1, 1), stable=False) -> ProblemSpec:
    """Random instance satisfying every structural assumption."""
    n, q, p = sizes if isinstance(sizes[0], tuple) else (sizes, sizes, sizes)
    nt, qt, pt = sum(n), sum(q), sum(p)
    part = BlockPartition(n, n)
    A = NEIGHBOR.apply(rng.normal(size=(nt, nt)), part)
    if stable:
        A *= 0.9 / max(1.0, np.max(np.abs(np.linalg.eigvals(A))))
    B = DIAGONAL.apply(rng.normal(size=(nt, qt)), BlockPartition(n, q))
    C = DIAGONAL.apply(rng.normal(size=(pt, nt)), BlockPartition(p, n))

    def spd(k, floor):
        M = rng.normal(size=(k, k))
        return M @ M.T / k + floor * np.eye(k)

    Qfull = spd(nt + qt, 0.2)
    return ProblemSpec(
        n=n, q=q, p=p, A=A, B=B, C=C,
        W=spd(nt, 0.1), V=spd(pt, 0.3), P0=spd(nt, 0.1), N=N,
        Qxx=Qfull[:nt, :nt], Qxu=Qfull[:nt, nt:], Quu=Qfull[nt:, nt:], Q0=spd(nt, 0.0),
    )
