"""Expected-cost evaluation and controller comparison."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError
from .model import TABLE_ORDER, InformationPattern, ProblemSpec, require_valid
from .riccati import riccati_backward
from .filtering import filter_pass
from .runtime import ControllerState, Policy, build_policy, simulate_costs


def controller_maps(policy: Policy, k: int):
    """Matrices of the step-k controller: s+ = Ac s + Bc y, u = Cc s + Dc y."""
    n, _, p = policy.spec.dims
    s = policy.state_size
    basis_s = ControllerState.from_vector(k, np.eye(s), n, p)
    u_s, nxt_s = policy.step(basis_s, np.zeros((s, p)))
    zero = ControllerState.from_vector(k, np.zeros((p, s)), n, p)
    u_y, nxt_y = policy.step(zero, np.eye(p))
    return nxt_s.as_vector().T, nxt_y.as_vector().T, u_s.T, u_y.T


def expected_cost(policy: Policy, per_stage=False):
    """Exact E{J} from the joint covariance of plant and controller states."""
    spec = policy.spec
    A, B, C = spec.A, spec.B, spec.C
    n, q, p = spec.dims
    s = policy.state_size
    Q = spec.Q
    Sigma = np.zeros((n + s, n + s))
    Sigma[:n, :n] = spec.P0
    stages = np.empty(spec.N + 1)
    for k in range(spec.N):
        Ac, Bc, Cc, Dc = controller_maps(policy, k)
        out = np.block([[np.eye(n), np.zeros((n, s))], [Dc @ C, Cc]])
        out_v = np.vstack([np.zeros((n, p)), Dc])
        stages[k] = np.trace(Q @ (out @ Sigma @ out.T + out_v @ spec.V @ out_v.T))
        Acl = np.block([[A + B @ Dc @ C, B @ Cc], [Bc @ C, Ac]])
        Gv = np.vstack([B @ Dc, Bc])
        Sigma = Acl @ Sigma @ Acl.T + Gv @ spec.V @ Gv.T
        Sigma[:n, :n] += spec.W
        Sigma = 0.5 * (Sigma + Sigma.T)
        lo = np.linalg.eigvalsh(Sigma)[0]
        if lo < -1e-8 * max(np.trace(Sigma), 1e-300):
            raise NumericalError(f"closed-loop covariance lost semidefiniteness at k={k + 1}")
    stages[spec.N] = np.trace(spec.Q0 @ Sigma[:n, :n])
    total = float(stages.sum())
    return (total, stages) if per_stage else total


def decomposed_cost(policy: Policy):
    """Jw + optimal Jt: the three-player cost without simulating the loop."""
    if policy.gains is None:
        raise ValueError("decomposed cost needs a synthesized three-player policy")
    return policy.ric.Jw + policy.gains.Jtilde


@dataclass(frozen=True)
class CostRow:
    pattern: InformationPattern
    analytic: float
    mc_mean: float
    mc_stderr: float
    runs: int


@dataclass(frozen=True)
class CostReport:
    N: int
    rows: list
    ratios: dict = field(default_factory=dict)

    def row(self, pattern):
        return next(r for r in self.rows if r.pattern is pattern)

    def to_dict(self):
        return {
            "N": self.N,
            "rows": [
                {
                    "pattern": r.pattern.value,
                    "analytic": r.analytic,
                    "analytic_per_step": r.analytic / self.N,
                    "mc_mean": r.mc_mean,
                    "mc_mean_per_step": r.mc_mean / self.N,
                    "mc_stderr": r.mc_stderr,
                    "runs": r.runs,
                }
                for r in self.rows
            ],
            "ratios": self.ratios,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def write_csv(self, path):
        fmt = lambda v: format(float(v), ".17g")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pattern", "analytic", "mc_mean", "mc_stderr", "runs", "analytic_per_step", "mc_mean_per_step"])
            for r in self.rows:
                w.writerow([r.pattern.value, fmt(r.analytic), fmt(r.mc_mean), fmt(r.mc_stderr), r.runs,
                            fmt(r.analytic / self.N), fmt(r.mc_mean / self.N)])

    def format_table(self):
        lines = [f"{'pattern':<14}{'analytic/N':>14}{'mc_mean/N':>14}{'stderr/N':>12}{'runs':>7}"]
        for r in self.rows:
            lines.append(f"{r.pattern.value:<14}{r.analytic / self.N:>14.4f}{r.mc_mean / self.N:>14.4f}"
                         f"{r.mc_stderr / self.N:>12.4f}{r.runs:>7d}")
        for name, value in self.ratios.items():
            lines.append(f"ratio {name}: {value:.6f}")
        return "\n".join(lines)


class SynthesisFailure(RuntimeError):
    def __init__(self, pattern, cause):
        self.pattern = pattern
        super().__init__(f"synthesis failed for {pattern.value}: {cause}")


def mc_summary(costs):
    costs = np.asarray(costs, dtype=float)
    mean = math.fsum(costs) / costs.size
    if costs.size < 2:
        return mean, float("inf")
    return mean, float(np.std(costs, ddof=1) / np.sqrt(costs.size))


def compare(spec: ProblemSpec, patterns=TABLE_ORDER, runs: int = 500, seed: int = 0, analytic=True) -> CostReport:
    """Synthesize each controller, evaluate it exactly and by Monte Carlo.

    All controllers are simulated on the same noise realizations.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    require_valid(spec)
    ric = riccati_backward(spec)
    filt = filter_pass(spec)
    rows = []
    for pattern in patterns:
        try:
            policy = build_policy(spec, pattern, ric, filt)
        except (NumericalError, DimensionError) as exc:
            raise SynthesisFailure(pattern, exc) from exc
        mean, stderr = mc_summary(simulate_costs(policy, seed, runs))
        value = expected_cost(policy) if analytic else float("nan")
        rows.append(CostRow(pattern, value, mean, stderr, runs))
    ratios = {}
    for a, b in itertools.combinations(rows, 2):
        num = a.analytic if analytic else a.mc_mean
        den = b.analytic if analytic else b.mc_mean
        ratios[f"{a.pattern.value}/{b.pattern.value}"] = num / den
    return CostReport(spec.N, rows, ratios)
