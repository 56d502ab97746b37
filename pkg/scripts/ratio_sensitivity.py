"""How the three-player / one-step cost ratio moves with P0 and the horizon.

Also reports the cost of the three-player gains obtained when the QP linear
term omits the cross-covariance contributions, to show their size.

    python scripts/ratio_sensitivity.py --scales 0 1 10 100 --horizons 200 1000
"""

import argparse
from dataclasses import dataclass, field

import numpy as np

from dlqg.evaluation import expected_cost
from dlqg.filtering import filter_pass
from dlqg.model import InformationPattern, benchmark_problem
from dlqg.riccati import riccati_backward
from dlqg.runtime import Policy, build_policy
from dlqg.synthesis import assemble_qp, solve_chain, unpack

IP = InformationPattern


@dataclass
class SweepConfig:
    scales: list = field(default_factory=lambda: [0.0, 1.0, 10.0, 100.0])
    horizons: list = field(default_factory=lambda: [200, 1000])


def parse_config() -> SweepConfig:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    default = SweepConfig()
    ap.add_argument("--scales", type=float, nargs="+", default=default.scales)
    ap.add_argument("--horizons", type=int, nargs="+", default=default.horizons)
    return SweepConfig(**vars(ap.parse_args()))


def reduced_term_policy(spec, ric, filt):
    asm = assemble_qp(spec, ric, filt, cross_terms=False)
    F, F1 = unpack(spec, asm, solve_chain(asm)[2])
    return Policy(IP.THREE_PLAYER, spec, ric, filt, F, F1)


def main():
    cfg = parse_config()
    print(f"{'P0':>8}{'N':>6}{'three-player':>14}{'one-step':>12}{'ratio':>9}{'reduced-b':>12}")
    for scale in cfg.scales:
        for N in cfg.horizons:
            spec = benchmark_problem(N=N, P0=scale * np.eye(3))
            ric, filt = riccati_backward(spec), filter_pass(spec)
            three = expected_cost(build_policy(spec, IP.THREE_PLAYER, ric, filt)) / N
            one = expected_cost(build_policy(spec, IP.ONE_STEP, ric, filt)) / N
            reduced = expected_cost(reduced_term_policy(spec, ric, filt)) / N
            print(f"{scale:>8g}{N:>6d}{three:>14.3f}{one:>12.3f}{three / one:>9.4f}{reduced:>12.3f}")


if __name__ == "__main__":
    main()
