"""Analytic and Monte Carlo cost of the four controllers on the benchmark plant.

    python scripts/reproduce_table.py --runs 500 --seed 42 --out results/table
"""

import argparse
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dlqg.evaluation import compare
from dlqg.model import benchmark_problem


@dataclass
class TableConfig:
    horizon: int = 1000
    runs: int = 500
    seed: int = 42
    p0_scale: float = 1.0
    out: str = "results/table"


def parse_config() -> TableConfig:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    for f in dataclasses.fields(TableConfig):
        ap.add_argument(f"--{f.name.replace('_', '-')}", type=f.type, default=f.default)
    return TableConfig(**vars(ap.parse_args()))


def main():
    cfg = parse_config()
    spec = benchmark_problem(N=cfg.horizon, P0=cfg.p0_scale * np.eye(3))
    report = compare(spec, runs=cfg.runs, seed=cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    print(report.format_table())
    print(f"written to {out}/report.csv and {out}/report.json")


if __name__ == "__main__":
    main()
