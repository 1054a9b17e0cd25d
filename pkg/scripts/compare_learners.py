"""Learning-curve comparison across the online algorithms.

Runs Q-learning, plain post-decision learning, batched variants at several
update periods, and the per-step model-estimating reference, each over a
set of seeds, then writes per-run metric files plus a summary table of
cumulative average cost at a few checkpoints.

Usage:
    python scripts/compare_learners.py --horizon 75000 --seeds 0 1 2 3 4
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from greentx.config import table_profile
from greentx.harness import run_experiment

CHECKPOINTS = (999, 4_999, 9_999, 24_999, 49_999, 74_999)


def run_one(label: str, out_dir: Path, seed: int, **cfg_kwargs):
    cfg = table_profile(seed=seed, **cfg_kwargs)
    out_csv = out_dir / f"{label}_seed{seed}.csv"
    result = run_experiment(cfg, out_csv=out_csv)
    return result


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=75_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--p-on", type=float, default=0.32, help="radio on-state draw in watts")
    ap.add_argument("--ve-periods", type=int, nargs="+", default=[1, 10, 25, 125])
    ap.add_argument("--out-dir", type=Path, default=Path("results/compare_learners"))
    args = ap.parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    variants: dict[str, dict] = {
        "q": dict(algorithm="q"),
        "pds": dict(algorithm="pds"),
        "suboptimal": dict(algorithm="suboptimal"),
    }
    for period in args.ve_periods:
        variants[f"ve{period}"] = dict(algorithm="pds_ve", ve_period=period)

    checkpoints = [n for n in CHECKPOINTS if n < args.horizon - 1] + [args.horizon - 1]

    summary_rows = []
    for label, kwargs in variants.items():
        costs = np.empty((len(args.seeds), len(checkpoints)))
        for i, seed in enumerate(args.seeds):
            result = run_one(
                label, args.out_dir, seed,
                horizon=args.horizon, p_on=args.p_on, **kwargs,
            )
            costs[i] = [result.record_at(n).cum_cost for n in checkpoints]
            print(f"{label} seed {seed}: cost@{checkpoints[-1] + 1} = {costs[i, -1]:.4f}")
        summary_rows.append([label] + [repr(v) for v in costs.mean(axis=0)])

    summary = args.out_dir / "summary.csv"
    with summary.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant"] + [f"cum_cost_at_{n + 1}" for n in checkpoints])
        writer.writerows(summary_rows)
    print(f"wrote {summary}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
