"""Power/holding frontier of threshold policies against a learned policy.

Sweeps the power-on threshold k over the whole buffer range, records each
policy's average power and holding cost, runs the batched learner with the
same horizon and seed, and writes the frontier plus the learned point to
one CSV for plotting.

Usage:
    python scripts/threshold_sweep.py --horizon 75000 --ve-period 50
"""
import argparse
import csv
from pathlib import Path

from greentx.config import table_profile
from greentx.harness import run_experiment


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=75_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--p-on", type=float, default=0.32)
    ap.add_argument("--ve-period", type=int, default=50)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    args = ap.parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    cfg = table_profile(p_on=args.p_on, horizon=args.horizon, seed=args.seed)
    for k in range(cfg.capacity + 1):
        fin = run_experiment(
            table_profile(
                algorithm="threshold", threshold_k=k,
                p_on=args.p_on, horizon=args.horizon, seed=args.seed,
            )
        ).final
        rows.append(["threshold", k, repr(fin.cum_power_w), repr(fin.cum_holding),
                     repr(fin.theta_off)])
        print(f"k={k:2d} power={fin.cum_power_w:.4f} W holding={fin.cum_holding:.3f}")

    fin = run_experiment(
        table_profile(
            algorithm="pds_ve", ve_period=args.ve_period,
            p_on=args.p_on, horizon=args.horizon, seed=args.seed,
        )
    ).final
    rows.append(["learned", args.ve_period, repr(fin.cum_power_w),
                 repr(fin.cum_holding), repr(fin.theta_off)])
    print(f"learned (period {args.ve_period}): power={fin.cum_power_w:.4f} W "
          f"holding={fin.cum_holding:.3f}")

    out = args.out_dir / "threshold_sweep.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "k_or_period", "cum_power_w", "cum_holding", "theta_off"])
        writer.writerows(rows)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
