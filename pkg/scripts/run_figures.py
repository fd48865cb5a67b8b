"""Run every figure config under scripts/configs and print the summary tables.

    python scripts/run_figures.py [--out results] [--workers 4] [--trials N] [names...]
"""

import argparse
import dataclasses
import time
from pathlib import Path

from swipt_secrecy import harness

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*", help="config stems, e.g. fig1 fig3 (default: all but smoke)")
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--trials", type=int)
    args = ap.parse_args()

    paths = sorted((HERE / "configs").glob("*.toml"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    else:
        paths = [p for p in paths if p.stem != "smoke"]

    for path in paths:
        cfg = harness.load_config(path)
        if args.trials:
            cfg = dataclasses.replace(cfg, trials=args.trials)
        t0 = time.perf_counter()
        rows = harness.run_experiment(cfg, args.out, harness.cpu_workers(args.workers))
        print(f"\n== {cfg.experiment}  ({len(rows)} rows, {time.perf_counter() - t0:.0f}s, "
              f"{harness.failure_fraction(rows):.1%} non-optimal)")
        print(f"{'scheme':>20} {cfg.sweep_name:>9} {'n_ok':>5} {'rate':>8} {'energy':>10} {'AN frac':>8}")
        for e in harness.summarize(rows, cfg):
            print(f"{e['scheme']:>20} {e['sweep_value']:>9g} {e['n_ok']:>5d} {e['rate_mean']:>8.3f} "
                  f"{e['min_energy_mean']:>10.3f} {e['an_fraction_mean']:>8.3f}")


if __name__ == "__main__":
    main()
