"""OFDMA device-count sweep; rates are normalized by the number of subcarriers.

    python scripts/run_fig3.py --scale desk --seed 0 --out results/fig3.csv
"""

import argparse
import logging
import time
from pathlib import Path

from bacnoma.experiments import SCALES, fig3_specs
from bacnoma.harness import SweepResult, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", choices=SCALES, default="desk")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--out", type=Path, default=Path("results/fig3.csv"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    start = time.perf_counter()
    result = SweepResult.concat([run_experiment(s) for s in fig3_specs(args.scale, args.seed, args.trials)])
    args.out.parent.mkdir(parents=True, exist_ok=True)
    result.write_csv(args.out)
    logging.info("wrote %s (%d rows) in %.0f s", args.out, len(result.rows), time.perf_counter() - start)


if __name__ == "__main__":
    main()
