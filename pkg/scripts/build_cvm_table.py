"""Rebuild the Monte Carlo quantile table of the Cramer-von Mises limit law.

    python scripts/build_cvm_table.py [--bridges 1000000] [--grid 10000] [--seed 20140101]

Writes src/relvar/data/cvm_quantiles.csv (or --out).
"""

import argparse
import time
from pathlib import Path

from relvar.inference import build_cvm_table, write_cvm_table

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "relvar" / "data" / "cvm_quantiles.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bridges", type=int, default=1_000_000)
    ap.add_argument("--grid", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=20140101)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()
    t0 = time.time()
    table = build_cvm_table(args.bridges, args.grid, args.seed)
    write_cvm_table(table, args.out)
    print(f"wrote {args.out} in {time.time() - t0:.0f}s; "
          f"q(0.90)={table.quantile(0.90):.4f} q(0.95)={table.quantile(0.95):.4f} "
          f"q(0.99)={table.quantile(0.99):.4f}")


if __name__ == "__main__":
    main()
