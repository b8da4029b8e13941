"""Run the four published Monte Carlo designs and write their outputs.

Usage:
    python3 scripts/reproduce_tables.py [table1 table2 ...] [--reps N] [--seed S]
        [--threads K] [--out DIR]

Each table lands in DIR/<table>/ as summary.csv, records.csv and tables.md.
"""
import argparse
import sys
import time
from pathlib import Path

from plsa.cli import main as cli_main

TABLES = ("table1", "table2", "table3", "table4")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("tables", nargs="*", default=list(TABLES), choices=TABLES)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args(argv)
    for table in args.tables:
        t0 = time.perf_counter()
        code = cli_main(["reproduce", table, "--reps", str(args.reps), "--seed", str(args.seed),
                         "--threads", str(args.threads), "--out",
                         str(Path(args.out) / table)])
        print(f"[{table}] exit {code} in {time.perf_counter() - t0:.0f}s\n", flush=True)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
