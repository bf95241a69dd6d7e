"""Run every experiment config in configs/ and write JSON reports.

    python scripts/run_experiments.py                 # all configs
    python scripts/run_experiments.py configs/scaling.json --workers 4
"""

import argparse
import json
import sys
import time
from pathlib import Path

from relvar import harness

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    configs = args.configs or sorted((ROOT / "configs").glob("*.json"))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    failed = []
    for path in configs:
        for cfg in harness.load_config(path):
            t0 = time.perf_counter()
            report = harness.run_experiment(cfg, args.workers)
            (args.out_dir / f"{cfg.name}.json").write_text(report.to_json(indent=2))
            status = "PASS" if report.passed else "FAIL"
            print(f"{status} {cfg.name:40s} {time.perf_counter() - t0:7.1f}s")
            for c in report.criteria:
                print(f"    {c['name']}: {json.dumps(harness._jsonable(c['value']))}")
            if not report.passed:
                failed.append(cfg.name)
    if failed:
        print("failed:", ", ".join(failed))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
