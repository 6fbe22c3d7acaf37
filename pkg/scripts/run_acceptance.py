"""Run the acceptance checks and write one JSON report.

    python scripts/run_acceptance.py --size quick --only 2 6 7 --out acceptance.json
"""

import argparse

from maxstab.io import write_json
from maxstab.verify import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", choices=["default", "quick"], default="default")
    ap.add_argument("--only", type=int, nargs="*")
    ap.add_argument("--out", default="acceptance.json")
    args = ap.parse_args()
    results = run_all(args.size, args.only, log=print)
    write_json(args.out, [r.as_dict() for r in results])
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed; report in {args.out}")


if __name__ == "__main__":
    main()
