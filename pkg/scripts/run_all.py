"""Run every frozen experiment config through the CLI.

    python scripts/run_all.py [--out runs] [--only disco-maze ...]
"""

import argparse
import sys
from pathlib import Path

from recode.cli import main as cli_main
from recode.config import EXPERIMENTS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs", help="parent output directory")
    ap.add_argument("--only", nargs="+", choices=EXPERIMENTS, help="subset of experiments")
    args = ap.parse_args()
    failed = []
    for name in args.only or EXPERIMENTS:
        code = cli_main([name, "--config", str(CONFIGS / f"{name}.yaml"), "--out", f"{args.out}/{name}"])
        if code:
            failed.append(name)
    print(f"{len(failed)} failed: {', '.join(failed)}" if failed else "all experiments passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
