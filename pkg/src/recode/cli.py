"""``recode <subcommand> --config <path> [--seed N] [--out DIR]``"""

from __future__ import annotations

import argparse
import json
import platform
import subprocess
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from recode.config import EXPERIMENTS, ConfigError, load_config
from recode.experiments import RUNNERS, SCHEMAS


def version_string() -> str:
    """Package version plus ``git describe`` output when run from a checkout."""
    try:
        v = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        v = "0+unknown"
    try:
        git = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        if git.returncode == 0 and git.stdout.strip():
            v += f"+g{git.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return v


def write_manifest(out: Path, cfg, result: dict, elapsed: float) -> None:
    manifest = {
        "experiment": cfg.experiment,
        "config_source": cfg.source,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "seeds": list(cfg.seeds),
        "version": version_string(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "passed": bool(result.get("passed")),
        "elapsed_seconds": round(elapsed, 3),
        "files": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="recode", description="Run a RECODE experiment from a YAML config.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--seed", type=int, action="append",
                        help="override the config's seeds (repeatable)")
        sp.add_argument("--out", help="output directory (default: the config's 'out')")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, SCHEMAS)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.experiment != args.command:
        print(f"config error: {args.config} describes '{cfg.experiment}', not '{args.command}'",
              file=sys.stderr)
        return 2
    if args.seed:
        if any(s < 0 for s in args.seed):
            print("seeds must be non-negative", file=sys.stderr)
            return 2
        cfg = cfg.with_seeds(args.seed)
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = RUNNERS[cfg.experiment](cfg, out)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - t0
    write_manifest(out, cfg, result, elapsed)
    status = "PASS" if result.get("passed") else "FAIL"
    print(f"{cfg.experiment}: {status} ({elapsed:.1f} s) -> {out}")
    if cfg.experiment == "tabular-oracle" and result["mismatches"]:
        seed, step, state, visits, got, want = result["mismatches"][0]
        print(f"first divergence: seed {seed} step {step} state {state}: got {got}, expected {want}",
              file=sys.stderr)
    return 0 if result.get("passed") else 1


if __name__ == "__main__":
    raise SystemExit(main())
