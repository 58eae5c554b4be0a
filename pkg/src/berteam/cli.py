"""Command-line entry point: ``berteam <subcommand> [--config PATH] [--seed N] [--out DIR] [--profile desk|paper]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PROFILES, ConfigError, load_yaml, resolve_config
from .experiments import run_experiment, run_tournament
from .gradsuite import run_suite
from .model import ContractError

log = logging.getLogger("berteam")

TRAIN_COMMANDS = {
    "train-fixed": "fixed-policy",
    "train-coev": "coevolution",
    "train-compare": "comparison",
    "nash": "nash",
}


def _common(p: argparse.ArgumentParser, default_out: str) -> None:
    p.add_argument("--config", type=Path, help="YAML file overriding the profile defaults")
    p.add_argument("--seed", type=int, help="64-bit unsigned run seed (overrides the config file)")
    p.add_argument("--out", default=None, help=f"output directory (default: {default_out})")
    p.add_argument("--profile", choices=PROFILES, default="desk", help="default scale: desk (minutes) or paper (full scale)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="berteam", description="Team selection with a masked-language-model transformer.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, kind in TRAIN_COMMANDS.items():
        p = sub.add_parser(cmd, help=f"run the {kind} experiment")
        _common(p, f"runs/{kind}")
        p.add_argument("--resume", action="store_true", help="continue from the run-state checkpoint in --out")
    p = sub.add_parser("tournament", help="round robin among scripted GridCTF teams, fitted to Elo")
    _common(p, "runs/tournament")
    p = sub.add_parser("report", help="print the headline numbers of a finished run")
    p.add_argument("run_dir", type=Path)
    p = sub.add_parser("grad-check", help="finite-difference checks over all ops and models")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-op-configs", type=int, default=92)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", type=Path, help="optional CSV of per-case errors")
    return parser


def _resolve(args, kind: str):
    data = load_yaml(args.config) if args.config else {}
    out = args.out or data.get("out_dir") or f"runs/{kind}"
    return resolve_config(kind, args.profile, data, seed=args.seed, out_dir=out)


def _report(run_dir: Path) -> int:
    path = run_dir / "summary.json"
    if not path.exists():
        print(f"no summary.json in {run_dir}", file=sys.stderr)
        return 1
    summary = json.loads(path.read_text())
    print(json.dumps(summary, indent=2, sort_keys=True))
    timings = run_dir / "timings.json"
    if timings.exists():
        print("timings:", timings.read_text().strip())
    return 0


def _grad_check(args) -> int:
    from .analysis import write_rows

    cases = run_suite(n_op_configs=args.n_op_configs, seed=args.seed, tol=args.tol)
    failed = [c for c in cases if not c.passed]
    for c in failed:
        print(f"FAIL {c.name}: max relative error {c.max_rel_error:.3e}")
    worst = max(cases, key=lambda c: c.max_rel_error)
    print(f"{len(cases) - len(failed)}/{len(cases)} configurations passed; worst {worst.name} at {worst.max_rel_error:.3e}")
    if args.out:
        write_rows(args.out, [c.__dict__ for c in cases])
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "report":
            return _report(args.run_dir)
        if args.command == "grad-check":
            return _grad_check(args)
        if args.command == "tournament":
            summary = run_tournament(_resolve(args, "coevolution"))
        else:
            cfg = _resolve(args, TRAIN_COMMANDS[args.command])
            summary = run_experiment(cfg, resume=args.resume, log=log.info)
    except (ConfigError, ContractError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
