"""Command-line front end.

Subcommands: simulate | sweep | stability | replay <archive>.
Exit codes: 0 success (including recorded simulation faults), 2 config
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import default_config, load_config
from .errors import ConfigError
from .runio import RunArchive, execute, replay

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="experiment config (INI); defaults apply when omitted")
    sub.add_argument("--out", type=Path, default=Path("run-out"),
                     help="output directory for the run archive")
    sub.add_argument("--workers", type=int, default=1,
                     help="parallel workers for sweep/stability grids")
    sub.add_argument("--si", action="store_true",
                     help="write CSV state columns in SI units")
    sub.add_argument("--trajectory", action="store_true",
                     help="also write trajectory.csv (simulate only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pronksim",
        description="Pronking-gait stride simulation, adaptive control, "
                    "and stability experiments.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run closed-loop strides and plot the apex response"),
        ("sweep", "parameter-miscalibration sweep over a deviation grid"),
        ("stability", "fixed-point and eigenvalue scan over a grid"),
    ):
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
    rep = subs.add_parser("replay",
                          help="re-run an archive and verify CSVs bitwise")
    rep.add_argument("archive", type=Path, help="existing run archive directory")
    rep.add_argument("--out", type=Path, default=None,
                     help="directory for the replayed archive "
                          "(default: <archive>-replay)")
    rep.add_argument("--workers", type=int, default=1)
    return parser


def _load(args) -> "ExperimentConfig":
    if args.config is None:
        return default_config()
    return load_config(args.config)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            archive = RunArchive(args.archive)
            out = args.out if args.out is not None else Path(
                str(args.archive).rstrip("/") + "-replay")
            ok, lines = replay(archive, out, workers=args.workers)
            for line in lines:
                print(line)
            if not ok:
                print("replay: MISMATCH", file=sys.stderr)
                return EXIT_INTERNAL
            print("replay: all CSVs reproduced bitwise")
            return EXIT_OK

        cfg = _load(args)
        expected = {"simulate": "single-run", "sweep": "sweep",
                    "stability": "stability"}[args.command]
        if cfg.kind != expected:
            cfg.values["experiment"]["kind"] = expected
        archive = execute(cfg, args.out, si=args.si,
                          trajectory=args.trajectory, workers=args.workers)
        print(f"archive written to {archive.root}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # internal failure: report, distinct exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
