"""Command-line entry point: ``jarzmetts {run,verify,presets,describe}``.

Configuration resolves in the order preset, ``--config`` file, environment
(``JARZMETTS_<KEY>`` with dots as ``__``), then command-line flags.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import PRESETS, ConfigError, load_config
from .experiment import run_experiment
from .verify import format_table, run_checks


def _resolve(args) -> object:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output.dir"] = args.out
    if args.mode is not None:
        overrides["mode"] = args.mode
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return load_config(args.config, args.preset, overrides)


def _cmd_run(args) -> int:
    cfg = _resolve(args)
    bundle = run_experiment(cfg, resume=not args.no_resume, flip_work=args.inject_work_sign_error)
    print(f"wrote {len(bundle.cells)} cells to {bundle.out_dir}")
    for row in bundle.estimates:
        print(f"tau={row['tau']:g} beta={row['beta']:g}  dF={row['delta_f_exact']:+.6f}  "
              f"dF_tilde={row['delta_f_tilde']:+.6f}  <W>={row['mean_work']:+.6f}  "
              f"err={row['percent_error']:.2f}%")
    return 0


def _cmd_verify(args) -> int:
    results = run_checks(quick=args.quick, flip_work=args.inject_work_sign_error)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print("verify: " + ("all checks passed" if not failed else f"FAILED {', '.join(failed)}"))
    return 1 if failed else 0


def _cmd_presets(args) -> int:
    width = max(map(len, PRESETS))
    for name, entry in PRESETS.items():
        print(f"{name:<{width}}  {entry['doc']}")
    return 0


def _cmd_describe(args) -> int:
    sys.stdout.write(_resolve(args).to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jarzmetts",
                                     description="Jarzynski free energies from METTS pseudo-work.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p):
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="start from a shipped preset")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--mode", choices=("noiseless", "tmp", "tmp_exact", "noisy"))
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config key (repeatable)")

    run = sub.add_parser("run", help="run an experiment and write CSV/JSON artifacts")
    config_flags(run)
    run.add_argument("--no-resume", action="store_true", help="ignore cached cells")
    run.add_argument("--inject-work-sign-error", action="store_true", help=argparse.SUPPRESS)
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify", help="run the invariant suite and print a pass/fail table")
    ver.add_argument("--quick", action="store_true", help="run a fast subset")
    ver.add_argument("--inject-work-sign-error", action="store_true", help=argparse.SUPPRESS)
    ver.set_defaults(func=_cmd_verify)

    sub.add_parser("presets", help="list shipped presets").set_defaults(func=_cmd_presets)

    desc = sub.add_parser("describe", help="print the resolved config")
    config_flags(desc)
    desc.set_defaults(func=_cmd_describe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
