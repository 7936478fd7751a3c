"""Command-line front end.

Exit codes: 0 ok, 1 compute failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .harness import ConfigError, ScanSpec
from .qsp_selector import PhaseSolverError

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lchsemu", description="LCHS circuit emulator and experiment harness")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="flat key=value config file")
        sp.add_argument("--out", help="output CSV (default: config 'out' key or stdout)")
        sp.add_argument("--workers", type=int, default=1, help="parallel scan points")
        sp.add_argument("--seed", type=int, default=0, help="reserved; has no numerical effect")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")

    common(sub.add_parser("classical", help="truncation-error scan of the discretized sum"))
    common(sub.add_parser("circuit", help="simulate one LCHS circuit"))
    common(sub.add_parser("scan", help="circuit scan over t, n_k, k_max or beta"))
    rp = sub.add_parser("report", help="summarize CSV results")
    rp.add_argument("csv", nargs="*", help="CSV files written by the other commands")
    rp.add_argument("--plot-dir", help="write two-column plot data here")
    rp.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    return p


def _mapping(args) -> dict:
    d = harness.load_config(args.config) if args.config else {}
    if args.set:
        d.update(harness.parse_config_text("\n".join(args.set)))
    return d


def _emit(rows, summary, out) -> None:
    text = harness.write_csv(rows, out)
    if not out:
        sys.stdout.write(text)
    for k, v in summary.items():
        print(f"# {k} = {harness._fmt(v)}", file=sys.stderr if not out else sys.stdout)


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "report":
            text, ok = harness.cmd_report(args.csv, args.plot_dir)
            sys.stdout.write(text)
            return EXIT_OK
        d = _mapping(args)
        out = args.out or d.get("out")
        if args.command == "circuit":
            settings = harness.settings_from_mapping({k: v for k, v in d.items() if k not in ("scan", "grid")})
            row = harness.cmd_circuit(settings)
            _emit([row], {}, out)
        else:
            if args.command == "classical" and "scan" not in d:
                d = {**d, "scan": "classical_only", "grid": "0"}
            scan = ScanSpec.from_mapping(d, out)
            if args.command == "classical":
                rows, summary = harness.cmd_classical(scan, args.workers)
            else:
                rows, summary = harness.cmd_scan(scan, args.workers)
            _emit(rows, summary, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PhaseSolverError, ValueError, OSError, ArithmeticError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
