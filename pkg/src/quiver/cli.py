"""Command-line front end: run grids, post-process, serve sessions.

Verbs:
    run     execute an experiment grid described by an INI config
    tables  turn a finished output directory into table/figure files
    oracle  tabulate each synthetic DM's best attainable utility
    serve   start the interactive session service (HTTP)
    replay  recompute metrics CSVs from stored traces
"""

from __future__ import annotations

import argparse
import sys

from quiver import harness


def _add_common(p, config=True, out=True):
    if config:
        p.add_argument("--config", required=True,
                       help="INI grid description (see configs/*.ini)")
    if out:
        p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quiver",
        description="budgeted interactive multi-objective optimization")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="execute an experiment grid")
    _add_common(p)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--master-seed", type=int, default=None,
                   help="override the config's master seed")

    p = sub.add_parser("tables", help="emit table/figure data files")
    _add_common(p, config=False)

    p = sub.add_parser("oracle", help="precompute front-optimal utilities")
    _add_common(p)
    p.add_argument("--master-seed", type=int, default=None)

    p = sub.add_parser("serve", help="start the session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("replay", help="recompute metrics from traces")
    _add_common(p, config=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.verb == "run":
        grid = harness.load_config(args.config)
        if args.master_seed is not None:
            grid.master_seed = args.master_seed
        manifest = harness.run_grid(grid, args.out,
                                    parallelism=args.parallelism)
        ok = manifest["n_runs"] - manifest["n_failed"]
        print(f"{ok}/{manifest['n_runs']} runs ok -> {args.out} "
              f"(config {manifest['config_hash'][:12]})")
        return 0 if manifest["n_failed"] == 0 else 1

    if args.verb == "tables":
        written = harness.make_tables(args.out)
        for path in written:
            print(path)
        return 0

    if args.verb == "oracle":
        grid = harness.load_config(args.config)
        if args.master_seed is not None:
            grid.master_seed = args.master_seed
        path = harness.precompute_oracle(grid, args.out)
        print(path)
        return 0

    if args.verb == "serve":
        try:
            import uvicorn

            from quiver.service import create_app
        except ImportError as exc:
            print(f"serve needs the [service] extra: {exc}", file=sys.stderr)
            return 1
        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if args.verb == "replay":
        written = harness.replay(args.out)
        for name, count in sorted(written.items()):
            print(f"{name}: {count} rows")
        return 0

    raise AssertionError(args.verb)


if __name__ == "__main__":
    raise SystemExit(main())
