"""Command-line surface: one subcommand per experiment preset.

Examples:
    robust-adrf main-sweep --seed 42 --out results/
    robust-adrf evt-suite --dgp sinusoidal_heavytail --p 0.25
    robust-adrf reproduce-all --jobs 4
    robust-adrf aggregate results/verification_results.csv
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .harness import HarnessConfig, PRESETS, aggregate, build_cells, run_preset


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    p.add_argument("--n", type=int, default=None, help="sample-size override")
    p.add_argument("--quiet", action="store_true")


def _load_config(args) -> HarnessConfig:
    overrides = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            loaded = json.load(f)
        known = {f.name for f in fields(HarnessConfig)}
        bad = set(loaded) - known
        if bad:
            raise SystemExit(f"unknown config keys: {sorted(bad)}")
        overrides.update(loaded)
    overrides["root_seed"] = args.seed
    overrides["jobs"] = args.jobs
    if args.n is not None:
        overrides["n"] = args.n
    return HarnessConfig(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-adrf",
        description="Robust dose-response benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for preset in PRESETS:
        sp = sub.add_parser(preset.replace("_", "-"),
                            help=f"run the {preset} preset")
        _add_common(sp)
        if preset == "evt_suite":
            sp.add_argument("--dgp", default=None,
                            help="restrict to one DGP label")
            sp.add_argument("--p", type=float, default=None,
                            help="contamination level override")
        sp.set_defaults(preset=preset)
    rep = sub.add_parser("reproduce-all", help="run every preset in order")
    _add_common(rep)
    agg = sub.add_parser("aggregate", help="pivot a results CSV")
    agg.add_argument("csv", help="path to a harness CSV")
    agg.add_argument("--out", default=None, help="write pivot CSV here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "aggregate":
        table = aggregate(args.csv)
        if args.out:
            table.to_csv(args.out, index=False)
            print(f"wrote {args.out}")
        else:
            print(table.to_string())
        return 0

    cfg = _load_config(args)
    if args.command == "reproduce-all":
        for preset in PRESETS:
            run_preset(preset, cfg, out_dir=args.out, quiet=args.quiet)
        return 0

    preset = args.preset
    if preset == "evt_suite" and (getattr(args, "dgp", None) is not None
                                  or getattr(args, "p", None) is not None):
        # narrow the cell grid in place for the filtered run
        import os

        from .harness import _run_cell, rows_to_csv

        cells = build_cells(preset, cfg)
        if args.dgp is not None:
            cells = [c for c in cells if c["dgp"] == args.dgp]
            if not cells:
                print(f"unknown --dgp {args.dgp!r}", file=sys.stderr)
                return 1
        if args.p is not None:
            for c in cells:
                c["p"] = args.p
        rows, artifacts = [], {}
        for c in cells:
            rlist, arts = _run_cell(c)
            rows.extend(rlist)
            artifacts.update(dict(arts))
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "evt_suite.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write(rows_to_csv(rows))
        for name in sorted(artifacts):
            with open(os.path.join(args.out, name), "w", encoding="utf-8") as f:
                f.write(artifacts[name])
        if not args.quiet:
            print(f"evt_suite: {len(rows)} rows -> {path}")
        return 0

    run_preset(preset, cfg, out_dir=args.out, quiet=args.quiet)
    return 0


if __name__ == "__main__":
    sys.exit(main())
