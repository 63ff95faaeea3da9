"""Command line entry point: ``bihol verify | list-examples | explain | export-example``.

Exit codes: 0 all expectations met, 1 verdict mismatch, 2 configuration
error, 3 numeric precondition failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import atlas, conditions, config, report, suite
from .errors import ConfigError

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3


def run_verify(cfg: config.RunConfig):
    """Evaluate every example of a config; returns (report dict, items)."""
    items = []
    for bundle in cfg.examples:
        try:
            points = bundle.sample_points(cfg.points, cfg.seed)
        except ValueError as exc:
            raise ConfigError(f"example {bundle.name!r}: {exc}") from None
        items.extend(suite.run_bundle(bundle, points, cfg.tolerance, cfg.groups))
    return report.build(items, cfg.seed, cfg.tolerance, cfg.points), items


def exit_status(items) -> int:
    if any(it.verdict == "error" for it in items):
        return EXIT_PRECONDITION
    if any(not it.ok for it in items):
        return EXIT_MISMATCH
    return EXIT_OK


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def cmd_verify(args) -> int:
    try:
        cfg = config.load(args.config)
        if args.points is not None:
            cfg.points = args.points
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            cfg.tolerance = args.tol
        if args.out is not None:
            cfg.out = args.out
        if args.format is not None:
            cfg.format = args.format
        cfg.validate()
        rep, items = run_verify(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.to_json(rep)
    if cfg.out is None:
        if cfg.format in ("json", "both"):
            sys.stdout.write(text)
        if cfg.format in ("csv", "both"):
            sys.stdout.write(report.to_csv(rep))
    else:
        out = Path(cfg.out)
        if cfg.format == "csv":
            _write(out, report.to_csv(rep))
        else:
            _write(out, text)
            if cfg.format == "both":
                _write(out.with_suffix(".csv"), report.to_csv(rep))
    for name, s in report.summarize(items).items():
        print(f"{name}: {s['items']} items, {s['mismatch']} mismatches, {s['error']} errors",
              file=sys.stderr)
    return exit_status(items)


def format_examples() -> str:
    rows = []
    for b in atlas.list_examples():
        fails = sorted(k for k, v in b.expect.items() if v == atlas.FAIL)
        measured = sorted(k for k, v in b.expect.items() if v == atlas.MEASURE)
        rows.append((b.name, str(b.dim), str(len(b.holomorphic_maps)),
                     "all pass" if not fails else "fail: " + ", ".join(fails),
                     f"{len(measured)} items" if measured else "-", b.description))
    head = ("name", "dim", "maps", "expected", "measure-only", "description")
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(5)]
    lines = []
    for r in [head] + rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(5)) + "  " + r[5])
    return "\n".join(line.rstrip() for line in lines) + "\n"


def cmd_list(args) -> int:
    sys.stdout.write(format_examples())
    return EXIT_OK


def cmd_explain(args) -> int:
    try:
        print(conditions.explain(args.id))
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        bundle = atlas.builtin(args.name)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    text = config.dump_example(bundle, args.points or 20, args.seed or 0)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bihol", description="Jet-based checks of biharmonicity "
                                "conditions for holomorphic maps.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the items of a config and write a report")
    v.add_argument("config")
    v.add_argument("--points", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--tol", type=float)
    v.add_argument("--out")
    v.add_argument("--format", choices=config.FORMATS)
    v.set_defaults(func=cmd_verify)
    sub.add_parser("list-examples", help="table of built-in examples").set_defaults(func=cmd_list)
    e = sub.add_parser("explain", help="print the equation behind a condition id")
    e.add_argument("id")
    e.set_defaults(func=cmd_explain)
    x = sub.add_parser("export-example", help="write a built-in example as a config file")
    x.add_argument("name")
    x.add_argument("--out")
    x.add_argument("--points", type=int)
    x.add_argument("--seed", type=int)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
