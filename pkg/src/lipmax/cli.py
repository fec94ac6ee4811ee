"""Command line interface.

``run --config <path> [--seed N] [--out DIR]`` executes the selected suites in dependency
order, writes one ``<suite>.jsonl`` report per suite plus ``summary.json``, and exits 0
when every check passes, 1 when some check fails, and 2 on configuration errors.
``export --in DIR --out DIR`` turns reports into per-inequality CSV tables.
"""
import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import SUITES, bundled_configs, load_config
from .errors import (ConfigurationError, DomainParameterError, MaterialError, MeshFormatError,
                     MeshInvariantError, ParameterError)
from .meshfile import dumps_record, load_report
from .suites import RUNNERS, Context

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
INPUT_ERRORS = (ConfigurationError, DomainParameterError, MaterialError, MeshFormatError, MeshInvariantError,
                ParameterError)
CSV_COLUMNS = ("inequality_id", "lhs", "rhs", "margin", "h", "alpha_or_domain", "seed")


def _fail(msg):
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def run(config, seed=None, out=None):
    """Run a config; returns the exit status."""
    try:
        cfg = load_config(config)
        if seed is not None:
            cfg = cfg.with_overrides(seed=seed)
    except INPUT_ERRORS as exc:
        return _fail(exc)
    out_dir = Path(out if out is not None else cfg["output.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg)
    summary = {"config": cfg.canonical(), "suites": {}, "pass": True}
    failing = []
    for name in cfg.suites:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = RUNNERS[name](ctx)
        except INPUT_ERRORS as exc:
            return _fail(exc)
        domain = str(rep.meta.get("domain", name))
        lines = []
        for rec in rep.records():
            rec["suite"], rec["domain"] = name, domain
            lines.append(dumps_record(rec) + "\n")
        (out_dir / f"{name}.jsonl").write_text("".join(lines))
        fails = rep.failures
        failing += [f"{name}:{f}" for f in fails]
        summary["suites"][name] = {"checks": len(rep.checks), "failed": len(fails),
                                   "failing_ids": sorted(set(fails)), "pass": not fails}
        print(f"{name:<11} {'PASS' if not fails else 'FAIL'}  {len(rep.checks)} checks, {len(fails)} failed")
    summary["pass"] = not failing
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    if failing:
        print("failing checks: " + ", ".join(sorted(set(failing))), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def export(in_dir, out_dir):
    """Write ``<inequality_id>.csv`` (and ``all_checks.csv``) from the reports in ``in_dir``."""
    src = Path(in_dir)
    files = sorted(src.glob("*.jsonl")) if src.is_dir() else []
    if not files:
        return _fail(f"no reports found in '{in_dir}'")
    rows = {}
    for f in files:
        for rec in load_report(f):
            alpha = rec.get("constants", {}).get("alpha")
            row = (rec["inequality_id"], rec["lhs"], rec["rhs"], rec["margin"], rec.get("mesh_h"),
                   alpha if alpha is not None else rec.get("domain", f.stem), rec.get("seed"))
            rows.setdefault(rec["inequality_id"], []).append(row)
    dst = Path(out_dir)
    dst.mkdir(parents=True, exist_ok=True)

    def write(path, data):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            w.writerows(["" if v is None else v for v in r] for r in data)
    for key in sorted(rows):
        write(dst / f"{key}.csv", rows[key])
    write(dst / "all_checks.csv", [r for k in sorted(rows) for r in rows[k]])
    print(f"wrote {len(rows)} tables to {dst}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="lipmax", description="Trace and Maxwell bound verification suites.")
    p.add_argument("--version", action="version", version=f"lipmax {__version__}")
    p.add_argument("--list-suites", action="store_true", help="list suites in execution order and exit")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run the suites of a config")
    r.add_argument("--config", required=True, help="config path or bundled name (%s)" % ", ".join(bundled_configs()))
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None, help="report directory")
    e = sub.add_parser("export", help="export reports as CSV tables")
    e.add_argument("--in", dest="in_dir", required=True)
    e.add_argument("--out", required=True)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.list_suites:
        print("\n".join(SUITES))
        return EXIT_OK
    if args.command == "run":
        return run(args.config, args.seed, args.out)
    if args.command == "export":
        return export(args.in_dir, args.out)
    parser.print_usage(sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
