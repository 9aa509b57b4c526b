"""Command line driver: ``corrlab <kind> [--config FILE] [overrides]`` and ``corrlab report``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .experiments import CHECKS, ConfigError, config_from_mapping, load_config, read_records, report, run, write_record

_FLAGS = [
    ("--check", str),
    ("--alpha", float),
    ("--theta", float),
    ("--m", int),
    ("--N", str),
    ("--family", str),
    ("--radius", float),
    ("--grid-log2", int),
    ("--delta", float),
    ("--epsilon", float),
    ("--replicates", int),
    ("--s-points", int),
    ("--samples", int),
    ("--measure-samples", int),
    ("--label", str),
]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrlab", description="Correlation experiments for alpha n^theta mod 1.")
    sub = p.add_subparsers(dest="command", required=True)
    for kind in CHECKS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", action="append", default=[], help="INI file; repeatable")
        for flag, typ in _FLAGS:
            sp.add_argument(flag, type=typ, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--threads", type=int, default=None, help="worker count")
    rp = sub.add_parser("report", help="summarize records.jsonl files")
    rp.add_argument("records", nargs="+")
    rp.add_argument("--out", default=None, help="directory for report.md and slopes.csv")
    return p


def _overrides(ns) -> dict:
    out = {}
    for flag, _ in _FLAGS:
        key = flag[2:].replace("-", "_")
        val = getattr(ns, key)
        if val is not None:
            out[key] = str(val)
    if ns.seed is not None:
        out["seed"] = str(ns.seed)
    if ns.out is not None:
        out["out"] = ns.out
    if ns.threads is not None:
        out["workers"] = str(ns.threads)
    return out


def _summary(rec: dict) -> str:
    mark = "PASS" if rec["passed"] else "FAIL"
    certs = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in rec["certificates"].items())
    tail = f" error={rec['error']}" if rec.get("error") else ""
    return f"{mark} {rec['kind']}/{rec['check']} {rec['label'] or rec['config_hash']} ({rec['runtime_s']:.2f}s) {certs}{tail}"


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    if ns.command == "report":
        try:
            md, rows = report(read_records(ns.records))
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(md, end="")
        if ns.out:
            out = Path(ns.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.md").write_text(md)
            with open(out / "slopes.csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=["config_hash", "series", "slope", "r2"])
                w.writeheader()
                w.writerows(rows)
        return 0
    overrides = _overrides(ns)
    try:
        if ns.config:
            cfgs = [load_config(p, overrides) for p in ns.config]
        else:
            cfgs = [config_from_mapping({"kind": ns.command, **overrides})]
        for c in cfgs:
            if c.kind != ns.command:
                raise ConfigError(f"config kind {c.kind!r} does not match subcommand {ns.command!r}")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    ok = True
    for c in cfgs:
        rec = run(c)
        write_record(rec, c.out)
        print(_summary(rec))
        ok &= rec["passed"]
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
