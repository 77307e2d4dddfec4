"""Command-line entry point.

Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 failed acceptance check (``--check``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, PertevolError
from . import config as cfgmod
from . import runner

log = logging.getLogger("pertevol")

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_CHECK = 3


def _common(p: argparse.ArgumentParser, config_required: bool = True, multi: bool = False) -> None:
    p.add_argument("--config", required=config_required, action="append" if multi else "store",
                   help="scenario JSON file" + (" (repeatable)" if multi else ""))
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--threads", type=int, default=1, help="worker threads over the lambda grid")
    p.add_argument("--seed", type=int, default=0, help="seed for randomly generated models")
    p.add_argument("--check", action="store_true", help="exit 3 if an acceptance check fails")
    p.add_argument("--timings", action="store_true",
                   help="record wall-clock runtimes (output is then not reproducible)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pertevol", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("ti-solve", help="time-independent engine: coefficients and error sweep"))
    _common(sub.add_parser("td-solve", help="time-dependent engines: coefficients and error sweep"))
    demo = sub.add_parser("iontrap-demo", help="first-order ion-trap quantities vs closed forms")
    _common(demo, config_required=False)
    demo.add_argument("--lambda", dest="lam", type=float, default=0.05)
    _common(sub.add_parser("sweep", help="run one scenario or a bundle of scenarios"))
    _common(sub.add_parser("report", help="side-by-side comparison of scenarios"), multi=True)
    return ap


def _load_all(paths) -> list:
    paths = paths if isinstance(paths, list) else [paths]
    out = []
    for p in paths:
        out.extend(cfgmod.load(p))
    return out


def _require_engines(cfgs, allowed, command):
    for c in cfgs:
        if c.engine not in allowed:
            raise ConfigError(f"{c.source}: {command} does not accept engine {c.engine!r}")


def _run_and_write(cfgs, args, out: Path) -> bool:
    ok = True
    for c in cfgs:
        res = runner.run_scenario(c, threads=args.threads, seed=args.seed, timings=args.timings)
        csv_path, js_path = runner.write_result(res, out)
        passed = res.summary["check"]["passed"]
        ok &= passed
        print(f"{c.scenario_id}: {'PASS' if passed else 'FAIL'} -> {csv_path}, {js_path}")
    return ok


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out)
    try:
        if args.command == "iontrap-demo":
            model = None
            if args.config:
                model = cfgmod.load(args.config)[0].model
                if model["kind"] != "iontrap":
                    raise ConfigError(f"{args.config}: iontrap-demo needs an iontrap model")
            res = runner.iontrap_demo(model, lam=args.lam, threads=args.threads)
            rows = res.pop("_rows")
            (out / "iontrap_demo.csv").parent.mkdir(parents=True, exist_ok=True)
            (out / "iontrap_demo.csv").write_text(runner.rows_to_csv(rows))
            _write_json(out / "iontrap_demo.json", res)
            for k, v in res["checks"].items():
                print(f"{k}: {'PASS' if v else 'FAIL'}")
            ok = res["passed"]
        elif args.command == "report":
            cfgs = _load_all(args.config)
            results = [runner.run_scenario(c, threads=args.threads, seed=args.seed, timings=args.timings)
                       for c in cfgs]
            md, js = runner.compare_report(results)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.md").write_text(md)
            _write_json(out / "report.json", js)
            print(f"report -> {out / 'report.md'}")
            ok = all(r.summary["check"]["passed"] for r in results)
        else:
            cfgs = _load_all(args.config)
            if args.command == "ti-solve":
                _require_engines(cfgs, cfgmod.TI_ENGINES, "ti-solve")
            elif args.command == "td-solve":
                _require_engines(cfgs, cfgmod.TD_ENGINES, "td-solve")
            if args.command in ("ti-solve", "td-solve"):
                for c in cfgs:
                    _write_json(out / f"{c.scenario_id}.solution.json", runner.solution_payload(c, args.seed))
            ok = _run_and_write(cfgs, args, out)
    except ConfigError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PertevolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.check and not ok:
        return EXIT_CHECK
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
