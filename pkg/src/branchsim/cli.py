"""Command line entry point: ``branchsim run|sweep|check``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema

from .config import KEYS, SWEEPABLE, ScenarioConfig, load_config, parse_config
from .errors import BranchSimError, ConfigError
from .hilbert import set_max_joint_dim
from .scenarios import COLUMNS, ScenarioResult, run_scenario
from .workers import worker_count

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CAPACITY = 0, 2, 3, 4


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "item"):  # numpy scalars
        return _json_safe(obj.item())
    return obj


def load_schema() -> dict:
    text = resources.files("branchsim").joinpath("schema/summary.schema.json").read_text()
    return json.loads(text)


def trajectory_csv(rows) -> str:
    lines = [",".join(COLUMNS)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_artifacts(cfg: ScenarioConfig, result: ScenarioResult, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    passed = result.summary.get("flags", {}).get("allPassed", True)
    summary = {"scenario": cfg.scenario, "status": "ok" if passed else "failed", "seed": cfg.seed,
               "oracles": []}
    summary.update(result.summary)
    summary = _json_safe(summary)
    jsonschema.validate(summary, load_schema())
    _write(out / "trajectory.csv", trajectory_csv(result.rows))
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write(out / "config.echo", cfg.echo())
    return summary


def execute(cfg: ScenarioConfig, out: Path) -> tuple[int, ScenarioResult | None]:
    previous = set_max_joint_dim(cfg.max_joint_dim)
    try:
        result = run_scenario(cfg)
    finally:
        set_max_joint_dim(previous)
    summary = write_artifacts(cfg, result, out)
    return (EXIT_OK if summary["status"] == "ok" else EXIT_NUMERICAL), result


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    code, _ = execute(cfg, cfg.output_dir(args.out))
    return code


def _parse_values(param: str, raw: str) -> list[str]:
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"--values for {param} is empty")
    return values


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.param not in SWEEPABLE:
        raise ConfigError(f"parameter {args.param!r} cannot be swept; choose from {', '.join(SWEEPABLE)}")
    values = _parse_values(args.param, args.values)
    key = SWEEPABLE[args.param]
    variants = [cfg.with_value(key, v) for v in values]
    root = cfg.output_dir(args.out)
    root.mkdir(parents=True, exist_ok=True)

    def one(item):
        raw, variant = item
        try:
            return execute(variant, root / f"{args.param}={raw}")
        except BranchSimError as exc:
            return exc, None

    with ThreadPoolExecutor(max_workers=min(worker_count(), len(variants))) as pool:
        outcomes = list(pool.map(one, zip(values, variants)))
    for outcome, _ in outcomes:
        if isinstance(outcome, BranchSimError):
            raise outcome
    header = None
    lines = []
    for variant, (code, result) in zip(variants, outcomes):
        if header is None:
            header = list(result.headline)
            lines.append(",".join([args.param] + header))
        value = getattr(variant, key)
        lines.append(",".join([_fmt(value)] + [_fmt(result.headline.get(h, math.nan)) for h in header]))
    _write(root / "sweep.csv", "\n".join(lines) + "\n")
    return max(code for code, _ in outcomes)


def cmd_check(args) -> int:
    text = f"scenario = check\nseed = {args.seed}\n"
    if args.filter:
        text += f"filter = {args.filter}\n"
    cfg = parse_config(text)
    code, result = execute(cfg, Path(args.out))
    for report in result.summary["oracles"]:
        mark = "ok  " if report["passed"] else "FAIL"
        print(f"{mark} {report['name']:<22} max|err| = {report['maxAbsError']:.3e}"
              f" (threshold {report['threshold']:.1e})")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="branchsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: the config's 'output' key)")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="run a scenario for several values of one parameter")
    s.add_argument("config")
    s.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    c = sub.add_parser("check", help="compare the library against the reference implementations")
    c.add_argument("--filter", default="")
    c.add_argument("--seed", type=int, default=KEYS["seed"][1])
    c.add_argument("--out", default="branchsim-check")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BranchSimError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyError as exc:
        print(f"config error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
