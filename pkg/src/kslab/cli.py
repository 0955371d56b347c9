"""Experiment driver: build spaces, run check suites, emit report bundles.

The single JSON config file is the audit trail: every run echoes it into the
summary, and identical config plus identical seed gives a byte-identical
summary.  Exit codes: 0 all selected checks pass, 1 at least one check fails,
2 the config or invocation is invalid (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .energy import DEFAULT_COUNT, DEFAULT_RATIO, DEFAULT_WINDOW, energy_sweep
from .space import DEFAULT_KAPPA, build_cloud, estimate_doubling
from .suites import (
    DEFAULT_TOLERANCES,
    SUITES,
    SuiteContext,
    applicable_suites,
    resolve_walk_dimension,
    run_suite,
)

__all__ = ["main", "ConfigError", "load_config"]

SUITE_NAMES = tuple(SUITES) + ("all",)

CLOUD_KINDS = {
    "interval_grid": {"n": (int, 9, 100_000)},
    "square_grid": {"n": (int, 9, 1_000)},
    "gasket": {"level": (int, 1, 8)},
    "carpet": {"level": (int, 1, 6)},
    "file": {"path": (str, None, None)},
}


class ConfigError(Exception):
    """Invalid configuration; the driver exits 2 without writing output."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _check_space(space) -> dict:
    _require(isinstance(space, dict), "config key 'space' must be an object")
    kind = space.get("kind")
    _require(kind in CLOUD_KINDS, f"unknown cloud kind {kind!r}")
    schema = CLOUD_KINDS[kind]
    out = {"kind": kind}
    for key, (typ, lo, hi) in schema.items():
        _require(key in space, f"space kind {kind!r} needs key {key!r}")
        value = space[key]
        if typ is int:
            _require(
                isinstance(value, int) and not isinstance(value, bool),
                f"space.{key} must be an integer",
            )
            _require(lo <= value <= hi, f"space.{key} must lie in [{lo}, {hi}]")
        else:
            _require(isinstance(value, str) and value, f"space.{key} must be a nonempty string")
        out[key] = value
    extra = set(space) - set(schema) - {"kind"}
    _require(not extra, f"unknown space keys: {sorted(extra)}")
    return out


def _check_number(cfg: dict, key: str, lo: float, hi: float, default: float) -> float:
    value = cfg.get(key, default)
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        f"config key {key!r} must be a number",
    )
    value = float(value)
    _require(
        math.isfinite(value) and lo <= value <= hi,
        f"config key {key!r} must lie in [{lo:g}, {hi:g}]",
    )
    return value


def load_config(path: str | Path) -> dict:
    """Read, validate, and normalize an experiment config.

    Raises ConfigError for anything out of contract: unknown keys, missing
    seed, parameters outside their documented ranges.
    """
    p = Path(path)
    _require(p.is_file(), f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require(isinstance(raw, dict), "config root must be a JSON object")

    known = {"space", "d_w", "seed", "suite", "scale_grid", "tolerances", "out"}
    extra = set(raw) - known
    _require(not extra, f"unknown config keys: {sorted(extra)}")
    _require("space" in raw, "config needs a 'space' object")

    cfg: dict = {"space": _check_space(raw["space"])}

    d_w = raw.get("d_w", 2.0)
    if d_w != "fit":
        _require(
            isinstance(d_w, (int, float)) and not isinstance(d_w, bool),
            "config key 'd_w' must be a number or the string \"fit\"",
        )
        _require(0.5 < float(d_w) < 6.0, "config key 'd_w' must lie in (0.5, 6)")
        d_w = float(d_w)
    cfg["d_w"] = d_w

    if "seed" in raw:
        seed = raw["seed"]
        _require(
            isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
            "config key 'seed' must be a nonnegative integer",
        )
        cfg["seed"] = seed

    suite = raw.get("suite", "all")
    _require(suite in SUITE_NAMES, f"unknown suite {suite!r}; choose from {SUITE_NAMES}")
    cfg["suite"] = suite

    grid = raw.get("scale_grid", {})
    _require(isinstance(grid, dict), "config key 'scale_grid' must be an object")
    extra = set(grid) - {"r_max", "ratio", "count", "window", "kappa"}
    _require(not extra, f"unknown scale_grid keys: {sorted(extra)}")
    r_max = grid.get("r_max")
    if r_max is not None:
        _require(
            isinstance(r_max, (int, float))
            and not isinstance(r_max, bool)
            and math.isfinite(float(r_max))
            and r_max > 0,
            "scale_grid.r_max must be a positive number or null",
        )
        r_max = float(r_max)
    count = grid.get("count", DEFAULT_COUNT)
    _require(
        isinstance(count, int) and not isinstance(count, bool) and 3 <= count <= 64,
        "scale_grid.count must be an integer in [3, 64]",
    )
    window = grid.get("window", DEFAULT_WINDOW)
    _require(
        isinstance(window, int) and not isinstance(window, bool) and 1 <= window <= count,
        "scale_grid.window must be an integer in [1, count]",
    )
    cfg["scale_grid"] = {
        "r_max": r_max,
        "ratio": _check_number(grid, "ratio", 0.05, 0.95, DEFAULT_RATIO),
        "count": count,
        "window": window,
        "kappa": _check_number(grid, "kappa", 1.0, 10.0, DEFAULT_KAPPA),
    }

    tol = raw.get("tolerances", {})
    _require(isinstance(tol, dict), "config key 'tolerances' must be an object")
    for key, value in tol.items():
        _require(key in DEFAULT_TOLERANCES, f"unknown tolerance {key!r}")
        _require(
            isinstance(value, (int, float))
            and not isinstance(value, bool)
            and math.isfinite(float(value))
            and value > 0,
            f"tolerance {key!r} must be a positive number",
        )
    cfg["tolerances"] = {k: float(v) for k, v in sorted(tol.items())}

    if "out" in raw:
        _require(
            isinstance(raw["out"], str) and raw["out"], "config key 'out' must be a nonempty string"
        )
        cfg["out"] = raw["out"]
    return cfg


def _merge_cli(cfg: dict, args: argparse.Namespace) -> dict:
    if getattr(args, "seed", None) is not None:
        _require(args.seed >= 0, "--seed must be nonnegative")
        cfg["seed"] = args.seed
    _require("seed" in cfg, "seed is mandatory: set it in the config or pass --seed")
    if getattr(args, "suite", None) is not None:
        _require(
            args.suite in SUITE_NAMES,
            f"unknown suite {args.suite!r}; choose from {SUITE_NAMES}",
        )
        cfg["suite"] = args.suite
    if getattr(args, "out", None) is not None:
        cfg["out"] = args.out
    return cfg


def _json_ready(value):
    """Recursively convert to plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_json_ready(payload), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n")


def _write_table(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            out = []
            for cell in row:
                if isinstance(cell, (bool, np.bool_)):
                    out.append(str(bool(cell)))
                elif isinstance(cell, (int, np.integer)):
                    out.append(str(int(cell)))
                elif isinstance(cell, (float, np.floating)):
                    out.append(repr(float(cell)))
                else:
                    out.append(str(cell))
            writer.writerow(out)


def _build_context(cfg: dict):
    cloud = build_cloud(cfg["space"])
    grid = cfg["scale_grid"]
    d_w, info = resolve_walk_dimension(
        cloud, cfg["d_w"], seed=cfg["seed"], kappa=grid["kappa"]
    )
    ctx = SuiteContext(
        cloud,
        d_w,
        info,
        seed=cfg["seed"],
        kappa=grid["kappa"],
        r_max=grid["r_max"],
        ratio=grid["ratio"],
        count=grid["count"],
        window=grid["window"],
        tolerances=cfg["tolerances"],
    )
    return cloud, ctx, d_w, info


def _require_out(cfg: dict) -> None:
    _require("out" in cfg, "output directory is mandatory: set 'out' in the config or pass --out")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _select_suites(cfg: dict, cloud) -> list[str]:
    names = applicable_suites(cloud)
    if cfg["suite"] == "all":
        return names
    _require(
        cfg["suite"] in names,
        f"suite {cfg['suite']!r} does not apply to cloud kind "
        f"{cloud.meta.get('kind')!r} (applicable: {names})",
    )
    return [cfg["suite"]]


def _run_bundle(cfg: dict) -> int:
    _require_out(cfg)
    cloud, ctx, d_w, info = _build_context(cfg)
    selected = _select_suites(cfg, cloud)
    out = _out_dir(cfg)

    checks = []
    failed = []
    for suite_name in selected:
        for result in run_suite(suite_name, ctx):
            row = result.row()
            row["suite"] = suite_name
            checks.append(row)
            if not result.passed:
                failed.append(result.name)
            if result.table is not None:
                header, rows = result.table
                _write_table(out / f"{result.name}.csv", header, rows)

    summary = {
        "all_passed": not failed,
        "checks": checks,
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "d_w": d_w,
        "d_w_provenance": info,
        "failed": sorted(failed),
        "n_checks": len(checks),
        "suites": selected,
    }
    _write_json(out / "summary.json", summary)
    print(f"{len(checks)} checks, {len(failed)} failed -> {out / 'summary.json'}")
    return 1 if failed else 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _merge_cli(load_config(args.config), args)
    return _run_bundle(cfg)


def cmd_check(args: argparse.Namespace) -> int:
    cfg = _merge_cli(load_config(args.config), args)
    _require(
        cfg["suite"] != "all",
        "check runs a single suite: pass --suite or set 'suite' in the config",
    )
    return _run_bundle(cfg)


def cmd_space(args: argparse.Namespace) -> int:
    cfg = _merge_cli(load_config(args.config), args)
    _require_out(cfg)
    cloud, ctx, d_w, info = _build_context(cfg)
    out = _out_dir(cfg)
    cloud.to_csv(out / "cloud.csv")
    grid = ctx.scale_grid()
    scales = [
        float(r) * (1.0 - 1.0 / 32.0)
        for r in grid.scales
        if r <= cloud.diameter / 2.0
    ]
    profile = estimate_doubling(
        cloud, n_samples=40, scales=scales, seed=cfg["seed"], kappa=ctx.kappa
    )
    profile.to_csv(out / "doubling.csv")
    payload = {
        "cloud": {
            "kind": cloud.meta.get("kind"),
            "n": cloud.n,
            "mesh": cloud.mesh,
            "diameter": cloud.diameter,
            "total_mass": cloud.total_mass,
            "abstract": cloud.is_abstract,
        },
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "d_w": d_w,
        "d_w_provenance": info,
        "doubling": profile.summary(),
    }
    _write_json(out / "space.json", payload)
    print(f"cloud with {cloud.n} points -> {out / 'space.json'}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _merge_cli(load_config(args.config), args)
    _require_out(cfg)
    cloud, ctx, d_w, info = _build_context(cfg)
    out = _out_dir(cfg)
    summaries = {}
    for label, f in ctx.standard_fields():
        sweep = energy_sweep(
            cloud, f, d_w=ctx.d_w, r_max=ctx.r_max, ratio=ctx.ratio,
            count=ctx.count, window=ctx.window, kappa=ctx.kappa, label=label,
        )
        sweep.to_csv(out / f"sweep_{label}.csv")
        summaries[label] = sweep.summary()
    payload = {
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "d_w": d_w,
        "d_w_provenance": info,
        "sweeps": summaries,
    }
    _write_json(out / "sweep.json", payload)
    print(f"{len(summaries)} field sweeps -> {out / 'sweep.json'}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    bundle = Path(args.bundle)
    summary_path = bundle / "summary.json"
    if not summary_path.is_file():
        print(f"error: no summary.json under {bundle}", file=sys.stderr)
        return 2
    try:
        summary = json.loads(summary_path.read_text())
    except json.JSONDecodeError as exc:
        print(f"error: corrupt summary.json: {exc}", file=sys.stderr)
        return 2

    checks = summary.get("checks", [])
    name_w = max([len(c["name"]) for c in checks] + [5])
    claim_w = max([len(c["claim"]) for c in checks] + [5])
    for c in checks:
        flag = "PASS" if c["passed"] else "FAIL"
        constant = c.get("constant")
        shown = f"{constant:.6g}" if isinstance(constant, (int, float)) else "-"
        print(f"{flag}  {c['name']:<{name_w}}  {c['claim']:<{claim_w}}  {shown}")
    verdict = "all passed" if summary.get("all_passed") else "FAILURES PRESENT"
    print(f"{len(checks)} checks: {verdict} (d_w = {summary.get('d_w')})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kslab",
        description="Multiscale energy diagnostics on measured point clouds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    p_space = sub.add_parser("space", help="build the cloud and profile its geometry")
    with_common(p_space)
    p_space.set_defaults(func=cmd_space)

    p_sweep = sub.add_parser("sweep", help="multiscale energy sweeps for the standard fields")
    with_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="run one named check suite")
    with_common(p_check)
    p_check.add_argument("--suite", default=None, help="suite to run")
    p_check.set_defaults(func=cmd_check)

    p_run = sub.add_parser("run", help="run the configured suites and write a bundle")
    with_common(p_run)
    p_run.add_argument("--suite", default=None, help="suite selection override")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="print the table for an existing bundle")
    p_report.add_argument("bundle", help="bundle directory containing summary.json")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        # Cloud builders and file IO signal contract violations with
        # ValueError; surface them as config diagnostics, not tracebacks.
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
