"""
Command-line scenario runner.

    rstab list [--user-dir DIR]
    rstab run <cfg-or-name> [--grid-scale K] [--csv DIR] [--json DIR] [--seed N]
                             [--dump-fields DIR]

Exit codes: 0 when every contracted check passes, 1 when a numerical
contract is violated, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path

from rstab.errors import ConfigError, NumericalContractViolation
from rstab.scenario import ScenarioConfig, ScenarioResult, run_scenario

log = logging.getLogger("rstab")

USER_DIR_ENV = "RSTAB_SCENARIOS"


def shipped_dir() -> Path:
    return Path(str(resources.files("rstab") / "scenarios"))


def scenario_files(user_dir: Path | None = None) -> list[tuple[str, Path]]:
    """(origin, path) for shipped configs, then user configs."""
    out = [("shipped", p) for p in sorted(shipped_dir().glob("*.cfg"))]
    if user_dir is not None and user_dir.is_dir():
        out += [("user", p) for p in sorted(user_dir.glob("*.cfg"))]
    return out


def list_scenarios(user_dir: Path | None = None) -> str:
    lines = []
    for origin, path in scenario_files(user_dir):
        try:
            cfg = ScenarioConfig.load(path)
            about = cfg.provenance or cfg.description
            lines.append(f"{cfg.name:<22} [{origin}] {about}")
        except ConfigError as exc:
            lines.append(f"{path.stem:<22} [{origin}] unreadable: {exc}")
    return "\n".join(lines)


def resolve(target: str, user_dir: Path | None = None) -> Path:
    path = Path(target)
    if path.is_file():
        return path
    for _, p in scenario_files(user_dir):
        if p.stem == target:
            return p
    raise ConfigError(f"no config file or scenario named {target!r}")


def write_json(result: ScenarioResult, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{result.config.name}.json"
    path.write_text(json.dumps(result.as_dict(), indent=2, default=float))
    return path


def write_csv(result: ScenarioResult, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    checks = directory / f"{result.config.name}-checks.csv"
    rows = [c.as_dict() for c in result.checks]
    with checks.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["scenario"] + list(rows[0]) if rows else ["scenario"])
        w.writeheader()
        for row in rows:
            w.writerow({"scenario": result.config.name, **row})
    paths = [checks]
    if result.stability:
        summary = directory / f"{result.config.name}-stability.csv"
        keys = ["scenario", "param", "r", "leaf", "verdict", "subspace_dim", "criterion_met",
                "hypothesis_met", "Tr_sign", "NSr1_sign", "r_tense", "min_eig", "max_eig"]
        with summary.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore")
            w.writeheader()
            for rep in result.stability:
                eigs = rep["gram_spectrum"]
                w.writerow({"scenario": result.config.name, **rep,
                            "min_eig": min(eigs), "max_eig": max(eigs)})
        paths.append(summary)
    return paths


def format_result(result: ScenarioResult) -> str:
    lines = [f"scenario {result.config.name}: {result.config.description}",
             f"  ambient: {result.classification}",
             f"  orientation: {result.orientation}"]
    for c in result.checks:
        status = {True: "ok  ", False: "FAIL", None: "info"}[c.passed]
        where = "" if c.param is None else f" @{c.param:g}"
        rr = "" if c.r is None else f" r={c.r}"
        val = c.value if isinstance(c.value, (str, bool)) else f"{c.value:.3e}"
        tol = "" if c.tolerance is None else f" (< {c.tolerance:g})"
        note = f"  [{c.note}]" if c.note else ""
        lines.append(f"  {status} {c.suite}/{c.name}{where}{rr}: {val}{tol}{note}")
    lines.append(f"  result: {'PASS' if result.ok else 'FAIL'} "
                 f"({len(result.failures)} failed of {sum(c.passed is not None for c in result.checks)})")
    return "\n".join(lines)


def run(target: str, grid_scale: int = 1, csv_dir=None, json_dir=None, seed: int = 0,
        dump_dir=None, user_dir: Path | None = None) -> ScenarioResult:
    cfg = ScenarioConfig.load(resolve(target, user_dir))
    if grid_scale < 1 or grid_scale & (grid_scale - 1):
        raise ConfigError("--grid-scale must be a power of two")
    start = time.perf_counter()
    result = run_scenario(cfg, grid_scale, seed, Path(dump_dir) if dump_dir else None)
    log.info("%s finished in %.1f s", cfg.name, time.perf_counter() - start)
    csv_dir = csv_dir or cfg.output.get("csv")
    json_dir = json_dir or cfg.output.get("json")
    if csv_dir:
        write_csv(result, Path(csv_dir))
    if json_dir:
        write_json(result, Path(json_dir))
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rstab", description="Run hypersurface stability scenarios.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="list shipped and user scenarios")
    p_list.add_argument("--user-dir", type=Path, default=None,
                        help=f"extra directory of .cfg files (default: ${USER_DIR_ENV})")

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("config", help="path to a .cfg file or a scenario name")
    p_run.add_argument("--grid-scale", type=int, default=1,
                       help="multiply grid sizes by this power of two")
    p_run.add_argument("--csv", dest="csv_dir", default=None, help="directory for CSV reports")
    p_run.add_argument("--json", dest="json_dir", default=None, help="directory for JSON reports")
    p_run.add_argument("--seed", type=int, default=0, help="seed for random property checks")
    p_run.add_argument("--dump-fields", default=None,
                       help="directory for per-node f, L_r f, J_r f CSV dumps")
    p_run.add_argument("--user-dir", type=Path, default=None, help="extra directory of .cfg files")
    p_run.add_argument("-q", "--quiet", action="store_true", help="only print the final status")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    user_dir = args.user_dir or (Path(os.environ[USER_DIR_ENV]) if USER_DIR_ENV in os.environ else None)
    if args.command == "list":
        print(list_scenarios(user_dir))
        return 0
    try:
        result = run(args.config, args.grid_scale, args.csv_dir, args.json_dir, args.seed,
                     args.dump_fields, user_dir)
        if not args.quiet:
            print(format_result(result))
        if not result.ok:
            names = ", ".join(sorted({f"{c.suite}/{c.name}" for c in result.failures}))
            raise NumericalContractViolation(f"failed checks: {names}")
    except (ConfigError, NumericalContractViolation) as exc:
        print(f"rstab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
