"""Command line front-end: ``nullcollapse list|check|scan|residuals``.

Exit codes: 0 success / collapse verdict, 1 configuration error, 2 not null,
3 hypothesis failure, 4 unbounded curvature, 5 inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .chartgeom import GeometryError
from .collapse import CollapseError
from .config import ConfigError, load_scenario_file
from .nullsurf import (
    NullSurfaceError,
    NotNullError,
    GeneratorMismatchError,
    Scenario,
    b_evolution_residual,
    generator_curves,
    nullness_check,
    raychaudhuri_residual,
)
from .scan import COLLAPSE, UNBOUNDED, ScanConfigError, hypothesis_check, scan

log = logging.getLogger("nullcollapse")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_NULL = 2
EXIT_HYPOTHESIS = 3
EXIT_UNBOUNDED = 4
EXIT_INCONCLUSIVE = 5

RESIDUAL_COLUMNS = ["s", "theta", "dtheta_ds", "ray_residual", "bev_residual"]


def resolve_scenario(ref: str) -> Scenario:
    if ref in catalog.CATALOG:
        return catalog.get(ref)
    if ref.endswith(".json") or Path(ref).is_file():
        return load_scenario_file(ref)
    raise ConfigError(str(catalog.UnknownScenarioError(ref)))


def _default_workers() -> int:
    env = os.environ.get("NULLCOLLAPSE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer NULLCOLLAPSE_WORKERS=%r", env)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nullcollapse",
        description="Collapse diagnostics for compact null hypersurfaces.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list catalog scenarios")

    def common(p):
        p.add_argument("--scenario", required=True, help="catalog name or path to a scenario JSON file")
        p.add_argument("--grid", type=int, default=None, help="grid points per surface axis")
        p.add_argument("--out", default=None, help="output directory (scan) or CSV file (residuals)")

    p = sub.add_parser("check", help="nullness and curvature-hypothesis check")
    common(p)

    p = sub.add_parser("scan", help="lambda scan with verdict")
    common(p)
    p.add_argument("--lambda-start", type=float, default=0.1)
    p.add_argument("--lambda-factor", type=float, default=0.25)
    p.add_argument("--lambda-count", type=int, default=8)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--force", action="store_true", help="scan even if the check fails")

    p = sub.add_parser("residuals", help="Raychaudhuri / B-evolution residual traces")
    common(p)
    p.add_argument("--generators", type=int, default=1)
    p.add_argument("--steps", type=int, default=400, help="RK4 steps per period")
    return parser


def cmd_list(out=None) -> int:
    out = out or sys.stdout
    for name in catalog.names():
        doc = catalog.CATALOG[name]
        expected = doc.get("expected", "unit tests only")
        out.write(f"{name:14s} {expected:26s} {doc['description'].split('. ')[0].rstrip('.')}\n")
    return EXIT_OK


def _check(scenario: Scenario, grid: int) -> tuple[int, dict]:
    result: dict = {"scenario": scenario.name}
    try:
        null = nullness_check(scenario, grid, raise_on_fail=True)
    except (NotNullError, GeneratorMismatchError) as exc:
        result["nullness"] = {"passed": False, "error": exc.code, "message": str(exc)}
        result["status"] = "NOT_NULL"
        return EXIT_NOT_NULL, result
    result["nullness"] = null.to_dict()
    hyp = hypothesis_check(scenario, grid)
    result["hypothesis"] = hyp.to_dict()
    if not hyp.passed:
        result["status"] = "HYPOTHESIS_FAIL"
        return EXIT_HYPOTHESIS, result
    result["status"] = "PASS"
    return EXIT_OK, result


def cmd_check(scenario: Scenario, grid: int = 16, out=None) -> int:
    out = out or sys.stdout
    code, result = _check(scenario, grid)
    out.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return code


def cmd_scan(
    scenario: Scenario,
    out_dir: str | Path = ".",
    lambda_start: float = 0.1,
    lambda_factor: float = 0.25,
    lambda_count: int = 8,
    grid: int = 24,
    workers: int = 1,
    force: bool = False,
    out=None,
) -> int:
    out = out or sys.stdout
    if lambda_count < 4:
        raise ScanConfigError("lambda_count must be at least 4")
    if not force:
        code, result = _check(scenario, min(grid, 16))
        if code != EXIT_OK:
            out.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
            log.error("check failed (%s); rerun with --force to scan anyway", result["status"])
            return code
    report = scan(scenario, lambda_start, lambda_factor, lambda_count, grid, workers)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / f"{scenario.name}_scan"
    stem.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    stem.with_suffix(".json").write_text(report.to_json(), encoding="utf-8")
    stem.with_suffix(".dat").write_text(report.to_gnuplot(), encoding="utf-8")
    curv = report.fits["sup_ricci"]
    out.write(
        f"{scenario.name}: {report.verdict} "
        f"(curvature exponent {curv.exponent:.4g}, volume exponent {report.fits['volume'].exponent:.4g}, "
        f"diameter variation {report.diameter_variation:.3g})\n"
    )
    if report.verdict == COLLAPSE:
        return EXIT_OK
    if report.verdict == UNBOUNDED:
        return EXIT_UNBOUNDED
    return EXIT_INCONCLUSIVE


def residual_table(scenario: Scenario, generators: int = 1, steps: int = 400) -> str:
    emb = scenario.require_surface()
    gen = emb.generator_index
    transverse = [i for i in range(3) if i != gen][0]
    F = np.zeros(3)
    F[transverse] = 1.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESIDUAL_COLUMNS)
    for curve in generator_curves(scenario, generators, steps):
        ray = raychaudhuri_residual(scenario, curve)
        bev = b_evolution_residual(scenario, curve, F, F)
        for row in zip(ray.s, ray.theta, ray.dtheta_ds, ray.residual, bev.residual):
            w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_residuals(scenario: Scenario, generators: int = 1, steps: int = 400, out_path=None, out=None) -> int:
    out = out or sys.stdout
    text = residual_table(scenario, generators, steps)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
    )
    try:
        if args.command == "list":
            return cmd_list()
        scenario = resolve_scenario(args.scenario)
        if args.command == "check":
            return cmd_check(scenario, args.grid or 16)
        if args.command == "scan":
            workers = args.workers if args.workers is not None else _default_workers()
            return cmd_scan(
                scenario,
                args.out or ".",
                args.lambda_start,
                args.lambda_factor,
                args.lambda_count,
                args.grid or 24,
                max(1, workers),
                args.force,
            )
        return cmd_residuals(scenario, args.generators, args.steps, args.out)
    except (ConfigError, ScanConfigError) as exc:
        print(f"nullcollapse: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotNullError as exc:
        print(f"nullcollapse: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_NOT_NULL
    except (NullSurfaceError, CollapseError, GeometryError) as exc:
        print(f"nullcollapse: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"nullcollapse: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
