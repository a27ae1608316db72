"""Lambda scans: per-lam diagnostics, log-log exponent fits and the verdict."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .collapse import (
    LambdaFamily,
    build_family,
    cancellation_identity,
    diameter,
    gauss_ricci,
    h_geometry,
    second_fundamental_form,
    tensor_norm,
    to_frame,
    volume,
)
from .nullsurf import Scenario, b_surface, frame_at, nullness_check, surface_grid

COLLAPSE = "COLLAPSE_BOUNDED_DIAMETER"
UNBOUNDED = "UNBOUNDED_CURVATURE"
INCONCLUSIVE = "INCONCLUSIVE"

HYPOTHESIS_TOL = 1e-8
ZERO_FLOOR = 1e-12
LAMBDA_FLOOR = 1e-8

CSV_COLUMNS = [
    "lam",
    "sup_ricci",
    "volume",
    "diameter",
    "gauss_vs_direct",
    "theta_res",
    "rZZ_res",
    "rZX_res",
]


class ScanConfigError(ValueError):
    pass


@dataclass
class HypothesisReport:
    theta: float
    r_zz: float
    r_zx: float
    tol: float = HYPOTHESIS_TOL

    @property
    def passed(self) -> bool:
        return self.theta < self.tol and self.r_zz < self.tol and self.r_zx < self.tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "theta_sup": self.theta,
            "rZZ_sup": self.r_zz,
            "rZX_sup": self.r_zx,
            "tolerance": self.tol,
        }


def hypothesis_check(scenario: Scenario, grid: int = 16) -> HypothesisReport:
    """Sup norms over the grid of theta, r(Z, Z) and max over X, Y of |r(Z, .)|."""
    pts = surface_grid(scenario.require_surface().chart, grid)
    frame = frame_at(scenario, pts, order=2)
    Bs = b_surface(frame)
    xi = frame.xi
    theta = np.einsum("...ij,...i,...j->...", Bs, xi[..., 0], xi[..., 0]) + np.einsum(
        "...ij,...i,...j->...", Bs, xi[..., 1], xi[..., 1]
    )
    ric = frame.geom.ricci
    rzz = np.einsum("...ab,...a,...b->...", ric, frame.Z, frame.Z)
    rzx = np.einsum("...ab,...a,...b->...", ric, frame.Z, frame.X)
    rzy = np.einsum("...ab,...a,...b->...", ric, frame.Z, frame.Y)
    return HypothesisReport(
        theta=float(np.max(np.abs(theta))),
        r_zz=float(np.max(np.abs(rzz))),
        r_zx=float(max(np.max(np.abs(rzx)), np.max(np.abs(rzy)))),
    )


@dataclass
class ExponentFit:
    exponent: float
    residual: float
    points: int

    @property
    def bounded(self) -> bool:
        return math.isinf(self.exponent) and self.exponent > 0

    def to_dict(self) -> dict:
        exp = "inf" if math.isinf(self.exponent) else self.exponent
        return {"exponent": exp, "residual": self.residual, "points": self.points,
                "status": "BOUNDED" if self.bounded else "FITTED"}


def fit_exponent(lams, values, window: int | None = None) -> ExponentFit:
    """Least squares slope of log(value) against log(lam) over the last ``window`` points.

    Values below the zero floor count as identically zero; if fewer than two
    nonzero values remain the quantity is reported as bounded (exponent +inf).
    """
    lams = np.asarray(lams, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    if window is None:
        window = math.ceil(len(lams) / 2)
    lams, values = lams[-window:], values[-window:]
    keep = values >= ZERO_FLOOR
    if np.count_nonzero(keep) < 2:
        return ExponentFit(math.inf, 0.0, int(np.count_nonzero(keep)))
    x, y = np.log(lams[keep]), np.log(values[keep])
    slope, icpt = np.polyfit(x, y, 1)
    res = y - (slope * x + icpt)
    return ExponentFit(float(slope), float(np.sqrt(np.mean(res**2))), int(len(x)))


@dataclass
class LambdaRow:
    lam: float
    sup_ricci: float
    volume: float
    diameter: float
    gauss_vs_direct: float
    trk_sup: float
    kpq_sup: float
    min_h_eig: float
    cancellation: float


@dataclass
class ScanReport:
    scenario: str
    grid: int
    rows: list[LambdaRow]
    hypothesis: HypothesisReport
    fits: dict[str, ExponentFit]
    diameter_variation: float
    verdict: str
    truncated: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def lams(self) -> list[float]:
        return [r.lam for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        h = self.hypothesis
        for r in self.rows:
            w.writerow([
                repr(r.lam), repr(r.sup_ricci), repr(r.volume), repr(r.diameter),
                repr(r.gauss_vs_direct), repr(h.theta), repr(h.r_zz), repr(h.r_zx),
            ])
        return buf.getvalue()

    def to_gnuplot(self) -> str:
        lines = ["# " + " ".join(CSV_COLUMNS)]
        h = self.hypothesis
        for r in self.rows:
            vals = [r.lam, r.sup_ricci, r.volume, r.diameter, r.gauss_vs_direct, h.theta, h.r_zz, h.r_zx]
            lines.append(" ".join(f"{v:.17g}" for v in vals))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "grid": self.grid,
            "lambdas": self.lams,
            "verdict": self.verdict,
            "truncated": self.truncated,
            "hypothesis": self.hypothesis.to_dict(),
            "exponents": {k: v.to_dict() for k, v in self.fits.items()},
            "diameter_variation": self.diameter_variation,
            "rows": [r.__dict__ for r in self.rows],
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def lambda_schedule(start: float, factor: float, count: int) -> list[float]:
    if not 0 < start <= 0.5:
        raise ScanConfigError("lambda_start must lie in (0, 0.5]")
    if not 0 < factor < 1:
        raise ScanConfigError("lambda_factor must lie in (0, 1)")
    if count < 4:
        raise ScanConfigError("lambda_count must be at least 4")
    return [start * factor**k for k in range(count)]


def scan_row(family: LambdaFamily, lam: float, grid: int) -> LambdaRow:
    chart = family.h_lam.chart
    pts = surface_grid(chart, grid)
    kf = second_fundamental_form(family, lam, pts, curvature=True)
    h, ric = h_geometry(family, lam, pts)
    p_direct = to_frame(ric, kf.basis)
    p_gauss = gauss_ricci(family, lam, pts, kf)
    h_eig = np.linalg.eigvalsh(h)
    lhs, rhs = cancellation_identity(kf.k)
    k = kf.k
    return LambdaRow(
        lam=lam,
        sup_ricci=float(np.max(tensor_norm(h, ric))),
        volume=volume(family, lam, grid),
        diameter=diameter(family, lam, grid),
        gauss_vs_direct=float(np.max(np.abs(p_gauss - p_direct))),
        trk_sup=float(np.max(np.abs(np.trace(k, axis1=-2, axis2=-1)))),
        kpq_sup=float(np.max(np.abs(k[..., :2, :2]))),
        min_h_eig=float(np.min(h_eig)),
        cancellation=float(np.max(np.abs(lhs - rhs))),
    )


def verdict_for(hyp: HypothesisReport, fits: dict[str, ExponentFit], diam_var: float) -> str:
    curv = fits["sup_ricci"]
    vol = fits["volume"]
    if hyp.passed and curv.exponent >= -0.05 and diam_var <= 0.05 and vol.exponent >= 0.25:
        return COLLAPSE
    if curv.exponent <= -0.25 and curv.residual < 0.1:
        return UNBOUNDED
    return INCONCLUSIVE


def scan(
    scenario: Scenario,
    lambda_start: float = 0.1,
    lambda_factor: float = 0.25,
    lambda_count: int = 8,
    grid: int = 24,
    workers: int = 1,
    family: LambdaFamily | None = None,
) -> ScanReport:
    """Run the lam -> 0 scan and classify it."""
    lams = lambda_schedule(lambda_start, lambda_factor, lambda_count)
    notes = []
    truncated = False
    if lams[-1] < LAMBDA_FLOOR:
        kept = [l for l in lams if l >= LAMBDA_FLOOR]
        notes.append(
            f"scan truncated at lam >= {LAMBDA_FLOOR:g}: {len(lams) - len(kept)} value(s) dropped"
        )
        lams, truncated = kept, True
        if len(lams) < 2:
            raise ScanConfigError("no lambda values above the float-precision floor")
    nullness_check(scenario, min(grid, 16))
    hyp = hypothesis_check(scenario, min(grid, 16))
    if family is None:
        family = build_family(scenario)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda l: scan_row(family, l, grid), lams))
    else:
        rows = [scan_row(family, l, grid) for l in lams]
    window = math.ceil(len(lams) / 2)
    fits = {
        "sup_ricci": fit_exponent(lams, [r.sup_ricci for r in rows], window),
        "volume": fit_exponent(lams, [r.volume for r in rows], window),
        "trace_k": fit_exponent(lams, [r.trk_sup for r in rows], window),
        "k_PQ": fit_exponent(lams, [r.kpq_sup for r in rows], window),
    }
    last = [r.diameter for r in rows[-window:]]
    diam_var = float((max(last) - min(last)) / max(last)) if max(last) > 0 else math.inf
    if any(r.min_h_eig <= 0 for r in rows):
        notes.append("h_lam failed to be positive definite at some grid point")
    return ScanReport(
        scenario=scenario.name,
        grid=grid,
        rows=rows,
        hypothesis=hyp,
        fits=fits,
        diameter_variation=diam_var,
        verdict=verdict_for(hyp, fits, diam_var),
        truncated=truncated,
        notes=notes,
    )
