"""Curvature of chart-based metrics.

Metric components are expressions; their first and second partial
derivatives are taken symbolically once and cached on the ``MetricSpec``.
Everything after that (inverse, Christoffel symbols, Riemann, Ricci) is
dense numpy algebra evaluated on batches of points.

Conventions::

    Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_bd - d_d g_bc)
    R^a_bcd    = d_c Gamma^a_db - d_d Gamma^a_cb
                 + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
    R_abcd     = g_ae R^e_bcd
    r_bd       = R^a_bad

so that ``g(R(X, Y)V, W) = R_abcd W^a V^b X^c Y^d``.

Arrays carry the point batch in the leading axes: a batch of shape ``S`` gives
metric arrays of shape ``S + (n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .expr import Expression, as_expression, differentiate, evaluate_many

LORENTZIAN = "lorentzian"
RIEMANNIAN = "riemannian"

SINGULAR_RTOL = 1e-12


class GeometryError(Exception):
    pass


class SingularMetricError(GeometryError):
    pass


class SignatureError(GeometryError):
    pass


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names with optional periods (``None`` = not periodic)."""

    names: tuple[str, ...]
    periods: tuple[float | None, ...] = ()

    def __post_init__(self):
        names = tuple(self.names)
        periods = tuple(self.periods) if self.periods else (None,) * len(names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        if len(periods) != len(names):
            raise ValueError("one period entry per coordinate required")
        for p in periods:
            if p is not None and not p > 0:
                raise ValueError(f"period must be positive, got {p}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "periods", periods)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def periodic(self) -> bool:
        return all(p is not None for p in self.periods)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True, eq=False)
class MetricSpec:
    chart: Chart
    components: tuple[tuple[Expression, ...], ...]
    signature: str = LORENTZIAN

    def __post_init__(self):
        n = self.chart.dim
        rows = [list(row) for row in self.components]
        if len(rows) != n or any(len(row) != n for row in rows):
            raise ValueError(f"metric must be {n}x{n}")
        # entries below the diagonal may be omitted (None)
        comps = [
            [as_expression(c) if a <= b else None for b, c in enumerate(row)]
            for a, row in enumerate(rows)
        ]
        # mirror the upper triangle so symmetry holds by construction
        sym = tuple(
            tuple(comps[min(a, b)][max(a, b)] for b in range(n)) for a in range(n)
        )
        object.__setattr__(self, "components", sym)
        if self.signature not in (LORENTZIAN, RIEMANNIAN):
            raise ValueError(f"unknown signature tag {self.signature!r}")

    @property
    def dim(self) -> int:
        return self.chart.dim

    def _pairs(self):
        n = self.dim
        return [(a, b) for a in range(n) for b in range(a, n)]

    @cached_property
    def first_derivatives(self) -> dict[tuple[int, int, int], Expression]:
        """``(c, a, b) -> d_c g_ab`` for a <= b."""
        out = {}
        for c, name in enumerate(self.chart.names):
            for a, b in self._pairs():
                out[c, a, b] = differentiate(self.components[a][b], name)
        return out

    @cached_property
    def second_derivatives(self) -> dict[tuple[int, int, int, int], Expression]:
        """``(c, d, a, b) -> d_c d_d g_ab`` for c <= d, a <= b."""
        d1 = self.first_derivatives
        out = {}
        n = self.dim
        for c in range(n):
            for d in range(c, n):
                name = self.chart.names[d]
                for a, b in self._pairs():
                    out[c, d, a, b] = differentiate(d1[c, a, b], name)
        return out


def metric_spec(
    names: Sequence[str],
    components: Sequence[Sequence[object]],
    signature: str = LORENTZIAN,
    periods: Sequence[float | None] | None = None,
) -> MetricSpec:
    chart = Chart(tuple(names), tuple(periods) if periods else ())
    return MetricSpec(chart, tuple(tuple(row) for row in components), signature)


@dataclass
class PointFrameData:
    """Geometry at a batch of points; arrays are dense with the batch leading."""

    point: Mapping[str, object]
    metric: np.ndarray
    inverse: np.ndarray
    christoffel: np.ndarray
    riemann_up: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# evaluation helpers


def _batch_shape(values) -> tuple[int, ...]:
    return np.broadcast_shapes(*(np.shape(v) for v in values))


def _assemble_symmetric(n, pairs, values, shape) -> np.ndarray:
    out = np.empty(shape + (n, n))
    for (a, b), v in zip(pairs, values):
        out[..., a, b] = v
        out[..., b, a] = v
    return out


def _jets(M: MetricSpec, p: Mapping[str, object], order: int):
    """Evaluate g, d g, d d g symbolically at points ``p``."""
    n = M.dim
    pairs = M._pairs()
    exprs = [M.components[a][b] for a, b in pairs]
    if order >= 1:
        d1 = M.first_derivatives
        keys1 = list(d1)
        exprs += [d1[k] for k in keys1]
    if order >= 2:
        d2 = M.second_derivatives
        keys2 = list(d2)
        exprs += [d2[k] for k in keys2]
    values = evaluate_many(exprs, p)
    shape = _batch_shape(values + [p[nm] for nm in M.chart.names if nm in p])
    np_ = len(pairs)
    g = _assemble_symmetric(n, pairs, values[:np_], shape)
    dg = ddg = None
    pos = np_
    if order >= 1:
        dg = np.empty(shape + (n, n, n))
        for (c, a, b), v in zip(keys1, values[pos : pos + len(keys1)]):
            dg[..., c, a, b] = v
            dg[..., c, b, a] = v
        pos += len(keys1)
    if order >= 2:
        ddg = np.empty(shape + (n, n, n, n))
        for (c, d, a, b), v in zip(keys2, values[pos : pos + len(keys2)]):
            ddg[..., c, d, a, b] = v
            ddg[..., c, d, b, a] = v
            ddg[..., d, c, a, b] = v
            ddg[..., d, c, b, a] = v
    return g, dg, ddg


def check_signature(g: np.ndarray, signature: str) -> None:
    eig = np.linalg.eigvalsh(g)
    scale = np.max(np.abs(eig), axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    if np.any(np.abs(eig) <= SINGULAR_RTOL * scale):
        raise SingularMetricError("metric is singular at some point")
    neg_count = np.sum(eig < 0, axis=-1)
    want = 1 if signature == LORENTZIAN else 0
    if np.any(neg_count != want):
        raise SignatureError(
            f"signature mismatch: expected {signature}, "
            f"found {int(np.max(neg_count))} negative eigenvalue(s)"
        )


def _inverse(g: np.ndarray) -> np.ndarray:
    det = np.linalg.det(g)
    scale = np.max(np.abs(g), axis=(-2, -1)) ** g.shape[-1]
    scale = np.where(scale > 0, scale, 1.0)
    if np.any(np.abs(det) <= SINGULAR_RTOL * scale):
        raise SingularMetricError("metric is singular at some point")
    return np.linalg.inv(g)


def curvature_from_jets(g: np.ndarray, dg: np.ndarray, ddg: np.ndarray):
    """Christoffel symbols, Riemann (both index positions) and Ricci from jets.

    ``dg[..., c, a, b] = d_c g_ab`` and ``ddg[..., c, d, a, b] = d_c d_d g_ab``.
    """
    ginv = _inverse(g)
    # Gamma_dbc (first index lowered) = 1/2 (d_b g_dc + d_c g_bd - d_d g_bc)
    gam_low = 0.5 * (
        np.einsum("...bdc->...dbc", dg)
        + np.einsum("...cbd->...dbc", dg)
        - dg
    )
    gam = np.einsum("...ad,...dbc->...abc", ginv, gam_low)
    # d_e Gamma_dbc
    dgam_low = 0.5 * (
        np.einsum("...ebdc->...edbc", ddg)
        + np.einsum("...ecbd->...edbc", ddg)
        - ddg
    )
    # d_e g^ad = -g^am (d_e g_mn) g^nd
    dginv = -np.einsum("...am,...emn,...nd->...ead", ginv, dg, ginv)
    dgam = np.einsum("...ead,...dbc->...eabc", dginv, gam_low) + np.einsum(
        "...ad,...edbc->...eabc", ginv, dgam_low
    )
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    term = np.einsum("...cadb->...abcd", dgam)
    quad = np.einsum("...ace,...edb->...abcd", gam, gam)
    riem_up = term - np.swapaxes(term, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    riem = np.einsum("...ae,...ebcd->...abcd", g, riem_up)
    ricci = np.einsum("...abad->...bd", riem_up)
    return ginv, gam, riem_up, riem, ricci


# ---------------------------------------------------------------------------
# public operations


def metric_at(M: MetricSpec, p: Mapping[str, object], check: bool = True) -> np.ndarray:
    g, _, _ = _jets(M, p, 0)
    if check:
        check_signature(g, M.signature)
    return g


def christoffel_at(M: MetricSpec, p: Mapping[str, object]) -> np.ndarray:
    """``Gamma[..., a, b, c] = Gamma^a_bc``."""
    g, dg, _ = _jets(M, p, 1)
    ginv = _inverse(g)
    gam_low = 0.5 * (
        np.einsum("...bdc->...dbc", dg) + np.einsum("...cbd->...dbc", dg) - dg
    )
    return np.einsum("...ad,...dbc->...abc", ginv, gam_low)


def geometry_at(M: MetricSpec, p: Mapping[str, object], check: bool = False) -> PointFrameData:
    g, dg, ddg = _jets(M, p, 2)
    if check:
        check_signature(g, M.signature)
    ginv, gam, riem_up, riem, ricci = curvature_from_jets(g, dg, ddg)
    return PointFrameData(p, g, ginv, gam, riem_up, riem, ricci)


def riemann_at(M: MetricSpec, p: Mapping[str, object]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(R^a_bcd, R_abcd)``."""
    data = geometry_at(M, p)
    return data.riemann_up, data.riemann


def ricci_at(M: MetricSpec, p: Mapping[str, object]) -> np.ndarray:
    return geometry_at(M, p).ricci


def _shifted(p: Mapping[str, object], name: str, delta: float) -> dict:
    q = dict(p)
    q[name] = np.asarray(p[name], dtype=float) + delta
    return q


def fd_jets(M: MetricSpec, p: Mapping[str, object], step: float):
    """Metric jets from central differences of metric values only."""
    if not step > 0:
        raise ValueError("step must be positive")
    names = M.chart.names
    n = M.dim
    h = step

    def gval(q):
        return _jets(M, q, 0)[0]

    g0 = gval(p)
    shape = g0.shape[:-2]
    plus = [gval(_shifted(p, nm, h)) for nm in names]
    minus = [gval(_shifted(p, nm, -h)) for nm in names]
    dg = np.empty(shape + (n, n, n))
    ddg = np.empty(shape + (n, n, n, n))
    for c in range(n):
        dg[..., c, :, :] = (plus[c] - minus[c]) / (2 * h)
        ddg[..., c, c, :, :] = (plus[c] - 2 * g0 + minus[c]) / (h * h)
        for d in range(c + 1, n):
            pp = gval(_shifted(_shifted(p, names[c], h), names[d], h))
            pm = gval(_shifted(_shifted(p, names[c], h), names[d], -h))
            mp = gval(_shifted(_shifted(p, names[c], -h), names[d], h))
            mm = gval(_shifted(_shifted(p, names[c], -h), names[d], -h))
            v = (pp - pm - mp + mm) / (4 * h * h)
            ddg[..., c, d, :, :] = v
            ddg[..., d, c, :, :] = v
    return g0, dg, ddg


def fd_geometry_at(M: MetricSpec, p: Mapping[str, object], step: float = 1e-4) -> PointFrameData:
    g, dg, ddg = fd_jets(M, p, step)
    ginv, gam, riem_up, riem, ricci = curvature_from_jets(g, dg, ddg)
    return PointFrameData(p, g, ginv, gam, riem_up, riem, ricci)


def fd_ricci_at(M: MetricSpec, p: Mapping[str, object], step: float = 1e-4) -> np.ndarray:
    return fd_geometry_at(M, p, step).ricci


def raise_index(ginv: np.ndarray, covector: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,...b->...a", ginv, covector)


def lower_index(g: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,...b->...a", g, vector)


def inner(g: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,...a,...b->...", g, u, v)
