"""The deformed family g_lam = g + lam g(T, .) g(T, .) and its restriction to H.

For lam > 0 the hypersurface is spacelike for g_lam, so the pulled-back
metric h_lam is Riemannian. This module builds both families symbolically,
computes the normal decomposition and second fundamental form of H in
g_lam, evaluates the Ricci tensor of h_lam along two independent routes
(the Gauss equation and direct intrinsic curvature), and measures volume and
diameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .chartgeom import (
    LORENTZIAN,
    RIEMANNIAN,
    MetricSpec,
    _inverse,
    _jets,
    check_signature,
    curvature_from_jets,
    inner,
)
from .expr import (
    Const,
    Expression,
    Var,
    add,
    as_expression,
    div,
    evaluate_many,
    func,
    mul,
    neg,
    simplify,
    substitute,
)
from .nullsurf import (
    NullFrame,
    Scenario,
    frame_at,
    surface_grid,
    surface_points,
    vector_field_at,
)

LAM = "lam"


class CollapseError(Exception):
    pass


class NotTimelikeError(CollapseError):
    code = "NOT_TIMELIKE"


# ---------------------------------------------------------------------------
# timelike field and the family


@dataclass(frozen=True, eq=False)
class TimelikeField:
    components: tuple[Expression, ...]
    normalized: bool
    rescaled: bool


def _lowered(M: MetricSpec, vec: Sequence[Expression]) -> list[Expression]:
    n = M.dim
    out = []
    for a in range(n):
        acc: Expression = Const(0)
        for b in range(n):
            acc = add(acc, mul(M.components[a][b], vec[b]))
        out.append(acc)
    return out


def _norm2(M: MetricSpec, vec: Sequence[Expression]) -> Expression:
    low = _lowered(M, vec)
    acc: Expression = Const(0)
    for a in range(M.dim):
        acc = add(acc, mul(low[a], vec[a]))
    return acc


def normalize_timelike(
    g: MetricSpec,
    components: Sequence[object],
    sample: Mapping[str, object],
    tol: float = 1e-12,
) -> TimelikeField:
    """Return ``T / sqrt(-g(T, T))``; left untouched if already unit on ``sample``."""
    comps = tuple(simplify(as_expression(c)) for c in components)
    nrm = _norm2(g, comps)
    (val,) = evaluate_many([nrm], sample)
    val = np.broadcast_to(val, np.broadcast_shapes(np.shape(val), *(np.shape(v) for v in sample.values())))
    if np.any(val >= 0):
        bad = int(np.argmax(np.ravel(val >= 0)))
        where = {k: float(np.ravel(np.broadcast_to(v, val.shape))[bad]) for k, v in sample.items()}
        raise NotTimelikeError(f"g(T, T) = {np.ravel(val)[bad]:.3g} >= 0 at {where}")
    if np.max(np.abs(val + 1.0)) <= tol:
        return TimelikeField(comps, True, False)
    scale = func("sqrt", neg(nrm))
    return TimelikeField(tuple(div(c, scale) for c in comps), True, True)


@dataclass(frozen=True, eq=False)
class LambdaFamily:
    g: MetricSpec
    T: TimelikeField
    g_lam: MetricSpec
    h_lam: MetricSpec
    scenario: Scenario


def deformed_metric(g: MetricSpec, T: Sequence[Expression], lam: Expression = Var(LAM)) -> MetricSpec:
    """Components g_ab + lam (gT)_a (gT)_b."""
    gT = _lowered(g, T)
    n = g.dim
    rows = tuple(
        tuple(add(g.components[a][b], mul(lam, mul(gT[a], gT[b]))) for b in range(n))
        for a in range(n)
    )
    return MetricSpec(g.chart, rows, LORENTZIAN)


def build_family(scenario: Scenario, T: TimelikeField | None = None) -> LambdaFamily:
    emb = scenario.require_surface()
    g = scenario.metric
    if T is None:
        T = normalize_timelike(g, scenario.timelike, timelike_sample(scenario))
    g_lam = deformed_metric(g, T.components)
    on_h = dict(zip(g.chart.names, emb.coords))
    pulled = [[substitute(g_lam.components[a][b], on_h) for b in range(4)] for a in range(4)]
    J = emb.jacobian
    rows = []
    for i in range(3):
        row = []
        for j in range(3):
            acc: Expression = Const(0)
            for a in range(4):
                for b in range(4):
                    acc = add(acc, mul(pulled[a][b], mul(J[a][i], J[b][j])))
            row.append(acc)
        rows.append(tuple(row))
    h_lam = MetricSpec(emb.chart, tuple(rows), RIEMANNIAN)
    return LambdaFamily(g, T, g_lam, h_lam, scenario)


def timelike_sample(scenario: Scenario, grid: int = 6, thickness: float = 0.1) -> dict:
    """Points on H and on copies displaced transversally along T, up to ``thickness``."""
    emb = scenario.require_surface()
    pts = surface_grid(emb.chart, grid)
    sp = surface_points(emb, scenario.metric.chart.names, pts)
    T = vector_field_at(scenario.timelike, sp.spacetime, sp.x.shape[:-1])
    out = {nm: [] for nm in scenario.metric.chart.names}
    for eps in (-thickness, 0.0, thickness):
        for k, nm in enumerate(scenario.metric.chart.names):
            out[nm].append(sp.x[..., k] + eps * T[..., k])
    return {nm: np.concatenate(v) for nm, v in out.items()}


# ---------------------------------------------------------------------------
# pointwise lam > 0 machinery


@dataclass
class NormalData:
    z: np.ndarray
    u: np.ndarray
    U: np.ndarray
    D: np.ndarray
    U_hat: np.ndarray
    Z_hat: np.ndarray


@dataclass
class KFrame:
    """h_lam-orthonormal frame (X, Y, Z_hat) with k_lam in that frame."""

    lam: float
    frame: NullFrame
    normal: NormalData
    basis: np.ndarray  # surface components of (X, Y, Z_hat) as columns
    k: np.ndarray
    g_lam: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray | None = None
    ricci: np.ndarray | None = None

    @property
    def vectors(self) -> np.ndarray:
        """4-vector frame, ``[..., a, A]``."""
        return np.einsum("...ai,...iA->...aA", self.frame.E, self.basis)


def _with_lam(binding: Mapping[str, object], lam: float) -> dict:
    b = dict(binding)
    b[LAM] = float(lam)
    return b


def _conormal(E: np.ndarray) -> np.ndarray:
    """Covector annihilating the three tangent columns of ``E`` (unit Euclidean)."""
    u, _, _ = np.linalg.svd(E)
    return u[..., :, 3]


def _normal(frame: NullFrame, glam: np.ndarray, ginv: np.ndarray, lam: float, T: np.ndarray) -> NormalData:
    Z = frame.Z
    nu = _conormal(frame.E)
    N = np.einsum("...ab,...b->...a", ginv, nu)
    zt = inner(glam, Z, T)
    nt = np.einsum("...a,...a->...", nu, T)
    if np.any(np.abs(nt) < 1e-14):
        raise CollapseError("degenerate normal: T is tangent to H")
    U = N * (zt / nt)[..., None]
    z = inner(glam, Z, Z)
    if np.any(z <= 0):
        raise CollapseError("g_lam(Z, Z) <= 0: H is not spacelike for this lam")
    u = -inner(glam, U, U)
    if np.any(u <= 0):
        raise CollapseError("degenerate normal: U is not timelike")
    D = (U - Z) / z[..., None]
    return NormalData(z, u, U, D, U / np.sqrt(u)[..., None], Z / np.sqrt(z)[..., None])


def _lam_geometry(family: LambdaFamily, frame: NullFrame, lam: float, order: int):
    b = _with_lam(frame.points.spacetime, lam)
    g, dg, ddg = _jets(family.g_lam, b, order)
    if order == 2:
        ginv, gam, _, riem, ricci = curvature_from_jets(g, dg, ddg)
        return g, ginv, gam, riem, ricci
    ginv = _inverse(g)
    gam_low = 0.5 * (np.einsum("...bdc->...dbc", dg) + np.einsum("...cbd->...dbc", dg) - dg)
    return g, ginv, np.einsum("...ad,...dbc->...abc", ginv, gam_low), None, None


def _timelike_at(family: LambdaFamily, frame: NullFrame) -> np.ndarray:
    return vector_field_at(family.T.components, frame.points.spacetime, frame.Z.shape[:-1])


def normal_decomposition(family: LambdaFamily, lam: float, pts: Mapping[str, object]) -> NormalData:
    if not lam > 0:
        raise CollapseError("normal decomposition needs lam > 0")
    frame = frame_at(family.scenario, pts, order=1)
    glam, ginv, _, _, _ = _lam_geometry(family, frame, lam, 1)
    return _normal(frame, glam, ginv, lam, _timelike_at(family, frame))


def second_fundamental_form(
    family: LambdaFamily,
    lam: float,
    pts: Mapping[str, object],
    curvature: bool = False,
    frame: NullFrame | None = None,
) -> KFrame:
    """k(A, B) = g_lam(nabla^lam_A B, U_hat) in the frame (X, Y, Z_hat)."""
    if not lam > 0:
        raise CollapseError("second fundamental form needs lam > 0")
    if frame is None:
        frame = frame_at(family.scenario, pts, order=1)
    glam, ginv, gam, riem, ricci = _lam_geometry(family, frame, lam, 2 if curvature else 1)
    T = _timelike_at(family, frame)
    nd = _normal(frame, glam, ginv, lam, T)
    E, hess = frame.points.E, frame.points.hess
    acc = hess + np.einsum("...abc,...bi,...cj->...aij", gam, E, E)
    n_low = np.einsum("...ab,...b->...a", glam, nd.U_hat)
    k_surf = np.einsum("...a,...aij->...ij", n_low, acc)
    basis = frame.xi.copy()
    basis[..., :, 2] = basis[..., :, 2] / np.sqrt(nd.z)[..., None]
    k = np.einsum("...ij,...iA,...jB->...AB", k_surf, basis, basis)
    return KFrame(lam, frame, nd, basis, k, glam, gam, riem, ricci)


def gauss_ricci(family: LambdaFamily, lam: float, pts: Mapping[str, object], kf: KFrame | None = None) -> np.ndarray:
    """Ricci of h_lam in the frame (X, Y, Z_hat) from the Gauss equation.

    p(A, B) = r(A, B) - (tr k) k(A, B) + (k.k)(A, B) + u^-1 g(R(U, A)B, U)
    with r, R those of g_lam. The ambient term is ``-u^-1 g(R(U, A)U, B)``.
    """
    if kf is None or kf.riemann is None:
        kf = second_fundamental_form(family, lam, pts, curvature=True)
    V = kf.vectors
    r = np.einsum("...ab,...aA,...bB->...AB", kf.ricci, V, V)
    k = kf.k
    trk = np.trace(k, axis1=-2, axis2=-1)
    kk = np.einsum("...AC,...CB->...AB", k, k)
    U = kf.normal.U
    # g(R(U, A)U, B) = R_abcd B^a U^b U^c A^d
    ruu = np.einsum("...abcd,...aB,...b,...c,...dA->...AB", kf.riemann, V, U, U, V)
    return r - trk[..., None, None] * k + kk - ruu / kf.normal.u[..., None, None]


def cancellation_identity(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the Z_hat Z_hat cancellation identity for k in (X, Y, Z_hat)."""
    trk = np.trace(k, axis1=-2, axis2=-1)
    kk = np.einsum("...AC,...CB->...AB", k, k)
    lhs = -trk * k[..., 2, 2] + kk[..., 2, 2]
    rhs = -(k[..., 0, 0] + k[..., 1, 1]) * k[..., 2, 2] + k[..., 0, 2] ** 2 + k[..., 1, 2] ** 2
    return lhs, rhs


def h_geometry(family: LambdaFamily, lam: float, pts: Mapping[str, object], order: int = 2):
    b = _with_lam(pts, lam)
    g, dg, ddg = _jets(family.h_lam, b, order)
    check_signature(g, RIEMANNIAN)
    if order < 2:
        return g, None
    _, _, _, _, ricci = curvature_from_jets(g, dg, ddg)
    return g, ricci


def intrinsic_ricci(
    family: LambdaFamily,
    lam: float,
    pts: Mapping[str, object],
    basis: np.ndarray | None = None,
) -> np.ndarray:
    """Ricci of the symbolic h_lam, expressed in the frame (X, Y, Z_hat)."""
    if not lam > 0:
        raise CollapseError("h_lam is degenerate at lam = 0")
    if basis is None:
        basis = second_fundamental_form(family, lam, pts).basis
    _, ric = h_geometry(family, lam, pts)
    return to_frame(ric, basis)


def to_frame(tensor: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...iA,...jB->...AB", tensor, basis, basis)


def tensor_norm(h: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    """Frame-independent norm of a symmetric 2-tensor (Frobenius in any h-orthonormal frame)."""
    mixed = np.einsum("...ab,...bc->...ac", np.linalg.inv(h), tensor)
    return np.sqrt(np.abs(np.einsum("...ab,...ba->...", mixed, mixed)))


def ricci_norm(family: LambdaFamily, lam: float, pts: Mapping[str, object]) -> np.ndarray:
    h, ric = h_geometry(family, lam, pts)
    return tensor_norm(h, ric)


# ---------------------------------------------------------------------------
# volume and diameter


def volume(family: LambdaFamily, lam: float, grid: int) -> float:
    chart = family.h_lam.chart
    if grid < 8:
        raise CollapseError("volume needs at least 8 cells per axis")
    pts = surface_grid(chart, grid, offset=0.5)
    h, _ = h_geometry(family, lam, pts, order=0)
    cell = np.prod([p / grid for p in chart.periods])
    return float(np.sum(np.sqrt(np.linalg.det(h))) * cell)


_OFFSETS = [
    o for o in np.ndindex(3, 3, 3) if o != (1, 1, 1)
]


def _edge_offsets() -> list[tuple[int, int, int]]:
    # one representative per +/- pair; the graph is undirected
    seen = set()
    out = []
    for o in _OFFSETS:
        d = tuple(int(c) - 1 for c in o)
        if tuple(-c for c in d) in seen:
            continue
        seen.add(d)
        out.append(d)
    return out


def diameter(family: LambdaFamily, lam: float, grid: int, sources: int = 8) -> float:
    """Grid-graph estimate of the h_lam diameter on the periodic chart.

    Vertices are grid nodes; edges join each node to its 26 neighbours with
    weight the h_lam length of the straight chart segment, metric taken at the
    segment midpoint. The result is the largest eccentricity over ``sources``
    evenly spaced source vertices.
    """
    chart = family.h_lam.chart
    if not chart.periodic:
        raise CollapseError("diameter needs a periodic surface chart")
    if grid < 8:
        raise CollapseError("diameter needs at least 8 nodes per axis")
    n = grid
    steps = np.array([p / n for p in chart.periods])
    idx = np.arange(n**3).reshape(n, n, n)
    nodes = surface_grid(chart, n)
    rows, cols, weights = [], [], []
    for d in _edge_offsets():
        delta = np.array(d) * steps
        mid = {nm: nodes[nm] + 0.5 * delta[k] for k, nm in enumerate(chart.names)}
        h, _ = h_geometry(family, lam, mid, order=0)
        w = np.sqrt(np.einsum("...ij,i,j->...", h, delta, delta))
        nbr = np.roll(idx, shift=tuple(-c for c in d), axis=(0, 1, 2)).ravel()
        rows.append(idx.ravel())
        cols.append(nbr)
        weights.append(w)
    A = coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n**3, n**3),
    ).tocsr()
    src = np.linspace(0, n**3 - 1, sources).round().astype(int)
    dist = dijkstra(A, directed=False, indices=src)
    return float(np.max(dist))
