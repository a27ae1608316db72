"""Embedded null hypersurfaces at the level of the spacetime metric ``g``.

A hypersurface is given by an embedding of a periodic 3D chart into the
spacetime chart. One surface coordinate is declared the generator coordinate;
its coordinate field pushes forward to the null normal ``Z``. Quantities here
are all evaluated with ``g`` itself (no lambda deformation).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .chartgeom import (
    Chart,
    MetricSpec,
    PointFrameData,
    curvature_from_jets,
    _jets,
    inner,
)
from .expr import Expression, as_expression, differentiate, evaluate_many

NULL_TOL = 1e-9


class NullSurfaceError(Exception):
    pass


class NotNullError(NullSurfaceError):
    code = "NOT_NULL"


class GeneratorMismatchError(NullSurfaceError):
    code = "GENERATOR_MISMATCH"


class FrameError(NullSurfaceError):
    pass


class TransportError(NullSurfaceError):
    pass


@dataclass(frozen=True, eq=False)
class Embedding:
    """Spacetime coordinates as expressions of the surface coordinates."""

    chart: Chart
    coords: tuple[Expression, ...]
    generator: str

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(as_expression(c) for c in self.coords))
        if self.chart.dim != 3:
            raise ValueError("hypersurface chart must be three-dimensional")
        if self.generator not in self.chart.names:
            raise ValueError(f"generator {self.generator!r} is not a surface coordinate")

    @property
    def generator_index(self) -> int:
        return self.chart.index(self.generator)

    @cached_property
    def jacobian(self) -> tuple[tuple[Expression, ...], ...]:
        """``jacobian[a][i] = d x^a / d s^i``."""
        return tuple(
            tuple(differentiate(c, s) for s in self.chart.names) for c in self.coords
        )

    @cached_property
    def hessian(self) -> tuple:
        """``hessian[a][i][j] = d^2 x^a / d s^i d s^j``."""
        names = self.chart.names
        return tuple(
            tuple(tuple(differentiate(row[i], names[j]) for j in range(3)) for i in range(3))
            for row in self.jacobian
        )


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    metric: MetricSpec
    embedding: Embedding | None = None
    timelike: tuple[Expression, ...] | None = None
    doc: str = ""
    expected: str | None = None

    def __post_init__(self):
        if self.timelike is not None:
            object.__setattr__(
                self, "timelike", tuple(as_expression(c) for c in self.timelike)
            )

    def require_surface(self) -> Embedding:
        if self.embedding is None or self.timelike is None:
            raise NullSurfaceError(f"scenario {self.name!r} has no hypersurface")
        return self.embedding


# ---------------------------------------------------------------------------
# grids and pointwise surface data


def surface_grid(chart: Chart, n: int, offset: float = 0.0) -> dict[str, np.ndarray]:
    """Flattened tensor grid over the fundamental domain.

    ``offset=0.5`` gives cell centres (midpoint rule).
    """
    if not chart.periodic:
        raise NullSurfaceError("grids need a fully periodic surface chart")
    axes = [(np.arange(n) + offset) * (p / n) for p in chart.periods]
    mesh = np.meshgrid(*axes, indexing="ij")
    return {nm: m.ravel() for nm, m in zip(chart.names, mesh)}


def random_surface_points(chart: Chart, count: int, rng: np.random.Generator) -> dict:
    if not chart.periodic:
        raise NullSurfaceError("random sampling needs a fully periodic surface chart")
    return {nm: rng.uniform(0.0, p, size=count) for nm, p in zip(chart.names, chart.periods)}


def _stack(values, shape, dims) -> np.ndarray:
    out = np.empty(shape + dims)
    for idx in np.ndindex(*dims):
        out[(...,) + idx] = values[int(np.ravel_multi_index(idx, dims))]
    return out


@dataclass
class SurfacePoints:
    """Embedding data at a batch of surface points."""

    surface: dict
    spacetime: dict
    x: np.ndarray  # (..., 4)
    E: np.ndarray  # (..., 4, 3)
    hess: np.ndarray  # (..., 4, 3, 3)


def surface_points(emb: Embedding, space_names: Sequence[str], pts: Mapping[str, object]) -> SurfacePoints:
    exprs = list(emb.coords)
    exprs += [e for row in emb.jacobian for e in row]
    exprs += [e for row in emb.hessian for mid in row for e in mid]
    vals = evaluate_many(exprs, pts)
    shape = np.broadcast_shapes(*(np.shape(v) for v in vals), *(np.shape(v) for v in pts.values()))
    x = _stack(vals[:4], shape, (4,))
    E = _stack(vals[4:16], shape, (4, 3))
    hess = _stack(vals[16:], shape, (4, 3, 3))
    spacetime = dict(pts)
    for nm, k in zip(space_names, range(4)):
        spacetime[nm] = x[..., k]
    return SurfacePoints(dict(pts), spacetime, x, E, hess)


def vector_field_at(components: Sequence[Expression], binding: Mapping[str, object], shape) -> np.ndarray:
    vals = evaluate_many(components, binding)
    return _stack([np.broadcast_to(v, shape) for v in vals], shape, (len(components),))


def _geometry(M: MetricSpec, binding: Mapping[str, object], order: int = 2) -> PointFrameData:
    g, dg, ddg = _jets(M, binding, order)
    if order == 2:
        ginv, gam, riem_up, riem, ricci = curvature_from_jets(g, dg, ddg)
        return PointFrameData(binding, g, ginv, gam, riem_up, riem, ricci)
    ginv = np.linalg.inv(g)
    gam_low = 0.5 * (
        np.einsum("...bdc->...dbc", dg) + np.einsum("...cbd->...dbc", dg) - dg
    )
    gam = np.einsum("...ad,...dbc->...abc", ginv, gam_low)
    return PointFrameData(binding, g, ginv, gam, None, None, None)


# ---------------------------------------------------------------------------
# frames


@dataclass
class NullFrame:
    """Adapted frame on H at a batch of points.

    ``xi`` holds the surface-coordinate components of (X, Y, Z) as columns, so
    the 4-vectors are ``E @ xi``.
    """

    points: SurfacePoints
    geom: PointFrameData
    T: np.ndarray
    Z: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    xi: np.ndarray
    f: np.ndarray
    geodesic_defect: np.ndarray

    @property
    def E(self) -> np.ndarray:
        return self.points.E


def _plane_basis(q: np.ndarray, t_dot: np.ndarray, gen: int):
    """Surface components of a g-orthonormal basis of TH intersected with T-perp.

    ``q`` is the induced metric on the surface basis, ``t_dot[..., i] = g(T, E_i)``.
    Coordinate directions other than the generator are projected along the
    generator so that they are orthogonal to T, then Gram-Schmidt in ``q``.
    """
    shape = q.shape[:-2]
    seeds = [i for i in range(3) if i != gen] + [gen]
    basis = []
    for i in seeds:
        v = np.zeros(shape + (3,))
        v[..., i] = 1.0
        v[..., gen] -= t_dot[..., i] / t_dot[..., gen]
        for b in basis:
            v = v - np.einsum("...ij,...i,...j->...", q, v, b)[..., None] * b
        nrm2 = np.einsum("...ij,...i,...j->...", q, v, v)
        if np.any(nrm2 <= NULL_TOL):
            continue
        basis.append(v / np.sqrt(nrm2)[..., None])
        if len(basis) == 2:
            break
    if len(basis) < 2:
        raise FrameError("could not build an orthonormal basis of the transverse plane")
    return basis


def frame_at(
    scenario: Scenario,
    pts: Mapping[str, object],
    z_scale: float = 1.0,
    order: int = 2,
) -> NullFrame:
    emb = scenario.require_surface()
    sp = surface_points(emb, scenario.metric.chart.names, pts)
    geom = _geometry(scenario.metric, sp.spacetime, order)
    shape = sp.x.shape[:-1]
    T = vector_field_at(scenario.timelike, sp.spacetime, shape)
    gen = emb.generator_index
    E = sp.E
    g = geom.metric
    q = np.einsum("...ab,...ai,...bj->...ij", g, E, E)
    t_dot = np.einsum("...ab,...a,...bi->...i", g, T, E)
    if np.any(np.abs(t_dot[..., gen]) < NULL_TOL):
        raise FrameError("generator is orthogonal to T; T is not transverse to H")
    bx, by = _plane_basis(q, t_dot, gen)
    bz = np.zeros(shape + (3,))
    bz[..., gen] = z_scale
    xi = np.stack([bx, by, bz], axis=-1)
    X = np.einsum("...ai,...i->...a", E, bx)
    Y = np.einsum("...ai,...i->...a", E, by)
    Z = z_scale * E[..., :, gen]
    # nabla_Z Z for the pushed-forward generator field
    acc = z_scale**2 * (
        sp.hess[..., :, gen, gen] + np.einsum("...abc,...b,...c->...a", geom.christoffel, E[..., :, gen], E[..., :, gen])
    )
    f = inner(g, acc, T) / inner(g, Z, T)
    defect = acc - f[..., None] * Z
    return NullFrame(sp, geom, T, Z, X, Y, xi, f, defect)


def covariant_tangent_derivative(frame: NullFrame) -> np.ndarray:
    """``out[..., a, i] = (nabla_{E_i} Z)^a`` with Z the frame's generator field."""
    sp = frame.points
    gen = frame.xi[..., :, 2]  # surface components of Z
    dZ = np.einsum("...aij,...j->...ai", sp.hess, gen)
    return dZ + np.einsum("...abc,...bi,...c->...ai", frame.geom.christoffel, sp.E, frame.Z)


def b_surface(frame: NullFrame) -> np.ndarray:
    """``B(E_i, E_j) = g(nabla_{E_i} Z, E_j)`` on the surface coordinate basis."""
    dZ = covariant_tangent_derivative(frame)
    return np.einsum("...ab,...ai,...bj->...ij", frame.geom.metric, dZ, frame.E)


# ---------------------------------------------------------------------------
# operations


@dataclass
class NullnessReport:
    max_abs_det: float
    max_kernel_misalignment: float
    kernel: np.ndarray  # (..., 3) unit kernel directions in surface components
    kernel_dim: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.kernel_dim == 1) and self.max_kernel_misalignment < 1e-6)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_abs_det": self.max_abs_det,
            "max_kernel_misalignment": self.max_kernel_misalignment,
        }


def induced_metric(scenario: Scenario, pts: Mapping[str, object]) -> np.ndarray:
    emb = scenario.require_surface()
    sp = surface_points(emb, scenario.metric.chart.names, pts)
    g, _, _ = _jets(scenario.metric, sp.spacetime, 0)
    return np.einsum("...ab,...ai,...bj->...ij", g, sp.E, sp.E)


def nullness_check(scenario: Scenario, grid: int = 8, raise_on_fail: bool = True) -> NullnessReport:
    """Verify the induced metric has a one-dimensional kernel along the generator."""
    emb = scenario.require_surface()
    pts = surface_grid(emb.chart, grid)
    sp = surface_points(emb, scenario.metric.chart.names, pts)
    if np.any(np.linalg.matrix_rank(sp.E) < 3):
        raise NullSurfaceError("embedding is not an immersion at some grid point")
    g, _, _ = _jets(scenario.metric, sp.spacetime, 0)
    q = np.einsum("...ab,...ai,...bj->...ij", g, sp.E, sp.E)
    eig, vec = np.linalg.eigh(q)
    scale = np.maximum(np.max(np.abs(eig), axis=-1), 1.0)
    small = np.abs(eig) <= NULL_TOL * scale[..., None]
    kernel_dim = np.sum(small, axis=-1)
    idx = np.argmin(np.abs(eig), axis=-1)
    kernel = np.take_along_axis(vec, idx[..., None, None], axis=-1)[..., 0]
    gen = emb.generator_index
    misalign = 1.0 - np.abs(kernel[..., gen])
    report = NullnessReport(
        max_abs_det=float(np.max(np.abs(np.linalg.det(q)))),
        max_kernel_misalignment=float(np.max(misalign)),
        kernel=kernel,
        kernel_dim=kernel_dim,
    )
    if raise_on_fail:
        if np.any(kernel_dim != 1):
            bad = int(np.argmax(kernel_dim != 1))
            raise NotNullError(
                f"induced metric has kernel dimension {int(kernel_dim[bad])} "
                f"at grid point {bad}"
            )
        if report.max_kernel_misalignment >= 1e-6:
            raise GeneratorMismatchError(
                f"kernel is not along generator {emb.generator!r} "
                f"(misalignment {report.max_kernel_misalignment:.3g})"
            )
    return report


def expansion_at(scenario: Scenario, pts: Mapping[str, object], z_scale: float = 1.0) -> np.ndarray:
    """``theta = g(nabla_X Z, X) + g(nabla_Y Z, Y)``."""
    B = b_tensor_at(scenario, pts, z_scale)
    return B[..., 0, 0] + B[..., 1, 1]


def b_tensor_at(scenario: Scenario, pts: Mapping[str, object], z_scale: float = 1.0) -> np.ndarray:
    """B on the frame basis (X, Y, Z) as a 3x3 matrix per point."""
    frame = frame_at(scenario, pts, z_scale, order=1)
    Bs = b_surface(frame)
    return np.einsum("...ij,...ia,...jb->...ab", Bs, frame.xi, frame.xi)


# ---------------------------------------------------------------------------
# generators, transport and evolution equations


@dataclass(frozen=True)
class GeneratorCurve:
    start: Mapping[str, float]
    length: float
    steps: int

    @property
    def h(self) -> float:
        return self.length / self.steps

    def parameters(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.h


def generator_curves(scenario: Scenario, count: int = 8, steps_per_period: int = 400, periods: float = 1.0):
    """``count`` generators, starting on a deterministic transverse lattice."""
    emb = scenario.require_surface()
    gen = emb.generator_index
    P = emb.chart.periods[gen]
    others = [i for i in range(3) if i != gen]
    side = int(np.ceil(np.sqrt(count)))
    curves = []
    for k in range(count):
        a, b = divmod(k, side)
        start = {emb.generator: 0.0}
        i, j = others
        start[emb.chart.names[i]] = (a + 0.25) * emb.chart.periods[i] / side
        start[emb.chart.names[j]] = (b + 0.25) * emb.chart.periods[j] / side
        curves.append(GeneratorCurve(start, periods * P, int(round(steps_per_period * periods))))
    return curves


def _curve_points(scenario: Scenario, curve: GeneratorCurve, half: bool) -> dict:
    emb = scenario.embedding
    n = 2 * curve.steps + 1 if half else curve.steps + 1
    step = curve.h / 2 if half else curve.h
    s = curve.start[emb.generator] + np.arange(n) * step
    pts = {nm: np.full(n, float(curve.start[nm])) for nm in emb.chart.names}
    pts[emb.generator] = s
    return pts


@dataclass
class CurveData:
    curve: GeneratorCurve
    s: np.ndarray
    frames: NullFrame  # on the half-step lattice
    transported: np.ndarray  # (steps+1, m, 4)
    phi: np.ndarray  # (steps+1,) affine rescaling exp(-int f)


def _rk4_transport(frames: NullFrame, v0: np.ndarray, curve: GeneratorCurve):
    """Integrate nabla_Z V = 0 and phi' = -f phi on the half-step lattice."""
    gam = frames.geom.christoffel
    Z = frames.Z
    f = frames.f
    h = curve.h

    def rhs(j, V, phi):
        dV = -np.einsum("abc,b,mc->ma", gam[j], Z[j], V)
        return dV, -f[j] * phi

    out = np.empty((curve.steps + 1,) + v0.shape)
    phis = np.empty(curve.steps + 1)
    V = v0.astype(float).copy()
    phi = 1.0
    out[0], phis[0] = V, phi
    for k in range(curve.steps):
        j = 2 * k
        k1v, k1p = rhs(j, V, phi)
        k2v, k2p = rhs(j + 1, V + 0.5 * h * k1v, phi + 0.5 * h * k1p)
        k3v, k3p = rhs(j + 1, V + 0.5 * h * k2v, phi + 0.5 * h * k2p)
        k4v, k4p = rhs(j + 2, V + h * k3v, phi + h * k3p)
        V = V + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        phi = phi + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        out[k + 1], phis[k + 1] = V, phi
    return out, phis


def _integrate_curve(scenario: Scenario, curve: GeneratorCurve, vectors: np.ndarray, norm_tol: float = 1e-8) -> CurveData:
    pts = _curve_points(scenario, curve, half=True)
    frames = frame_at(scenario, pts, order=2)
    vecs, phi = _rk4_transport(frames, np.atleast_2d(vectors), curve)
    g = frames.geom.metric[::2]
    gram = np.einsum("kab,kma,knb->kmn", g, vecs, vecs)
    drift = np.max(np.abs(gram - gram[0]))
    if drift > norm_tol * max(curve.length, 1.0) * max(1.0, np.max(np.abs(gram[0]))):
        raise TransportError(
            f"parallel transport changed inner products by {drift:.3g}; reduce the step"
        )
    return CurveData(curve, curve.parameters() + curve.start[scenario.embedding.generator], frames, vecs, phi)


def transport(scenario: Scenario, v: Sequence[float], curve: GeneratorCurve) -> np.ndarray:
    """Parallel transport ``v`` (4-vector at the curve start) along the generator.

    Returns the transported components at each of the ``steps + 1`` samples.
    """
    data = _integrate_curve(scenario, curve, np.asarray(v, dtype=float)[None, :])
    return data.transported[:, 0, :]


def _sub(frames: NullFrame, sl) -> NullFrame:
    sp = frames.points
    points = SurfacePoints(
        {k: v[sl] for k, v in sp.surface.items()},
        {k: np.asarray(v)[sl] for k, v in sp.spacetime.items()},
        sp.x[sl], sp.E[sl], sp.hess[sl],
    )
    geom = frames.geom
    geom = PointFrameData(
        points.spacetime, geom.metric[sl], geom.inverse[sl], geom.christoffel[sl],
        geom.riemann_up[sl], geom.riemann[sl], geom.ricci[sl],
    )
    return NullFrame(
        points, geom, frames.T[sl], frames.Z[sl], frames.X[sl], frames.Y[sl],
        frames.xi[sl], frames.f[sl], frames.geodesic_defect[sl],
    )


def _b_on(frame: NullFrame, F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """B(F, G) for 4-vectors F, G tangent to H (batched over samples)."""
    Bs = b_surface(frame)
    pinv = np.linalg.pinv(frame.E)
    fF = np.einsum("kia,ka->ki", pinv, F)
    fG = np.einsum("kia,ka->ki", pinv, G)
    return np.einsum("kij,ki,kj->k", Bs, fF, fG)


def _centered(values: np.ndarray, phi: np.ndarray, h: float) -> np.ndarray:
    """d/d(affine) of phi*values at interior samples, with phi renormalised to 1
    at each sample (the affine field through that point agreeing with Z there)."""
    rp = phi[2:] / phi[1:-1]
    rm = phi[:-2] / phi[1:-1]
    return (rp * values[2:] - rm * values[:-2]) / (2 * h)


@dataclass
class ResidualTrace:
    s: np.ndarray
    theta: np.ndarray
    dtheta_ds: np.ndarray
    residual: np.ndarray
    curvature_term: np.ndarray | None = None

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))


def _evolution(scenario: Scenario, curve: GeneratorCurve, F=None, G=None):
    scenario.require_surface()
    start = {k: np.asarray([v], dtype=float) for k, v in curve.start.items()}
    f0 = frame_at(scenario, start, order=1)
    vecs = [f0.X[0], f0.Y[0]]
    if F is not None:
        Fs = np.asarray(F, dtype=float)
        Gs = np.asarray(G, dtype=float)
        vecs += [f0.E[0] @ Fs, f0.E[0] @ Gs]
    data = _integrate_curve(scenario, curve, np.array(vecs))
    samples = _sub(data.frames, slice(None, None, 2))
    V = data.transported
    X, Y = V[:, 0], V[:, 1]
    bxx = _b_on(samples, X, X)
    byy = _b_on(samples, Y, Y)
    bxy = _b_on(samples, X, Y)
    return data, samples, V, (bxx, byy, bxy)


def raychaudhuri_residual(scenario: Scenario, curve: GeneratorCurve) -> ResidualTrace:
    """Residual of d theta/d s + B(X,X)^2 + B(Y,Y)^2 + 2 B(X,Y)^2 + r(Z,Z) along
    the affinely reparametrised generator."""
    data, samples, V, (bxx, byy, bxy) = _evolution(scenario, curve)
    theta = bxx + byy
    rzz = np.einsum("kab,ka,kb->k", samples.geom.ricci, samples.Z, samples.Z)
    dtheta = _centered(theta, data.phi, curve.h)
    inner_ = slice(1, -1)
    res = dtheta + bxx[inner_] ** 2 + byy[inner_] ** 2 + 2 * bxy[inner_] ** 2 + rzz[inner_]
    return ResidualTrace(data.s[inner_], theta[inner_], dtheta, res)


def b_evolution_residual(scenario: Scenario, curve: GeneratorCurve, F: Sequence[float], G: Sequence[float]) -> ResidualTrace:
    """Residual of the evolution of B(F, G) for F, G tangent (surface components)
    at the curve start, parallelly transported along it."""
    data, samples, V, (bxx, byy, bxy) = _evolution(scenario, curve, F, G)
    X, Y, Fv, Gv = V[:, 0], V[:, 1], V[:, 2], V[:, 3]
    bfg = _b_on(samples, Fv, Gv)
    bfx = _b_on(samples, Fv, X)
    bgx = _b_on(samples, Gv, X)
    bfy = _b_on(samples, Fv, Y)
    bgy = _b_on(samples, Gv, Y)
    Z = samples.Z
    # g(R(Z, F)Z, G) = R_abcd G^a Z^b Z^c F^d
    curv = np.einsum("kabcd,ka,kb,kc,kd->k", samples.geom.riemann, Gv, Z, Z, Fv)
    d = _centered(bfg, data.phi, curve.h)
    i = slice(1, -1)
    res = d + bfx[i] * bgx[i] + bfy[i] * bgy[i] - curv[i]
    theta = bxx + byy
    return ResidualTrace(data.s[i], theta[i], _centered(theta, data.phi, curve.h), res, curv[i])
