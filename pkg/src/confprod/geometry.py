"""Charts, coordinate metrics and exact curvature.

Derivatives of metric entries are symbolic (expressions.differentiate); the
pointwise assembly into Christoffel symbols, Riemann and Ricci tensors is
plain dense linear algebra.  No finite differences anywhere in this path.

Index conventions, fixed here once:

    christoffel[k, i, j]      Gamma^k_ij = g^kl (d_i g_jl + d_j g_il - d_l g_ij) / 2
    riemann[a, b, c, d]       R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb
                                        + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
    ricci[b, d]               R^a_bad      (unit round spheres get positive Ricci)
    scalar                    g^bd ricci_bd
    normalized_scalar         scalar / (n (n - 1)), 0 for n = 1

The Laplacian follows the geometer's sign: lap(phi) = -trace_g(Hess phi),
so phi = |x|^2 / 2 on flat R^n has Hess = identity and lap(phi) = -n.

Everything is immutable; sampling and evaluation are pure, so checks over
sample points can run concurrently or vectorized (they are vectorized here).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import OutsideDomainError, SingularMetricError, UnsupportedDimError
from .expressions import Expr, compile_expr, differentiate, free_coords

_PD_EIGENVALUE_TOL = 1e-12


@dataclass(frozen=True)
class Chart:
    """Open coordinate box with a sampling stand-off from its boundary."""

    coords: tuple[str, ...]
    domain: tuple[tuple[float, float], ...]
    singular_margin: float = 0.1

    def __post_init__(self):
        if len(self.coords) != len(self.domain):
            raise UnsupportedDimError("coordinate and domain lists differ in length")
        if len(self.coords) != len(set(self.coords)):
            raise UnsupportedDimError("duplicate coordinate names")
        for lo, hi in self.domain:
            if not lo < hi:
                raise UnsupportedDimError(f"empty coordinate interval ({lo}, {hi})")
        if self.singular_margin < 0:
            raise UnsupportedDimError("negative singular margin")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def env(self, point: Sequence[float]) -> dict[str, float]:
        return dict(zip(self.coords, point))

    def contains(self, point: Sequence[float]) -> bool:
        return len(point) == self.dim and all(
            lo < x < hi for x, (lo, hi) in zip(point, self.domain)
        )

    def require_interior(self, point: Sequence[float]):
        if not self.contains(point):
            raise OutsideDomainError(
                f"point {tuple(point)} outside open box {self.domain}"
            )


@dataclass(frozen=True)
class MetricSpec:
    """Symmetric matrix of entry expressions over a chart."""

    chart: Chart
    entries: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        n = self.chart.dim
        if len(self.entries) != n or any(len(row) != n for row in self.entries):
            raise UnsupportedDimError("entry matrix does not match chart dimension")
        for i in range(n):
            for j in range(i + 1, n):
                if self.entries[i][j] != self.entries[j][i]:
                    raise UnsupportedDimError(f"entries ({i},{j}) and ({j},{i}) differ")
        names = set(self.chart.coords)
        for row in self.entries:
            for e in row:
                extra = free_coords(e) - names
                if extra:
                    raise UnsupportedDimError(
                        f"entry uses coordinates {sorted(extra)} not on the chart"
                    )

    @property
    def dim(self) -> int:
        return self.chart.dim


@dataclass(frozen=True)
class CurvatureData:
    point: tuple[float, ...]
    metric: np.ndarray
    inverse_metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    normalized_scalar: float


# --- cached compiled jets ---------------------------------------------------

class _ExprJets:
    """Compiled value / gradient / hessian evaluators for one expression."""

    def __init__(self, e: Expr, coords: tuple[str, ...]):
        self.coords = coords
        self.value_fn = compile_expr(e, coords)
        firsts = [differentiate(e, c) for c in coords]
        self.grad_fns = [compile_expr(d, coords) for d in firsts]
        self.hess_fns = {}
        for i, di in enumerate(firsts):
            for j in range(i, len(coords)):
                self.hess_fns[(i, j)] = compile_expr(differentiate(di, coords[j]), coords)

    def evaluate(self, points: np.ndarray):
        n = len(self.coords)
        count = points.shape[0]
        value = self.value_fn(points)
        grad = np.empty((count, n))
        hess = np.empty((count, n, n))
        for i in range(n):
            grad[:, i] = self.grad_fns[i](points)
        for (i, j), fn in self.hess_fns.items():
            hess[:, i, j] = hess[:, j, i] = fn(points)
        return value, grad, hess


@lru_cache(maxsize=512)
def _expr_jets(e: Expr, coords: tuple[str, ...]) -> _ExprJets:
    return _ExprJets(e, coords)


class _MetricJets:
    def __init__(self, metric: MetricSpec):
        coords = metric.chart.coords
        self.dim = metric.dim
        self.jets = {}
        for i in range(self.dim):
            for j in range(i, self.dim):
                self.jets[(i, j)] = _expr_jets(metric.entries[i][j], coords)

    def evaluate(self, points: np.ndarray):
        """Return (g, dg, d2g); dg[n,i,j,k] = d_k g_ij, d2g[n,i,j,k,l] = d_k d_l g_ij."""
        n = self.dim
        count = points.shape[0]
        g = np.empty((count, n, n))
        dg = np.empty((count, n, n, n))
        d2g = np.empty((count, n, n, n, n))
        for (i, j), jets in self.jets.items():
            value, grad, hess = jets.evaluate(points)
            g[:, i, j] = g[:, j, i] = value
            dg[:, i, j, :] = dg[:, j, i, :] = grad
            d2g[:, i, j, :, :] = d2g[:, j, i, :, :] = hess
        return g, dg, d2g


@lru_cache(maxsize=128)
def _metric_jets(metric: MetricSpec) -> _MetricJets:
    return _MetricJets(metric)


def _as_points(chart: Chart, points) -> np.ndarray:
    array = np.asarray(points, dtype=float)
    if array.ndim == 1:
        array = array[None, :]
    if array.shape[1] != chart.dim:
        raise OutsideDomainError(
            f"points have {array.shape[1]} coordinates, chart has {chart.dim}"
        )
    lo = np.array([d[0] for d in chart.domain])
    hi = np.array([d[1] for d in chart.domain])
    inside = (array > lo).all(axis=1) & (array < hi).all(axis=1)
    if not inside.all():
        bad = array[int(np.argmin(inside))]
        raise OutsideDomainError(f"point {tuple(bad)} outside open box {chart.domain}")
    return array


def _check_positive_definite(g: np.ndarray, points: np.ndarray):
    # symmetric eigenvalue test at sample time
    eigenvalues = np.linalg.eigvalsh(g)
    scale = np.maximum(1.0, np.abs(g).reshape(g.shape[0], -1).max(axis=1))
    bad = eigenvalues[:, 0] <= _PD_EIGENVALUE_TOL * scale
    if bad.any():
        where = int(np.argmax(bad))
        raise SingularMetricError(points[where], float(eigenvalues[where, 0]))


def metric_values(metric: MetricSpec, points, check: bool = True) -> np.ndarray:
    pts = _as_points(metric.chart, points)
    g, _, _ = _metric_jets(metric).evaluate(pts)
    if check:
        _check_positive_definite(g, pts)
    return g


# --- curvature --------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureBatch:
    points: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray     # [n, k, i, j]
    dgamma: np.ndarray    # [n, k, i, j, m] = d_m Gamma^k_ij
    riemann: np.ndarray   # [n, a, b, c, d]
    ricci: np.ndarray
    scalar: np.ndarray

    def normalized_scalar(self) -> np.ndarray:
        n = self.g.shape[1]
        if n < 2:
            return np.zeros_like(self.scalar)
        return self.scalar / (n * (n - 1))


def curvature_batch(metric: MetricSpec, points) -> CurvatureBatch:
    pts = _as_points(metric.chart, points)
    g, dg, d2g = _metric_jets(metric).evaluate(pts)
    _check_positive_definite(g, pts)
    ginv = np.linalg.inv(g)

    # W[n,l,i,j] = d_i g_jl + d_j g_il - d_l g_ij
    w = np.einsum("njli->nlij", dg) + np.einsum("nilj->nlij", dg) - np.einsum("nijl->nlij", dg)
    gamma = 0.5 * np.einsum("nal,nlij->naij", ginv, w)

    dginv = -np.einsum("nac,ncdm,ndb->nabm", ginv, dg, ginv)
    dw = (np.einsum("njlim->nlijm", d2g) + np.einsum("niljm->nlijm", d2g)
          - np.einsum("nijlm->nlijm", d2g))
    dgamma = 0.5 * (np.einsum("nalm,nlij->naijm", dginv, w)
                    + np.einsum("nal,nlijm->naijm", ginv, dw))

    riemann = (np.einsum("nadbc->nabcd", dgamma) - np.einsum("nacbd->nabcd", dgamma)
               + np.einsum("nace,nedb->nabcd", gamma, gamma)
               - np.einsum("nade,necb->nabcd", gamma, gamma))
    ricci = np.einsum("nabad->nbd", riemann)
    scalar = np.einsum("nbd,nbd->n", ginv, ricci)
    return CurvatureBatch(pts, g, ginv, gamma, dgamma, riemann, ricci, scalar)


def christoffel(metric: MetricSpec, point) -> np.ndarray:
    metric.chart.require_interior(point)
    return curvature_batch(metric, [point]).gamma[0]


def curvature(metric: MetricSpec, point) -> CurvatureData:
    metric.chart.require_interior(point)
    batch = curvature_batch(metric, [point])
    return CurvatureData(
        point=tuple(float(x) for x in point),
        metric=batch.g[0],
        inverse_metric=batch.ginv[0],
        christoffel=batch.gamma[0],
        riemann=batch.riemann[0],
        ricci=batch.ricci[0],
        scalar=float(batch.scalar[0]),
        normalized_scalar=float(batch.normalized_scalar()[0]),
    )


# --- scalar fields on a metric ----------------------------------------------

def expr_values(e: Expr, chart: Chart, points) -> np.ndarray:
    pts = _as_points(chart, points)
    return _expr_jets(e, chart.coords).value_fn(pts)


def coordinate_hessian_batch(e: Expr, chart: Chart, points) -> np.ndarray:
    """Plain second partials d_i d_j e, shape (count, dim, dim); no connection."""
    pts = _as_points(chart, points)
    _, _, hess = _expr_jets(e, chart.coords).evaluate(pts)
    return hess


def hessian_lc_batch(phi: Expr, metric: MetricSpec, points) -> np.ndarray:
    """Covariant hessian (nabla d phi)_ij = d_i d_j phi - Gamma^k_ij d_k phi."""
    pts = _as_points(metric.chart, points)
    _, grad, hess = _expr_jets(phi, metric.chart.coords).evaluate(pts)
    gamma = curvature_batch(metric, pts).gamma
    return hess - np.einsum("nkij,nk->nij", gamma, grad)


def hessian_lc(phi: Expr, metric: MetricSpec, point) -> np.ndarray:
    return hessian_lc_batch(phi, metric, [point])[0]


def laplacian_batch(phi: Expr, metric: MetricSpec, points) -> np.ndarray:
    """Geometer's Laplacian: minus the metric trace of the covariant hessian."""
    pts = _as_points(metric.chart, points)
    hess = hessian_lc_batch(phi, metric, pts)
    ginv = np.linalg.inv(metric_values(metric, pts))
    return -np.einsum("nij,nij->n", ginv, hess)


def laplacian(phi: Expr, metric: MetricSpec, point) -> float:
    return float(laplacian_batch(phi, metric, [point])[0])


def grad_norm_sq_batch(phi: Expr, metric: MetricSpec, points) -> np.ndarray:
    pts = _as_points(metric.chart, points)
    _, grad, _ = _expr_jets(phi, metric.chart.coords).evaluate(pts)
    ginv = np.linalg.inv(metric_values(metric, pts))
    return np.einsum("nij,ni,nj->n", ginv, grad, grad)


def grad_norm_sq(phi: Expr, metric: MetricSpec, point) -> float:
    return float(grad_norm_sq_batch(phi, metric, [point])[0])


def gradient_batch(phi: Expr, metric: MetricSpec, points) -> np.ndarray:
    """Raised gradient vector field g^ij d_j phi."""
    pts = _as_points(metric.chart, points)
    _, grad, _ = _expr_jets(phi, metric.chart.coords).evaluate(pts)
    ginv = np.linalg.inv(metric_values(metric, pts))
    return np.einsum("nij,nj->ni", ginv, grad)


def gradient(phi: Expr, metric: MetricSpec, point) -> np.ndarray:
    return gradient_batch(phi, metric, [point])[0]
