"""Sliced-Wasserstein estimators, their gradients, and Gaussian closed forms.

One-dimensional transport is computed three ways:

* ``w2_1d_uniform_sorted``: equal-size uniform atoms, matched in sorted order.
* ``w2_1d_quantile``: the rectangle (midpoint) rule on ``M`` quantile levels.
* ``w2_1d_exact``: the exact integral of the squared quantile difference for
  arbitrary weighted atoms, obtained by merging both cumulative-weight
  breakpoint sets.  This is the ``M -> infinity`` limit of the rectangle rule
  and the only one of the three that is differentiable in the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .measures import GaussianMeasure, GridMeasure, ParticleCloud, ProjectionSet, sample_unit_sphere

# tolerance for treating a breakpoint of one measure as coinciding with one of the other
_BREAK_TOL = 1e-12


@dataclass(frozen=True)
class QuantileGrid:
    """Midpoint quantile levels ``(j - 1/2) / M`` for ``j = 1..M``."""

    M: int = 100

    def __post_init__(self):
        if self.M < 1:
            raise InvalidArgument(f"M must be >= 1, got {self.M}")

    @property
    def levels(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) / self.M


@dataclass(frozen=True)
class SwEstimate:
    value: float
    n_projections: int
    seed: int | None
    per_projection: np.ndarray

    @property
    def std_error(self) -> float:
        """Monte-Carlo standard error of ``value`` (per-projection std / sqrt(L))."""
        if self.n_projections < 2:
            return float("nan")
        return float(np.std(self.per_projection, ddof=1) / np.sqrt(self.n_projections))


# ---------------------------------------------------------------------------
# one-dimensional transport


def w2_1d_uniform_sorted(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=float).ravel(), np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise InvalidArgument("empty input")
    if xs.size != ys.size:
        raise InvalidArgument(f"length mismatch: {xs.size} vs {ys.size}")
    return float(np.mean((np.sort(xs) - np.sort(ys)) ** 2))


def _sorted_atoms(x, w):
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if x.size == 0 or x.size != w.size:
        raise InvalidArgument("atoms and weights must be non-empty and of equal length")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InvalidArgument(f"weights must lie on the simplex (sum={w.sum():.12g})")
    order = np.argsort(x, kind="stable")
    return x[order], w[order]


def w2_1d_quantile(xa, wa, xb, wb, q: QuantileGrid = QuantileGrid()) -> float:
    a, wa = _sorted_atoms(xa, wa)
    b, wb = _sorted_atoms(xb, wb)
    val, _ = _rectangle_batch(a[None], np.cumsum(wa)[None], b[None], np.cumsum(wb)[None], q)
    return float(val[0])


def w2_1d_exact(xa, wa, xb, wb) -> float:
    a, wa = _sorted_atoms(xa, wa)
    b, wb = _sorted_atoms(xb, wb)
    val, _, _ = _exact_batch(a[None], wa[None], b[None], wb[None])
    return float(val[0])


def _quantile_index(cum, u, side="left"):
    """Index of the smallest atom whose cumulative weight is >= u (row-wise)."""
    rows, n = cum.shape
    if u.ndim == 1:
        u = np.broadcast_to(u, (rows, u.size))
    # one flat search: cumulative weights live in [0, 1], so shifting row r by 4r keeps rows apart
    shift = 4.0 * np.arange(rows)[:, None]
    flat = np.searchsorted((cum + shift).ravel(), (u + shift).ravel(), side=side).reshape(u.shape)
    out = flat - n * np.arange(rows)[:, None]
    return np.clip(out, 0, n - 1)


def _rectangle_batch(a, ca, b, cb, q: QuantileGrid):
    """Rectangle-rule W2^2 per row and its gradient w.r.t. the (sorted) atoms ``a``."""
    u = q.levels
    ia = _quantile_index(ca, u)
    ib = _quantile_index(cb, u)
    rows = np.arange(a.shape[0])[:, None]
    diff = a[rows, ia] - b[rows, ib]
    vals = np.mean(diff**2, axis=1)
    grad_a = np.zeros_like(a)
    np.add.at(grad_a, (np.broadcast_to(rows, ia.shape), ia), 2.0 * diff / q.M)
    return vals, grad_a


def _exact_batch(a, wa, b, wb, want_grad_a=True):
    """Exact W2^2 between rows of sorted weighted atoms.

    Returns per-row values, the gradient w.r.t. the atom positions ``a`` and a
    gradient w.r.t. the weights ``wa`` (valid on the tangent space of the
    simplex; the last sorted atom's component is fixed at zero).
    """
    L, n = a.shape
    ca = np.cumsum(wa, axis=1)
    cb = np.cumsum(wb, axis=1)
    ca[:, -1] = 1.0
    cb[:, -1] = 1.0
    m = cb.shape[1]
    merged = np.concatenate([ca, cb], axis=1)
    perm = np.argsort(merged, axis=1, kind="stable")
    cuts = np.take_along_axis(merged, perm, axis=1)
    widths = np.diff(cuts, axis=1, prepend=0.0)
    # quantile indices at each cut read off the merge: atoms of each side seen before the cut.
    # Ties only produce zero-width pieces, whose index does not matter.
    from_a = perm < n
    ia = np.minimum(np.cumsum(from_a, axis=1) - from_a, n - 1)
    ib = np.minimum(np.cumsum(~from_a, axis=1) - ~from_a, m - 1)
    rows = np.arange(L)[:, None]
    diff = a[rows, ia] - b[rows, ib]
    vals = np.sum(widths * diff**2, axis=1)

    grad_a = None
    if want_grad_a:
        grad_a = np.zeros_like(a)
        np.add.at(grad_a, (np.broadcast_to(rows, ia.shape), ia), 2.0 * widths * diff)

    grad_w = np.zeros_like(a)
    if n > 1:
        c = ca[:, :-1]
        lo = b[rows, _quantile_index(cb, c - _BREAK_TOL, side="left")]
        hi = b[rows, _quantile_index(cb, c + _BREAK_TOL, side="right")]
        left, right = a[:, :-1], a[:, 1:]

        def dcut(bv):
            return (left - bv) ** 2 - (right - bv) ** 2

        # average of one-sided derivatives when a cut meets a breakpoint of b
        g_cut = 0.5 * (dcut(lo) + dcut(hi))
        grad_w[:, :-1] = np.cumsum(g_cut[:, ::-1], axis=1)[:, ::-1]
    return vals, grad_a, grad_w


# ---------------------------------------------------------------------------
# sliced estimators


def _check_pair(mu, nu, projections: ProjectionSet):
    if mu.d != nu.d:
        raise InvalidArgument(f"dimension mismatch: {mu.d} vs {nu.d}")
    if projections.d != mu.d:
        raise InvalidArgument(f"projections live in dimension {projections.d}, measures in {mu.d}")


def _uniform_pair(mu, nu) -> bool:
    return isinstance(mu, ParticleCloud) and isinstance(nu, ParticleCloud) and mu.n == nu.n


def _projected_sorted(measure, theta):
    """Projected atoms sorted per direction: values (L, n), weights (L, n), sort order (L, n)."""
    proj = theta @ measure.points.T
    order = np.argsort(proj, axis=1, kind="stable")
    vals = np.take_along_axis(proj, order, axis=1)
    w = np.asarray(measure.weights)[order]
    return vals, w, order


def _per_projection(mu, nu, projections: ProjectionSet, q: QuantileGrid | None, want_grad: bool):
    """Per-direction squared distances, plus (optionally) gradients w.r.t. mu's projected atoms/weights.

    Gradients are returned in mu's original atom order, shape (L, n).
    """
    theta = projections.directions
    if _uniform_pair(mu, nu):
        pa = theta @ mu.points.T
        pb = np.sort(theta @ nu.points.T, axis=1)
        order = np.argsort(pa, axis=1, kind="stable")
        diff = np.take_along_axis(pa, order, axis=1) - pb
        vals = np.mean(diff**2, axis=1)
        if not want_grad:
            return vals, None, None
        grad_a = np.empty_like(pa)
        np.put_along_axis(grad_a, order, 2.0 * diff / mu.n, axis=1)
        return vals, grad_a, None

    a, wa, order = _projected_sorted(mu, theta)
    b, wb, _ = _projected_sorted(nu, theta)
    if q is None:
        vals, ga, gw = _exact_batch(a, wa, b, wb, want_grad_a=isinstance(mu, ParticleCloud))
    else:
        vals, ga = _rectangle_batch(a, np.cumsum(wa, axis=1), b, np.cumsum(wb, axis=1), q)
        gw = None
    if not want_grad:
        return vals, None, None
    grad_a = None
    if ga is not None:
        grad_a = np.empty_like(ga)
        np.put_along_axis(grad_a, order, ga, axis=1)
    grad_w = None
    if gw is not None:
        grad_w = np.empty_like(gw)
        np.put_along_axis(grad_w, order, gw, axis=1)
    return vals, grad_a, grad_w


def sw2_mc(mu, nu, projections: ProjectionSet, q: QuantileGrid | None = QuantileGrid()) -> SwEstimate:
    """Monte-Carlo sliced-Wasserstein estimate: mean over directions of 1D squared distances.

    Equal-size particle clouds are matched in sorted order.  Otherwise the 1D
    distances use the rectangle rule on ``q``, or the exact breakpoint integral
    when ``q`` is None.
    """
    _check_pair(mu, nu, projections)
    vals, _, _ = _per_projection(mu, nu, projections, q, want_grad=False)
    return SwEstimate(float(np.mean(vals)), projections.L, projections.seed, vals)


def sliced_wasserstein(mu, nu, n_projections: int = 100, seed=0, q: QuantileGrid | None = QuantileGrid()) -> SwEstimate:
    """Convenience wrapper drawing a fresh projection set from ``seed``."""
    return sw2_mc(mu, nu, sample_unit_sphere(n_projections, mu.d, seed), q)


def grad_sw2_positions(mu: ParticleCloud, nu, projections: ProjectionSet, q: QuantileGrid | None = QuantileGrid()):
    """Gradient of ``sw2_mc(mu, nu)`` w.r.t. mu's particle coordinates, shape (n, d)."""
    if not isinstance(mu, ParticleCloud):
        raise InvalidArgument("position gradients need a ParticleCloud")
    _check_pair(mu, nu, projections)
    _, grad_a, _ = _per_projection(mu, nu, projections, q, want_grad=True)
    return grad_a.T @ projections.directions / projections.L


def grad_sw2_weights(mu: GridMeasure, nu, projections: ProjectionSet):
    """Gradient of the exact sliced distance w.r.t. mu's weights, shape (N,).

    Defined up to an additive constant: only directions summing to zero are
    meaningful, which is all a simplex-constrained update needs.
    """
    if not isinstance(mu, GridMeasure):
        raise InvalidArgument("weight gradients need a GridMeasure")
    _check_pair(mu, nu, projections)
    _, _, grad_w = _per_projection(mu, nu, projections, None, want_grad=True)
    return grad_w.mean(axis=0)


def sw2_value_and_grad(mu, nu, projections: ProjectionSet, q: QuantileGrid | None = None):
    """Estimate and gradient in one pass; positions for clouds, weights for grids."""
    _check_pair(mu, nu, projections)
    if isinstance(mu, GridMeasure):
        vals, _, grad_w = _per_projection(mu, nu, projections, None, want_grad=True)
        return float(vals.mean()), grad_w.mean(axis=0)
    vals, grad_a, _ = _per_projection(mu, nu, projections, q, want_grad=True)
    return float(vals.mean()), grad_a.T @ projections.directions / projections.L


# ---------------------------------------------------------------------------
# Gaussian references


def _isotropic_scale(g: GaussianMeasure) -> float:
    s2 = g.covariance[0, 0]
    if not np.allclose(g.covariance, s2 * np.eye(g.d), rtol=0, atol=1e-12):
        raise InvalidArgument("covariance must be a scalar multiple of the identity")
    return float(np.sqrt(max(s2, 0.0)))


def sw2_gaussian_isotropic(g1: GaussianMeasure, g2: GaussianMeasure) -> float:
    """Exact SW2^2 between N(m1, s1^2 I) and N(m2, s2^2 I): |m1-m2|^2/d + (s1-s2)^2."""
    if g1.d != g2.d:
        raise InvalidArgument("dimension mismatch")
    s1, s2 = _isotropic_scale(g1), _isotropic_scale(g2)
    return float(np.sum((g1.mean - g2.mean) ** 2) / g1.d + (s1 - s2) ** 2)


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (c + c.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def w2_gaussian_bures(g1: GaussianMeasure, g2: GaussianMeasure) -> float:
    """Exact W2^2 between Gaussians: mean gap plus the Bures term."""
    if g1.d != g2.d:
        raise InvalidArgument("dimension mismatch")
    r1 = _psd_sqrt(g1.covariance)
    cross = _psd_sqrt(r1 @ g2.covariance @ r1)
    bures = np.trace(g1.covariance) + np.trace(g2.covariance) - 2.0 * np.trace(cross)
    return float(np.sum((g1.mean - g2.mean) ** 2) + max(bures, 0.0))
