"""Energy functionals with values and gradients for both parameterizations.

Gradients are taken w.r.t. particle coordinates for ``ParticleCloud`` and
w.r.t. the weight vector for ``GridMeasure``.  Every energy exposes
``value(mu)``, ``grad(mu)`` and ``supports(mu)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CapabilityError, InvalidArgument, NumericDomainError
from .measures import GridMeasure, ParticleCloud, ProjectionSet, sample_unit_sphere
from .sliced import QuantileGrid, sw2_mc, sw2_value_and_grad

# ---------------------------------------------------------------------------
# potentials


class Potential:
    """A differentiable scalar field V on R^d (vectorized over rows)."""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class QuadraticPotential(Potential):
    """``V(x) = 1/2 (x - b)^T A (x - b)``; its Gibbs measure is N(b, A^{-1})."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape != (b.size, b.size):
            raise InvalidArgument(f"A {A.shape} and b {b.shape} are incompatible")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise InvalidArgument("A must be symmetric")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise NumericDomainError("A must be positive-definite")
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        object.__setattr__(self, "b", b)

    def __call__(self, x):
        z = np.atleast_2d(x) - self.b
        return 0.5 * np.einsum("ij,jk,ik->i", z, self.A, z)

    def gradient(self, x):
        return (np.atleast_2d(x) - self.b) @ self.A


@dataclass(frozen=True)
class LogDriftPotential(Potential):
    """``V(x) = -coef * log|x|`` (repulsion from the origin)."""

    coef: float

    def __call__(self, x):
        r = np.linalg.norm(np.atleast_2d(x), axis=1)
        with np.errstate(divide="ignore"):
            return -self.coef * np.log(r)

    def gradient(self, x):
        x = np.atleast_2d(x)
        r2 = np.sum(x * x, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -self.coef * x / r2


@dataclass(frozen=True)
class CallablePotential(Potential):
    value_fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return np.asarray(self.value_fn(np.atleast_2d(x)), dtype=float)

    def gradient(self, x):
        return np.asarray(self.grad_fn(np.atleast_2d(x)), dtype=float)


ZERO_POTENTIAL = CallablePotential(lambda x: np.zeros(len(x)), lambda x: np.zeros_like(x))


def _finite_potential(V: Potential, x) -> np.ndarray:
    vals = V(x)
    if not np.all(np.isfinite(vals)):
        bad = np.flatnonzero(~np.isfinite(vals))[:5]
        raise NumericDomainError(f"potential is not finite at support points {bad.tolist()}")
    return vals


def potential_value(V: Potential, mu) -> float:
    return float(np.asarray(mu.weights) @ _finite_potential(V, mu.points))


def potential_grad(V: Potential, mu) -> np.ndarray:
    if isinstance(mu, GridMeasure):
        return _finite_potential(V, mu.points)
    g = V.gradient(mu.points)
    if not np.all(np.isfinite(g)):
        raise NumericDomainError("potential gradient is not finite at some particle")
    return g / mu.n


# ---------------------------------------------------------------------------
# entropy on grids


def _require_grid(mu, what: str) -> GridMeasure:
    if not isinstance(mu, GridMeasure):
        raise CapabilityError(f"{what} needs a density and is only available on GridMeasure")
    return mu


def entropy_grid_value(mu: GridMeasure) -> float:
    """Discrete negative entropy ``sum_i rho_i log(rho_i / l)`` with ``0 log 0 = 0``."""
    mu = _require_grid(mu, "entropy")
    w = mu.weights
    pos = w > 0
    return float(np.sum(w[pos] * np.log(w[pos] / mu.cell_volume)))


def entropy_grid_grad(mu: GridMeasure, floor: float = 1e-300) -> np.ndarray:
    """``log(rho_i / l) + 1``; zero weights are evaluated at ``floor`` to stay finite."""
    mu = _require_grid(mu, "entropy")
    return np.log(np.maximum(mu.weights, floor) / mu.cell_volume) + 1.0


# ---------------------------------------------------------------------------
# interaction


@dataclass(frozen=True)
class PowerKernel:
    """``W(x) = |x|^a / a - |x|^b / b`` with the convention ``|x|^0 / 0 = log|x|``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > self.b >= 0):
            raise InvalidArgument(f"need a > b >= 0, got a={self.a}, b={self.b}")

    @property
    def singular(self) -> bool:
        return self.b == 0

    def value_r(self, r):
        return self.value_r2(np.asarray(r, dtype=float) ** 2)

    def value_r2(self, r2):
        """``W`` as a function of the squared distance."""
        first = _pow(r2, self.a / 2) / self.a
        with np.errstate(divide="ignore"):
            if self.singular:
                return first - 0.5 * np.log(r2)
            return first - _pow(r2, self.b / 2) / self.b

    def radial_factor(self, r2):
        """``f`` with ``grad W(z) = f(|z|^2) z``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return _pow(r2, self.a / 2 - 1) - _pow(r2, self.b / 2 - 1)


def _pow(x, p):
    # integer exponents dominate in practice and are much cheaper than a general power
    if p == 0:
        return np.ones_like(x)
    if p == 1:
        return x
    if p == 2:
        return x * x
    if p == -1:
        return 1.0 / x
    return x**p


def _sqdist(points):
    # coordinate loop keeps memory at O(n^2) instead of O(n^2 d)
    r2 = np.zeros((len(points), len(points)))
    for k in range(points.shape[1]):
        c = points[:, k]
        r2 += (c[:, None] - c[None, :]) ** 2
    return r2


def _check_coincident(kernel: PowerKernel, r2):
    if kernel.singular:
        off = r2 + np.eye(len(r2))
        hits = np.argwhere(off == 0)
        if len(hits):
            i, j = hits[0]
            raise NumericDomainError(f"particles {i} and {j} coincide under a singular kernel")


def interaction_value(kernel: PowerKernel, mu) -> float:
    """``1/2 sum_{i != j} w_i w_j W(x_i - x_j)``."""
    w = np.asarray(mu.weights)
    r2 = _sqdist(mu.points)
    _check_coincident(kernel, r2)
    return _interaction_value_from(kernel, r2, w)


def _interaction_value_from(kernel, r2, w):
    vals = kernel.value_r2(r2)
    np.fill_diagonal(vals, 0.0)
    return float(0.5 * w @ vals @ w)


def _cloud_interaction_grad_from(kernel, r2, x):
    f = kernel.radial_factor(r2)
    np.fill_diagonal(f, 0.0)
    # sum_j f_ij (x_i - x_j)
    return (f.sum(axis=1)[:, None] * x - f @ x) / len(x) ** 2


def interaction_grad(kernel: PowerKernel, mu) -> np.ndarray:
    if isinstance(mu, GridMeasure):
        return _grid_interaction_matrix(kernel, mu.support) @ mu.weights
    r2 = _sqdist(mu.points)
    _check_coincident(kernel, r2)
    return _cloud_interaction_grad_from(kernel, r2, mu.points)


def _grid_interaction_matrix(kernel: PowerKernel, support) -> np.ndarray:
    r2 = _sqdist(support)
    vals = kernel.value_r2(r2)
    np.fill_diagonal(vals, 0.0)
    return vals


# ---------------------------------------------------------------------------
# energies


class Energy:
    """Base class: ``value``, ``grad`` and the parameterizations it supports."""

    grid_ok = True
    cloud_ok = True

    def supports(self, mu) -> bool:
        return (isinstance(mu, GridMeasure) and self.grid_ok) or (isinstance(mu, ParticleCloud) and self.cloud_ok)

    def check(self, mu):
        if not self.supports(mu):
            raise CapabilityError(f"{type(self).__name__} does not support {type(mu).__name__}")

    def value(self, mu) -> float:
        raise NotImplementedError

    def grad(self, mu) -> np.ndarray:
        raise NotImplementedError

    def value_and_grad(self, mu):
        return self.value(mu), self.grad(mu)


@dataclass(eq=False)
class PotentialEnergy(Energy):
    V: Potential

    def value(self, mu):
        self.check(mu)
        return potential_value(self.V, mu)

    def grad(self, mu):
        self.check(mu)
        return potential_grad(self.V, mu)


class GridEntropy(Energy):
    cloud_ok = False

    def value(self, mu):
        self.check(mu)
        return entropy_grid_value(mu)

    def grad(self, mu):
        self.check(mu)
        return entropy_grid_grad(mu)


@dataclass(eq=False)
class Interaction(Energy):
    kernel: PowerKernel
    _cache: dict = field(default_factory=dict, repr=False)

    def _matrix(self, mu: GridMeasure):
        # the support of a grid flow never changes, so the kernel matrix is reused
        key = id(mu.support)
        if key not in self._cache:
            self._cache.clear()
            self._cache[key] = (mu.support, _grid_interaction_matrix(self.kernel, mu.support))
        return self._cache[key][1]

    def value(self, mu):
        self.check(mu)
        if isinstance(mu, GridMeasure):
            return float(0.5 * mu.weights @ self._matrix(mu) @ mu.weights)
        return interaction_value(self.kernel, mu)

    def grad(self, mu):
        self.check(mu)
        if isinstance(mu, GridMeasure):
            return self._matrix(mu) @ mu.weights
        return interaction_grad(self.kernel, mu)

    def value_and_grad(self, mu):
        if isinstance(mu, GridMeasure):
            return self.value(mu), self.grad(mu)
        self.check(mu)
        r2 = _sqdist(mu.points)
        _check_coincident(self.kernel, r2)
        return (_interaction_value_from(self.kernel, r2, mu.weights),
                _cloud_interaction_grad_from(self.kernel, r2, mu.points))


class SwToTarget(Energy):
    """``1/2 SW^2(mu, target) + lam * H(mu)`` with a pinned projection set."""

    def __init__(self, target, projections: ProjectionSet | None = None, lam: float = 0.0,
                 n_projections: int = 200, seed: int = 0, q: QuantileGrid | None = None):
        if lam < 0:
            raise InvalidArgument("entropy weight must be nonnegative")
        self.target = target
        self.lam = float(lam)
        self.q = q
        self.projections = projections or sample_unit_sphere(n_projections, target.d, seed)
        self.cloud_ok = self.lam == 0

    def check(self, mu):
        if isinstance(mu, ParticleCloud) and self.lam > 0:
            raise CapabilityError("entropy regularization is unavailable for particle clouds")
        super().check(mu)

    def value(self, mu):
        self.check(mu)
        q = None if isinstance(mu, GridMeasure) else self.q
        val = 0.5 * sw2_mc(mu, self.target, self.projections, q).value
        if self.lam:
            val += self.lam * entropy_grid_value(mu)
        return float(val)

    def grad(self, mu):
        self.check(mu)
        _, g = sw2_value_and_grad(mu, self.target, self.projections, self.q)
        g = 0.5 * g
        if self.lam:
            g = g + self.lam * entropy_grid_grad(mu)
        return g


def w2_exact_assignment(mu: ParticleCloud, nu: ParticleCloud):
    """Exact W2^2 between equal-size uniform clouds and the optimal matching ``sigma``."""
    if not (isinstance(mu, ParticleCloud) and isinstance(nu, ParticleCloud)):
        raise InvalidArgument("exact W2 needs two particle clouds")
    if mu.n != nu.n or mu.d != nu.d:
        raise InvalidArgument(f"size mismatch: {mu.n}x{mu.d} vs {nu.n}x{nu.d}")
    cost = np.sum((mu.points[:, None, :] - nu.points[None, :, :]) ** 2, axis=2)
    rows, cols = linear_sum_assignment(cost)
    sigma = np.empty(mu.n, dtype=int)
    sigma[rows] = cols
    return float(cost[rows, cols].sum() / mu.n), sigma


class W2ToTargetExact(Energy):
    """``W2^2(mu, target)`` by exact assignment; gradient holds the matching fixed."""

    grid_ok = False

    def __init__(self, target: ParticleCloud):
        self.target = target

    def value(self, mu):
        self.check(mu)
        return w2_exact_assignment(mu, self.target)[0]

    def grad(self, mu):
        self.check(mu)
        _, sigma = w2_exact_assignment(mu, self.target)
        return 2.0 / mu.n * (mu.points - self.target.points[sigma])


class WeightedSum(Energy):
    def __init__(self, terms: Sequence[Energy], coefs: Sequence[float] | None = None):
        self.terms = list(terms)
        self.coefs = [1.0] * len(self.terms) if coefs is None else [float(c) for c in coefs]
        if len(self.coefs) != len(self.terms):
            raise InvalidArgument("one coefficient per term")
        if not all(np.isfinite(self.coefs)):
            raise InvalidArgument("coefficients must be finite")

    def supports(self, mu):
        return all(t.supports(mu) for t in self.terms)

    def check(self, mu):
        for t in self.terms:
            t.check(mu)

    def value(self, mu):
        self.check(mu)
        return float(sum(c * t.value(mu) for c, t in zip(self.coefs, self.terms)))

    def grad(self, mu):
        self.check(mu)
        g = np.zeros(mu.n) if isinstance(mu, GridMeasure) else np.zeros_like(mu.points)
        for c, t in zip(self.coefs, self.terms):
            if c:
                g = g + c * t.grad(mu)
        return g

    def value_and_grad(self, mu):
        self.check(mu)
        val = 0.0
        g = np.zeros(mu.n) if isinstance(mu, GridMeasure) else np.zeros_like(mu.points)
        for c, t in zip(self.coefs, self.terms):
            v, gt = t.value_and_grad(mu)
            val += c * v
            if c:
                g = g + c * gt
        return float(val), g


class ZeroEnergy(Energy):
    def value(self, mu):
        return 0.0

    def grad(self, mu):
        return np.zeros(mu.n) if isinstance(mu, GridMeasure) else np.zeros_like(mu.points)


def fokker_planck(V: Potential) -> WeightedSum:
    """Potential energy plus grid entropy."""
    return WeightedSum([PotentialEnergy(V), GridEntropy()])
