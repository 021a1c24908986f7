"""Measure representations, seeded randomness and 1D projections.

Every generator in the package is a ``numpy.random.Generator`` driven by the
counter-based Philox bit generator, so a given integer seed yields the same
stream on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidArgument, NumericDomainError

SeedLike = Union[int, np.random.Generator]

_SIMPLEX_TOL = 1e-12
_PSD_TOL = 1e-10


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a Philox-backed generator; generators are passed through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent 63-bit child seed from ``seed`` and an integer path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _frozen(a) -> np.ndarray:
    if isinstance(a, np.ndarray) and a.dtype == float and not a.flags.writeable:
        return a
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """``n`` points in R^d, each carrying weight ``1/n``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidArgument(f"points must be an (n, d) array with n, d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("particle coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def covariance(self) -> np.ndarray:
        c = self.points - self.mean()
        return c.T @ c / self.n

    def with_points(self, points) -> "ParticleCloud":
        return ParticleCloud(points)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Weights on a fixed support; ``cell_volume`` is the volume each support point stands for."""

    support: np.ndarray
    weights: np.ndarray
    cell_volume: float
    check_support: bool = True

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=float)
        if sup.ndim == 1:
            sup = sup[:, None]
        if sup.ndim != 2 or sup.shape[0] < 1 or sup.shape[1] < 1:
            raise InvalidArgument(f"support must be an (N, d) array, got shape {sup.shape}")
        if not np.all(np.isfinite(sup)):
            raise InvalidArgument("support coordinates must be finite")
        if not (np.isfinite(self.cell_volume) and self.cell_volume > 0):
            raise InvalidArgument(f"cell_volume must be positive, got {self.cell_volume}")
        if self.check_support and np.unique(sup, axis=0).shape[0] != sup.shape[0]:
            raise InvalidArgument("support points must be pairwise distinct")
        w = _check_simplex(self.weights, sup.shape[0])
        object.__setattr__(self, "support", _frozen(sup))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "cell_volume", float(self.cell_volume))
        object.__setattr__(self, "check_support", False)

    @property
    def n(self) -> int:
        return self.support.shape[0]

    @property
    def d(self) -> int:
        return self.support.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.support

    def mean(self) -> np.ndarray:
        return self.weights @ self.support

    def covariance(self) -> np.ndarray:
        c = self.support - self.mean()
        return (c * self.weights[:, None]).T @ c

    def with_weights(self, weights) -> "GridMeasure":
        """Same support and cell volume, new weights (support is not re-validated)."""
        return GridMeasure(self.support, weights, self.cell_volume, check_support=False)

    @classmethod
    def from_density(cls, support, density, cell_volume: float) -> "GridMeasure":
        """Normalize nonnegative density values at the support points into simplex weights."""
        vals = np.asarray(density, dtype=float)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)) or vals.sum() <= 0:
            raise InvalidArgument("density values must be finite, nonnegative and not all zero")
        return cls(support, vals / vals.sum(), cell_volume)

    @classmethod
    def regular(cls, lows, highs, counts, density=None) -> "GridMeasure":
        """Tensor grid with ``counts[k]`` points spanning ``[lows[k], highs[k]]``.

        ``density`` is a callable on (N, d) arrays; uniform weights when omitted.
        """
        lows, highs = np.atleast_1d(lows).astype(float), np.atleast_1d(highs).astype(float)
        counts = np.atleast_1d(counts).astype(int)
        if not (lows.shape == highs.shape == counts.shape) or np.any(counts < 2) or np.any(highs <= lows):
            raise InvalidArgument("regular grid needs matching lows/highs/counts with counts >= 2 and highs > lows")
        axes = [np.linspace(lo, hi, c) for lo, hi, c in zip(lows, highs, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        support = np.stack([m.ravel() for m in mesh], axis=1)
        volume = float(np.prod((highs - lows) / (counts - 1)))
        if density is None:
            return cls(support, np.full(len(support), 1.0 / len(support)), volume)
        return cls.from_density(support, density(support), volume)


def _check_simplex(weights, n: int, tol: float = _SIMPLEX_TOL) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != n:
        raise InvalidArgument(f"expected {n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgument("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise InvalidArgument(f"weights must sum to 1 (got {w.sum():.17g})")
    return w


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if m.ndim != 1 or c.shape != (m.size, m.size):
            raise InvalidArgument(f"mean {m.shape} and covariance {c.shape} are incompatible")
        if not np.allclose(c, c.T, rtol=0, atol=1e-12):
            raise NumericDomainError("covariance must be symmetric")
        if np.linalg.eigvalsh(c).min() < -_PSD_TOL:
            raise NumericDomainError("covariance must be positive semi-definite")
        object.__setattr__(self, "mean", _frozen(m))
        object.__setattr__(self, "covariance", _frozen(0.5 * (c + c.T)))

    @property
    def d(self) -> int:
        return self.mean.size

    def logpdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        try:
            chol = np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError as exc:
            raise NumericDomainError("log-density needs a positive-definite covariance") from exc
        z = np.linalg.solve(chol, (x - self.mean).T)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        return -0.5 * (np.sum(z * z, axis=0) + logdet + self.d * np.log(2 * np.pi))


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """``L`` unit directions (rows) and the seed that produced them, if known."""

    directions: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        th = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if th.shape[0] < 1 or th.shape[1] < 1:
            raise InvalidArgument("a projection set needs at least one direction")
        if not np.allclose(np.linalg.norm(th, axis=1), 1.0, rtol=0, atol=1e-12):
            raise InvalidArgument("projection directions must have unit norm")
        object.__setattr__(self, "directions", _frozen(th))

    @property
    def L(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]


def sample_unit_sphere(L: int, d: int, rng: SeedLike) -> ProjectionSet:
    """Draw ``L`` directions uniformly on S^{d-1} by normalizing standard Gaussian vectors."""
    if L < 1 or d < 1:
        raise InvalidArgument(f"need L >= 1 and d >= 1, got L={L}, d={d}")
    seed = None if isinstance(rng, np.random.Generator) else int(rng)
    gen = make_rng(rng)
    z = gen.standard_normal((L, d))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    # a zero draw has probability zero; redraw defensively
    while np.any(norms == 0):
        bad = norms[:, 0] == 0
        z[bad] = gen.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
    return ProjectionSet(z / norms, seed)


def project_1d(measure, direction) -> tuple[np.ndarray, np.ndarray]:
    """Values ``<x_i, theta>`` and the measure's weights."""
    theta = np.asarray(direction, dtype=float).ravel()
    if theta.size != measure.d:
        raise InvalidArgument(f"direction has dimension {theta.size}, measure has {measure.d}")
    return measure.points @ theta, np.array(measure.weights)


def sample_gaussian(g: GaussianMeasure, n: int, rng: SeedLike) -> ParticleCloud:
    if n < 1:
        raise InvalidArgument(f"need n >= 1 samples, got {n}")
    gen = make_rng(rng)
    try:
        factor = np.linalg.cholesky(g.covariance)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(g.covariance)
        if vals.min() < -_PSD_TOL:
            raise NumericDomainError("covariance is not positive semi-definite")
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    z = gen.standard_normal((n, g.d))
    return ParticleCloud(g.mean + z @ factor.T)


def random_spd_matrix(d: int, rng: SeedLike) -> np.ndarray:
    """Random SPD matrix with eigenvalues in (1, 2), built like scikit-learn's ``make_spd_matrix``."""
    gen = make_rng(rng)
    a = gen.uniform(size=(d, d))
    u, _, vt = np.linalg.svd(a.T @ a)
    out = u @ np.diag(1.0 + gen.uniform(size=d)) @ vt
    return 0.5 * (out + out.T)
