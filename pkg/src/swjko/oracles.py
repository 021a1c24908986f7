"""Reference solutions: Ornstein-Uhlenbeck closed form, a Langevin sampler and brute-force checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericDomainError
from .measures import GaussianMeasure, ParticleCloud, SeedLike, make_rng


@dataclass(frozen=True, eq=False)
class OuSpec:
    """dX = -A (X - m) dt + sqrt(2) dW started from N(m0, Sigma0)."""

    A: np.ndarray
    m: np.ndarray
    m0: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = A.shape[0]
        if A.shape != (d, d) or not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise NumericDomainError("A must be a symmetric square matrix")
        vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
        if vals.min() <= 0:
            raise NumericDomainError("A must be positive-definite")
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        m0 = np.atleast_1d(np.asarray(self.m0, dtype=float))
        S0 = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
        if m.shape != (d,) or m0.shape != (d,) or S0.shape != (d, d):
            raise InvalidArgument("A, m, m0 and Sigma0 have inconsistent dimensions")
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "Sigma0", S0)
        object.__setattr__(self, "_eig", (vals, vecs))

    @property
    def stationary(self) -> GaussianMeasure:
        vals, vecs = self._eig
        return GaussianMeasure(self.m, (vecs / vals) @ vecs.T)


def ou_analytic(spec: OuSpec, t: float) -> GaussianMeasure:
    """Law of the OU process at time ``t``.

    m_t = m + e^{-tA}(m0 - m),  Sigma_t = e^{-tA} Sigma0 e^{-tA} + A^{-1}(I - e^{-2tA}).
    """
    if t < 0:
        raise InvalidArgument(f"time must be nonnegative, got {t}")
    vals, vecs = spec._eig
    E = (vecs * np.exp(-t * vals)) @ vecs.T
    noise = (vecs * (-np.expm1(-2.0 * t * vals) / vals)) @ vecs.T
    cov = E @ spec.Sigma0 @ E + noise
    return GaussianMeasure(spec.m + E @ (spec.m0 - spec.m), 0.5 * (cov + cov.T))


def euler_maruyama(grad_V, x0, h: float, T: float, rng: SeedLike, checkpoints=None, noise: bool = True):
    """Unadjusted Langevin iterations X <- X - h grad V(X) + sqrt(2h) xi.

    ``x0`` is an (n, d) array (or a ParticleCloud).  Returns a dict mapping each
    checkpoint time (default: only ``T``) to a ParticleCloud.  ``noise=False``
    switches off the Brownian term, which reduces the scheme to gradient descent.
    """
    if not h > 0:
        raise InvalidArgument(f"step size must be positive, got {h}")
    if T < 0:
        raise InvalidArgument("horizon must be nonnegative")
    x = np.array(x0.points if isinstance(x0, ParticleCloud) else x0, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    gen = make_rng(rng)
    n_steps = int(round(T / h))
    checkpoints = [T] if checkpoints is None else sorted(checkpoints)
    marks = {int(round(c / h)): c for c in checkpoints}
    out = {}
    if 0 in marks:
        out[marks[0]] = ParticleCloud(x)
    scale = np.sqrt(2.0 * h)
    for k in range(1, n_steps + 1):
        g = np.asarray(grad_V(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise NumericDomainError(f"non-finite drift at Langevin step {k}")
        x = x - h * g
        if noise:
            x = x + scale * gen.standard_normal(x.shape)
        if k in marks:
            out[marks[k]] = ParticleCloud(x)
    return out


def finite_diff_grad(f, x, step: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function, shaped like ``x``."""
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericDomainError(f"non-finite evaluation when perturbing coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * step)
    return g


def assignment_bruteforce(cost):
    """Minimum-cost permutation by enumeration; returns ``(perm, total)`` with row i matched to perm[i]."""
    C = np.asarray(cost, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n):
        raise InvalidArgument("cost must be square")
    if n > 7:
        raise InvalidArgument(f"brute force is limited to n <= 7, got {n}")
    rows = np.arange(n)
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        total = C[rows, perm].sum()
        if total < best:
            best, best_perm = total, perm
    return np.array(best_perm, dtype=int), float(best)


def simplex_project_bruteforce(v) -> np.ndarray:
    """Projection onto the simplex by trying every support set and keeping the KKT-feasible one."""
    v = np.asarray(v, dtype=float).ravel()
    N = v.size
    if N > 8:
        raise InvalidArgument(f"brute force is limited to N <= 8, got {N}")
    best, best_dist = None, np.inf
    for size in range(1, N + 1):
        for S in itertools.combinations(range(N), size):
            S = list(S)
            lam = (v[S].sum() - 1.0) / size
            w = np.zeros(N)
            w[S] = v[S] - lam
            if np.any(w[S] < 0):
                continue
            # off-support coordinates need a nonpositive shifted value (dual feasibility)
            off = np.setdiff1d(np.arange(N), S)
            if np.any(v[off] - lam > 1e-12):
                continue
            dist = np.sum((w - v) ** 2)
            if dist < best_dist:
                best, best_dist = w, dist
    return best
