"""Distribution comparisons (KDE, symmetric KL) and radial summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidArgument, NumericDomainError
from .measures import GaussianMeasure, GridMeasure, ParticleCloud

_FLOOR_REL = 1e-6


def _as_points(x) -> np.ndarray:
    pts = x.points if isinstance(x, (ParticleCloud, GridMeasure)) else np.asarray(x, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


@dataclass(frozen=True, eq=False)
class KdeModel:
    """Gaussian KDE with full bandwidth matrix ``H = n^{-2/(d+4)} Cov`` (Scott's rule).

    The covariance is regularized by ``floor * (trace/d) * I`` so collapsed
    clouds (rings, single points repeated) still give a usable model.
    """

    samples: np.ndarray
    bandwidth_matrix: np.ndarray

    @classmethod
    def fit(cls, samples, floor: float = _FLOOR_REL) -> "KdeModel":
        x = _as_points(samples)
        n, d = x.shape
        if n < 2:
            raise InvalidArgument("a KDE needs at least two samples")
        c = x - x.mean(axis=0)
        cov = c.T @ c / (n - 1)
        scale = max(np.trace(cov) / d, 0.0)
        if scale == 0.0:
            raise NumericDomainError("samples are all identical; pass an explicit bandwidth instead of Scott's rule")
        cov = cov + floor * scale * np.eye(d)
        return cls(np.array(x), n ** (-2.0 / (d + 4)) * cov)

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    def log_density(self, x, chunk: int = 2048) -> np.ndarray:
        return kde_log_density(self, x, chunk)


def kde_log_density(model: KdeModel, x, chunk: int = 2048) -> np.ndarray:
    """Log of ``(1/n) sum_i N(x; x_i, H)`` at each query row, by log-sum-exp."""
    q = np.atleast_2d(np.asarray(x, dtype=float))
    if q.shape[1] != model.d:
        q = q.reshape(-1, model.d)
    try:
        L = np.linalg.cholesky(model.bandwidth_matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericDomainError("bandwidth matrix is singular; raise the bandwidth floor") from exc
    Linv = np.linalg.inv(L)
    zs = model.samples @ Linv.T
    n, d = model.samples.shape
    const = -np.log(n) - np.log(np.diag(L)).sum() - 0.5 * d * np.log(2 * np.pi)
    out = np.empty(len(q))
    for s in range(0, len(q), chunk):
        zq = q[s : s + chunk] @ Linv.T
        d2 = np.sum(zq**2, axis=1)[:, None] + np.sum(zs**2, axis=1)[None, :] - 2.0 * zq @ zs.T
        out[s : s + chunk] = logsumexp(-0.5 * np.maximum(d2, 0.0), axis=1) + const
    return out


# ---------------------------------------------------------------------------
# symmetric KL


def _kl_gauss(m0, S0, m1, S1) -> float:
    d = m0.size
    try:
        L1 = np.linalg.cholesky(S1)
        L0 = np.linalg.cholesky(S0)
    except np.linalg.LinAlgError as exc:
        raise NumericDomainError("KL between Gaussians needs positive-definite covariances") from exc
    S1inv = np.linalg.inv(S1)
    dm = m1 - m0
    logdet = 2.0 * (np.log(np.diag(L1)).sum() - np.log(np.diag(L0)).sum())
    return 0.5 * (np.trace(S1inv @ S0) + dm @ S1inv @ dm - d + logdet)


def sym_kl_gaussians(g1: GaussianMeasure, g2: GaussianMeasure) -> float:
    """KL(g1||g2) + KL(g2||g1) in closed form."""
    if g1.d != g2.d:
        raise InvalidArgument("Gaussians live in different dimensions")
    a = _kl_gauss(g1.mean, g1.covariance, g2.mean, g2.covariance)
    b = _kl_gauss(g2.mean, g2.covariance, g1.mean, g1.covariance)
    return float(a + b)


def sym_kl_samples(p_logpdf, q_samples, p_samples, q_logpdf=None) -> float:
    """Monte-Carlo SymKL between an analytic density p and a sample-only q.

    ``KL(p||q) ~ mean_{x~p}[log p - log q]`` and ``KL(q||p) ~ mean_{x~q}[log q - log p]``,
    with ``log q`` taken from a Scott-rule KDE of ``q_samples`` unless given.
    """
    xq, xp = _as_points(q_samples), _as_points(p_samples)
    if q_logpdf is None:
        kde = KdeModel.fit(xq)
        q_logpdf = kde.log_density
    kl_pq = np.mean(p_logpdf(xp) - q_logpdf(xp))
    kl_qp = np.mean(q_logpdf(xq) - p_logpdf(xq))
    return float(kl_pq + kl_qp)


def sym_kl_kde(p_samples, q_samples) -> float:
    """SymKL with KDE on both sides (noisier; used when neither side has a density)."""
    kp = KdeModel.fit(p_samples)
    return sym_kl_samples(kp.log_density, q_samples, p_samples)


def sym_kl_grid(mu: GridMeasure, target_logpdf, floor: float = 1e-300) -> float:
    """SymKL between grid weights and a density discretized on the same support.

    Both sides are compared as discrete distributions on the support, so
    the cell volume cancels.
    """
    logt = np.asarray(target_logpdf(mu.support), dtype=float)
    logt = logt - logsumexp(logt)
    p = np.exp(logt)
    w = np.maximum(mu.weights, floor)
    logw = np.log(w / w.sum())
    return float(np.sum((p - np.exp(logw)) * (logt - logw)))


# ---------------------------------------------------------------------------
# radial summaries


def radius_stats(cloud, center=None, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
    """Order statistics of ``|x_i - center|`` (weighted for grids)."""
    x = _as_points(cloud)
    c = np.zeros(x.shape[1]) if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(x - c, axis=1)
    if isinstance(cloud, GridMeasure):
        w = cloud.weights
        order = np.argsort(r)
        cw = np.cumsum(w[order])
        mean = float(w @ r)
        std = float(np.sqrt(max(w @ (r - mean) ** 2, 0.0)))
        qs = {f"q{int(round(100 * u)):02d}": float(r[order][min(np.searchsorted(cw, u), len(r) - 1)])
              for u in quantiles}
        live = r[w > 0]
        return {"mean": mean, "std": std, "min": float(live.min()), "max": float(live.max()), **qs}
    out = {"mean": float(r.mean()), "std": float(r.std()), "min": float(r.min()), "max": float(r.max())}
    for u, v in zip(quantiles, np.quantile(r, quantiles)):
        out[f"q{int(round(100 * u)):02d}"] = float(v)
    return out
