"""SW-JKO outer loop with first-order inner solvers for grid weights and particle positions.

Each outer step minimizes

    J(mu) = s * SW^2(mu, mu_k) / (2 tau) + F(mu),    s = d if dilation else 1,

over particle positions (``ParticleCloud``) or over simplex weights on a fixed
support (``GridMeasure``, projected gradient).  ``direct_minimize`` runs the
same machinery with the proximal term removed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import FlowAborted, InvalidArgument
from .functionals import Energy
from .measures import GridMeasure, ParticleCloud, derive_seed, sample_unit_sphere
from .sliced import QuantileGrid, sw2_mc, sw2_value_and_grad

log = logging.getLogger(__name__)

_METHODS = ("plain", "momentum", "adaptive", "scaled")
_GAP_KEY = 1_000_003


@dataclass(frozen=True)
class SolverConfig:
    tau: float = 0.1
    n_outer: int = 10
    n_inner: int = 100
    n_projections: int = 100
    quantile_M: int | None = None  # None: exact 1D transport for weighted or unequal measures
    inner_step: float = 1e-3
    inner_method: str = "adaptive"  # "scaled": rho-preconditioned projected step, grids only
    momentum: float = 0.9
    dilation: bool = False
    warm_start: bool = True
    resample: str = "epoch"  # "epoch": fresh directions each inner epoch, "step": frozen per outer step
    keep_best: bool = True  # only honoured with resample="step", where J is deterministic
    seed: int = 0

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgument(f"tau must be positive, got {self.tau}")
        if self.n_outer < 0 or self.n_inner < 1 or self.n_projections < 1:
            raise InvalidArgument("need n_outer >= 0, n_inner >= 1, n_projections >= 1")
        if self.inner_method not in _METHODS:
            raise InvalidArgument(f"inner_method must be one of {_METHODS}")
        if self.resample not in ("epoch", "step"):
            raise InvalidArgument("resample must be 'epoch' or 'step'")
        if not self.inner_step > 0:
            raise InvalidArgument("inner_step must be positive")
        if self.quantile_M is not None and self.quantile_M < 1:
            raise InvalidArgument("quantile_M must be >= 1")

    @property
    def quantiles(self) -> QuantileGrid | None:
        return None if self.quantile_M is None else QuantileGrid(self.quantile_M)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    snapshots: list
    energy_trace: list[float]
    sw_gap_trace: list[float]
    wall_ms: list[float]
    tau: float
    seed: int
    mode: str = "sw-jko"
    config: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(len(self.snapshots))

    @property
    def final(self):
        return self.snapshots[-1]


# ---------------------------------------------------------------------------
# projection onto the simplex


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto ``{rho >= 0, sum rho = 1}`` (sort-based, O(N log N))."""
    v = np.asarray(v, dtype=float).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    k = np.count_nonzero(u - css / ks > 0)
    shift = css[k - 1] / k
    w = np.maximum(v - shift, 0.0)
    # absorb rounding so the result sums to one to machine precision
    w /= w.sum()
    return w


# ---------------------------------------------------------------------------
# inner optimizers


class _Plain:
    def __init__(self, lr):
        self.lr = lr

    def step(self, p, g):
        return p - self.lr * g


class _Momentum:
    def __init__(self, lr, beta):
        self.lr, self.beta, self.v = lr, beta, None

    def step(self, p, g):
        self.v = g if self.v is None else self.beta * self.v + g
        return p - self.lr * self.v


class _Adam:
    def __init__(self, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, p, g):
        if self.m is None:
            self.m, self.v = np.zeros_like(g), np.zeros_like(g)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        return p - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _optimizer(cfg: SolverConfig):
    if cfg.inner_method in ("plain", "scaled"):
        return _Plain(cfg.inner_step)
    if cfg.inner_method == "momentum":
        return _Momentum(cfg.inner_step, cfg.momentum)
    return _Adam(cfg.inner_step)


def _params(mu):
    return np.array(mu.weights if isinstance(mu, GridMeasure) else mu.points, dtype=float)


def _rebuild(template, params):
    if isinstance(template, GridMeasure):
        return template.with_weights(params)
    return ParticleCloud(params)


def _check_compatible(mu, energy: Energy):
    if not isinstance(mu, (GridMeasure, ParticleCloud)):
        raise InvalidArgument(f"unsupported measure type {type(mu).__name__}")
    energy.check(mu)


# ---------------------------------------------------------------------------
# one step


def _proximal_scale(cfg: SolverConfig, d: int) -> float:
    return (d if cfg.dilation else 1.0) / (2.0 * cfg.tau)


def sw_jko_step(mu_k, energy: Energy, cfg: SolverConfig, step_index: int = 0, init=None, proximal: bool = True):
    """One SW-JKO step; returns ``(mu_next, projections_used_for_gap_or_None)``.

    ``init`` is the starting iterate (a copy of ``mu_k`` by default).  With
    ``proximal=False`` the SW term is dropped and the inner loop is plain
    descent on ``F``.
    """
    _check_compatible(mu_k, energy)
    start = mu_k if init is None else init
    is_grid = isinstance(mu_k, GridMeasure)
    if cfg.inner_method == "scaled" and not is_grid:
        raise InvalidArgument("inner_method='scaled' is defined for grid weights only")
    scale = _proximal_scale(cfg, mu_k.d) if proximal else 0.0
    q = cfg.quantiles
    frozen = None
    if cfg.resample == "step":
        frozen = sample_unit_sphere(cfg.n_projections, mu_k.d, derive_seed(cfg.seed, step_index))
    deterministic = frozen is not None or not proximal
    track_best = cfg.keep_best and deterministic

    opt = _optimizer(cfg)
    params = _params(start)
    current = start
    best_val, best = np.inf, current

    def objective(mu, projections):
        f, gf = energy.value_and_grad(mu)
        if scale == 0.0:
            return f, gf
        sw, gsw = sw2_value_and_grad(mu, mu_k, projections, q)
        return scale * sw + f, scale * gsw + gf

    for epoch in range(cfg.n_inner + 1):
        projections = frozen
        if proximal and projections is None:
            projections = sample_unit_sphere(cfg.n_projections, mu_k.d, derive_seed(cfg.seed, step_index, epoch))
        try:
            with np.errstate(all="ignore"):
                J, g = objective(current, projections)
        except (ArithmeticError, ValueError) as exc:
            raise FlowAborted(f"step {step_index}, epoch {epoch}: {exc}", last_measure=best if track_best else current) from exc
        if not (np.isfinite(J) and np.all(np.isfinite(g))):
            raise FlowAborted(
                f"non-finite objective at step {step_index}, epoch {epoch} (J={J})",
                last_measure=best if track_best else current,
            )
        if track_best and J < best_val:
            best_val, best = J, current
        if epoch == cfg.n_inner:
            break
        if not is_grid:
            # per-particle scaling keeps the learning rate independent of n
            g = g * mu_k.n
        elif cfg.inner_method == "scaled":
            # diag(rho) - rho rho^T preconditioning: tangent to the simplex, small moves on small cells
            g = params * (g - g @ params)
        params = opt.step(params, g)
        if is_grid:
            params = simplex_project(params)
        if not np.all(np.isfinite(params)):
            raise FlowAborted(f"non-finite iterate at step {step_index}, epoch {epoch}",
                              last_measure=best if track_best else current)
        current = _rebuild(mu_k, params)

    return (best if track_best else current), frozen


# ---------------------------------------------------------------------------
# flows


def _gap(mu_k, mu_next, cfg: SolverConfig, step_index: int, projections):
    if projections is None:
        projections = sample_unit_sphere(cfg.n_projections, mu_k.d, derive_seed(cfg.seed, step_index, _GAP_KEY))
    # same 1D route as the inner objective: grids always use the exact integral
    q = None if isinstance(mu_k, GridMeasure) else cfg.quantiles
    return sw2_mc(mu_next, mu_k, projections, q).value


def _run(mu0, energy: Energy, cfg: SolverConfig, proximal: bool, callback=None) -> Trajectory:
    _check_compatible(mu0, energy)
    traj = Trajectory(
        snapshots=[mu0],
        energy_trace=[energy.value(mu0)],
        sw_gap_trace=[],
        wall_ms=[],
        tau=cfg.tau,
        seed=cfg.seed,
        mode="sw-jko" if proximal else "direct",
        config=cfg.as_dict(),
    )
    mu = mu0
    for k in range(cfg.n_outer):
        t0 = time.perf_counter()
        init = None if cfg.warm_start else mu0
        try:
            nxt, used = sw_jko_step(mu, energy, cfg, step_index=k, init=init, proximal=proximal)
        except FlowAborted as exc:
            exc.trajectory = traj
            raise
        traj.sw_gap_trace.append(_gap(mu, nxt, cfg, k, used))
        traj.energy_trace.append(energy.value(nxt))
        traj.snapshots.append(nxt)
        traj.wall_ms.append(1e3 * (time.perf_counter() - t0))
        log.debug("step %d: F=%.6g gap=%.3g", k + 1, traj.energy_trace[-1], traj.sw_gap_trace[-1])
        if callback is not None:
            callback(k + 1, traj)
        mu = nxt
    return traj


def run_flow(mu0, energy: Energy, cfg: SolverConfig, callback=None) -> Trajectory:
    """K SW-JKO steps from ``mu0``; every snapshot and trace is recorded."""
    return _run(mu0, energy, cfg, proximal=True, callback=callback)


def direct_minimize(mu0, energy: Energy, cfg: SolverConfig, callback=None) -> Trajectory:
    """Non-flow baseline: the same inner loop with the SW proximal term removed."""
    return _run(mu0, energy, cfg, proximal=False, callback=callback)


# ---------------------------------------------------------------------------
# checks


def energy_gap_check(traj: Trajectory, tau: float | None = None, rel_slack: float = 1e-4):
    """Steps violating ``SW^2(mu_k, mu_{k+1}) <= 2 tau (F_k - F_{k+1}) + rel_slack (1 + |F_k|)``.

    Returns a list of ``(k, gap, bound)`` tuples; empty means no violation.
    """
    tau = traj.tau if tau is None else tau
    out = []
    for k, gap in enumerate(traj.sw_gap_trace):
        f0, f1 = traj.energy_trace[k], traj.energy_trace[k + 1]
        bound = 2.0 * tau * (f0 - f1) + rel_slack * (1.0 + abs(f0))
        if gap > bound:
            out.append((k, gap, bound))
    return out


def monotonicity_violations(traj: Trajectory, slack: float = 1e-6):
    """Steps where ``F(mu_{k+1}) > F(mu_k) + slack``, as ``(k, F_k, F_{k+1})``."""
    e = traj.energy_trace
    return [(k, e[k], e[k + 1]) for k in range(len(e) - 1) if e[k + 1] > e[k] + slack]
