"""Named desk-scale experiments: configuration schema, runners and result bundles.

A configuration is a flat mapping.  ``resolve_config`` fills defaults for the
chosen experiment and rejects unknown keys or bad values before anything is
computed; ``run_experiment`` returns an ``ExperimentResult`` that
``write_bundle`` turns into CSV/JSON files.
"""

from __future__ import annotations

import json
import os
import platform
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import radius_stats, sym_kl_gaussians, sym_kl_grid
from .errors import CapabilityError, FlowAborted, InvalidArgument
from .functionals import (
    GridEntropy,
    Interaction,
    LogDriftPotential,
    PotentialEnergy,
    PowerKernel,
    QuadraticPotential,
    W2ToTargetExact,
    WeightedSum,
)
from .measures import (
    GaussianMeasure,
    GridMeasure,
    ParticleCloud,
    derive_seed,
    make_rng,
    random_spd_matrix,
    sample_gaussian,
)
from .oracles import OuSpec, euler_maruyama, ou_analytic
from .sliced import QuantileGrid, sliced_wasserstein, sw2_gaussian_isotropic
from .solver import SolverConfig, Trajectory, direct_minimize, energy_gap_check, monotonicity_violations, run_flow

EXPERIMENTS = (
    "gaussian-flow",
    "aggregation",
    "aggregation-drift",
    "disk",
    "compare-trajectories",
    "sw-estimate",
    "ula-baseline",
)


class ConfigError(InvalidArgument):
    """The experiment configuration is malformed or inconsistent."""


_SOLVER_KEYS = {
    "tau": float,
    "n_outer": int,
    "n_inner": int,
    "n_projections": int,
    "quantile_M": (int, type(None)),
    "inner_step": float,
    "inner_method": str,
    "momentum": float,
    "dilation": bool,
    "warm_start": bool,
    "resample": str,
    "keep_best": bool,
}

_TYPES = {
    "experiment": str,
    "parameterization": str,
    "seed": int,
    "d": int,
    "n": int,
    "grid_n": int,
    "grid_low": (float, type(None)),
    "grid_high": (float, type(None)),
    "init_mean": float,
    "init_std": float,
    "antithetic": bool,
    "entropy": bool,
    "spd": str,
    "a_iso": float,
    "target_mean": str,
    "kernel_a": float,
    "kernel_b": float,
    "drift_alpha": float,
    "drift_beta": float,
    "target_spread": float,
    "shift": float,
    "step_h": float,
    "horizon": float,
    **_SOLVER_KEYS,
}

_SOLVER_DEFAULTS = dict(
    n_projections=100,
    quantile_M=None,
    momentum=0.9,
    dilation=False,
    warm_start=True,
    resample="step",
    keep_best=True,
)

DEFAULTS = {
    "gaussian-flow": dict(
        parameterization="grid", d=2, n=500, grid_n=30, grid_low=None, grid_high=None,
        init_mean=0.0, init_std=1.0, entropy=True, spd="random", a_iso=1.0, target_mean="random",
        **{**_SOLVER_DEFAULTS, "dilation": True, "n_projections": 50},
        tau=0.1, n_outer=80, n_inner=20, inner_step=0.02, inner_method="scaled",
    ),
    "aggregation": dict(
        parameterization="particles", d=2, n=1000, grid_n=50, grid_low=-1.0, grid_high=1.0,
        init_std=0.25, antithetic=False, kernel_a=4.0, kernel_b=2.0,
        **_SOLVER_DEFAULTS, tau=0.05, n_outer=200, n_inner=20, inner_step=0.05, inner_method="plain",
    ),
    "aggregation-drift": dict(
        parameterization="particles", d=2, n=1000, grid_n=50, grid_low=-1.5, grid_high=1.5,
        init_std=0.25, antithetic=True, kernel_a=2.0, kernel_b=0.0, drift_alpha=1.0, drift_beta=4.0,
        **_SOLVER_DEFAULTS, tau=0.05, n_outer=200, n_inner=20, inner_step=0.05, inner_method="plain",
    ),
    "disk": dict(
        parameterization="particles", d=2, n=1000, grid_n=50, grid_low=-1.5, grid_high=1.5,
        init_std=0.25, antithetic=False, kernel_a=2.0, kernel_b=0.0,
        **_SOLVER_DEFAULTS, tau=0.05, n_outer=200, n_inner=20, inner_step=0.05, inner_method="plain",
    ),
    "compare-trajectories": dict(
        d=2, n=20, init_mean=0.0, init_std=1.0, target_spread=1.0,
        **{**_SOLVER_DEFAULTS, "dilation": True}, tau=0.1, n_outer=60, n_inner=50, inner_step=0.05,
        inner_method="plain",
    ),
    "sw-estimate": dict(d=2, n=10_000, shift=1.0, n_projections=2000, quantile_M=100),
    "ula-baseline": dict(
        d=2, n=10_000, init_mean=0.0, init_std=1.0, spd="isotropic", a_iso=1.0, target_mean="zero",
        step_h=1e-3, horizon=8.0,
    ),
}

_CHOICES = {
    "parameterization": ("grid", "particles"),
    "inner_method": ("plain", "momentum", "adaptive", "scaled"),
    "resample": ("epoch", "step"),
    "spd": ("random", "isotropic"),
    "target_mean": ("random", "zero"),
}


# ---------------------------------------------------------------------------
# configuration


def parse_value(text: str):
    """Literal for a key=value line: bool, none, int, float or bare string."""
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t.strip("\"'")


def load_config_text(text: str) -> dict:
    """Parse a JSON object or ``key = value`` lines (``#`` starts a comment)."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("JSON config must be an object")
        return data
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return load_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _coerce(key, value):
    want = _TYPES[key]
    kinds = want if isinstance(want, tuple) else (want,)
    if value is None:
        if type(None) in kinds:
            return None
        raise ConfigError(f"{key} may not be empty")
    if bool in kinds:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{key} must be true or false, got {value!r}")
    if int in kinds:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if float in kinds:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        if not np.isfinite(value):
            raise ConfigError(f"{key} must be finite")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def resolve_config(raw: dict, seed_override: int | None = None) -> dict:
    """Defaults + validation.  Raises ``ConfigError`` on any problem."""
    if "experiment" not in raw:
        raise ConfigError("missing required key 'experiment'")
    name = raw["experiment"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose one of {', '.join(EXPERIMENTS)}")
    allowed = set(DEFAULTS[name]) | {"experiment", "seed"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {', '.join(unknown)}")
    cfg = {"experiment": name, "seed": 0, **DEFAULTS[name]}
    for key, value in raw.items():
        cfg[key] = _coerce(key, value)
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    _validate(cfg)
    return cfg


def _validate(cfg):
    for key, choices in _CHOICES.items():
        if key in cfg and cfg[key] not in choices:
            raise ConfigError(f"{key} must be one of {choices}, got {cfg[key]!r}")
    positive = ("d", "n", "grid_n", "init_std", "a_iso", "target_spread", "step_h", "horizon")
    for key in positive:
        if key in cfg and not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive, got {cfg[key]}")
    if cfg.get("seed", 0) < 0:
        raise ConfigError("seed must be nonnegative")
    if "tau" in cfg:
        try:
            solver_config(cfg)
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from exc
    if cfg["experiment"] == "gaussian-flow" and cfg["parameterization"] == "particles" and cfg["entropy"]:
        raise ConfigError("entropy needs a density: use parameterization=grid or entropy=false")
    if cfg.get("inner_method") == "scaled" and cfg.get("parameterization", "particles") != "grid":
        raise ConfigError("inner_method=scaled applies to grid weights only")
    if "kernel_a" in cfg and not cfg["kernel_a"] > cfg["kernel_b"] >= 0:
        raise ConfigError("kernel exponents need kernel_a > kernel_b >= 0")
    if "drift_beta" in cfg and not cfg["drift_beta"] > 0:
        raise ConfigError("drift_beta must be positive")
    if cfg.get("parameterization") == "grid":
        lo, hi = cfg.get("grid_low"), cfg.get("grid_high")
        if (lo is None) != (hi is None) or (lo is not None and not hi > lo):
            raise ConfigError("grid_low and grid_high must both be set with grid_high > grid_low")
        if cfg["grid_n"] < 2:
            raise ConfigError("grid_n must be at least 2")
    if cfg["experiment"] == "sw-estimate" and cfg["n_projections"] < 1:
        raise ConfigError("n_projections must be >= 1")


def solver_config(cfg: dict) -> SolverConfig:
    kw = {k: cfg[k] for k in _SOLVER_KEYS if k in cfg}
    return SolverConfig(seed=derive_seed(cfg["seed"], 2), **kw)


# ---------------------------------------------------------------------------
# results


@dataclass
class ExperimentResult:
    config: dict
    summary: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    measures: dict = field(default_factory=dict)  # name -> measure
    trajectory: Trajectory | None = None
    extra_trajectories: dict = field(default_factory=dict)
    aborted: str | None = None


def trace_table(traj: Trajectory):
    rows = []
    for k, (f, t) in enumerate(zip(traj.energy_trace, traj.times)):
        gap = traj.sw_gap_trace[k - 1] if k > 0 else None
        rows.append([k, t, f, gap])
    return ["step", "t", "energy", "sw_gap"], rows


def timing_table(traj: Trajectory):
    return ["step", "wall_ms"], [[k + 1, w] for k, w in enumerate(traj.wall_ms)]


def flow_checks(traj: Trajectory) -> dict:
    return {
        "monotonicity_violations": len(monotonicity_violations(traj)),
        "gap_violations": len(energy_gap_check(traj)),
    }


def _gaussian_cloud(rng, n, d, mean, std, antithetic=False):
    g = GaussianMeasure(np.full(d, mean), std**2 * np.eye(d))
    if not antithetic:
        return sample_gaussian(g, n, rng)
    if n % 2:
        raise ConfigError("antithetic sampling needs an even particle count")
    half = sample_gaussian(g, n // 2, rng).points - g.mean
    # point-symmetric start: the symmetry is preserved by every energy used here
    return ParticleCloud(np.concatenate([half, -half]) + g.mean)


def _grid_box(cfg, centers_and_scales):
    if cfg["grid_low"] is not None:
        d = cfg["d"]
        return np.full(d, cfg["grid_low"]), np.full(d, cfg["grid_high"])
    lo = np.min([c - 4.0 * s for c, s in centers_and_scales], axis=0)
    hi = np.max([c + 4.0 * s for c, s in centers_and_scales], axis=0)
    return lo, hi


def _run_flow_safely(mu0, energy, scfg, runner=run_flow):
    try:
        return runner(mu0, energy, scfg), None
    except FlowAborted as exc:
        return exc.trajectory, str(exc)


def _gaussian_problem(cfg):
    d = cfg["d"]
    rng = make_rng(derive_seed(cfg["seed"], 1))
    A = random_spd_matrix(d, rng) if cfg["spd"] == "random" else cfg["a_iso"] * np.eye(d)
    b = rng.standard_normal(d) if cfg["target_mean"] == "random" else np.zeros(d)
    return A, b


def run_gaussian_flow(cfg) -> ExperimentResult:
    d = cfg["d"]
    A, b = _gaussian_problem(cfg)
    target = GaussianMeasure(b, np.linalg.inv(A))
    V = QuadraticPotential(A, b)
    init = GaussianMeasure(np.full(d, cfg["init_mean"]), cfg["init_std"] ** 2 * np.eye(d))
    if cfg["parameterization"] == "grid":
        sd_t = np.sqrt(np.linalg.eigvalsh(target.covariance).max())
        lo, hi = _grid_box(cfg, [(init.mean, cfg["init_std"]), (b, sd_t)])
        mu0 = GridMeasure.regular(lo, hi, [cfg["grid_n"]] * d, density=lambda x: np.exp(init.logpdf(x)))
    else:
        mu0 = sample_gaussian(init, cfg["n"], make_rng(derive_seed(cfg["seed"], 3)))
    energy = WeightedSum([PotentialEnergy(V), GridEntropy()]) if cfg["entropy"] else PotentialEnergy(V)
    scfg = solver_config(cfg)
    traj, aborted = _run_flow_safely(mu0, energy, scfg)

    # potential-only flows move the mean like the OU process; non-dilated SW flows run d times slower
    ou = OuSpec(A, b, mu0.mean(), mu0.covariance() + 1e-12 * np.eye(d))
    slow = 1.0 if cfg["dilation"] else 1.0 / d
    mean_rows, errs = [], []
    for k, mu in enumerate(traj.snapshots):
        t = k * scfg.tau
        ref = ou_analytic(ou, t * slow).mean
        m = mu.mean()
        errs.append(float(np.max(np.abs(m - ref))))
        mean_rows.append([k, t, *m, *ref])
    header = ["step", "t"] + [f"mean_{i + 1}" for i in range(d)] + [f"ou_mean_{i + 1}" for i in range(d)]

    summary = {
        "target_mean": b.tolist(),
        "target_A": A.tolist(),
        "mean_max_abs_error": max(errs),
        "final_energy": traj.energy_trace[-1],
        **flow_checks(traj),
    }
    if cfg["parameterization"] == "grid":
        kl = [sym_kl_grid(mu, target.logpdf) for mu in (traj.snapshots[0], traj.snapshots[-1])]
        summary["initial_symkl"], summary["final_symkl"] = kl
        moment = GaussianMeasure(traj.final.mean(), traj.final.covariance())
        summary["final_symkl_moment_matched"] = sym_kl_gaussians(moment, target)
        summary["grid_min_energy"] = energy.value(
            GridMeasure.from_density(mu0.support, np.exp(target.logpdf(mu0.support) - target.logpdf(b)), mu0.cell_volume)
        )
    return ExperimentResult(
        cfg, summary,
        tables={"energy_trace": trace_table(traj), "timing": timing_table(traj), "means": (header, mean_rows)},
        measures={"initial_measure": traj.snapshots[0], "final_measure": traj.final},
        trajectory=traj, aborted=aborted,
    )


def _aggregation_energy(cfg):
    energy = Interaction(PowerKernel(cfg["kernel_a"], cfg["kernel_b"]))
    if cfg["experiment"] == "aggregation-drift":
        drift = PotentialEnergy(LogDriftPotential(cfg["drift_alpha"] / cfg["drift_beta"]))
        energy = WeightedSum([energy, drift])
    return energy


def run_aggregation(cfg) -> ExperimentResult:
    d = cfg["d"]
    if cfg["parameterization"] == "grid":
        std = cfg["init_std"]
        mu0 = GridMeasure.regular(
            np.full(d, cfg["grid_low"]), np.full(d, cfg["grid_high"]), [cfg["grid_n"]] * d,
            density=lambda x: np.exp(-0.5 * np.sum(x * x, axis=1) / std**2),
        )
    else:
        mu0 = _gaussian_cloud(make_rng(derive_seed(cfg["seed"], 3)), cfg["n"], d, 0.0,
                              cfg["init_std"], cfg["antithetic"])
    energy = _aggregation_energy(cfg)
    traj, aborted = _run_flow_safely(mu0, energy, solver_config(cfg))
    stats = [radius_stats(mu) for mu in traj.snapshots]
    keys = list(stats[0])
    rows = [[k, k * traj.tau, *(s[c] for c in keys)] for k, s in enumerate(stats)]
    summary = {
        "final_radius": stats[-1],
        "final_center": traj.final.mean().tolist(),
        "final_energy": traj.energy_trace[-1],
        **flow_checks(traj),
    }
    return ExperimentResult(
        cfg, summary,
        tables={"energy_trace": trace_table(traj), "timing": timing_table(traj),
                "radius_stats": (["step", "t", *keys], rows)},
        measures={"initial_measure": traj.snapshots[0], "final_measure": traj.final},
        trajectory=traj, aborted=aborted,
    )


def hausdorff(x, y) -> float:
    dist = np.sqrt(np.sum((np.asarray(x)[:, None, :] - np.asarray(y)[None, :, :]) ** 2, axis=2))
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def run_compare_trajectories(cfg) -> ExperimentResult:
    d, n = cfg["d"], cfg["n"]
    rng = make_rng(derive_seed(cfg["seed"], 1))
    target = ParticleCloud(cfg["target_spread"] * rng.uniform(-1.0, 1.0, size=(n, d)))
    mu0 = _gaussian_cloud(make_rng(derive_seed(cfg["seed"], 3)), n, d, cfg["init_mean"], cfg["init_std"])
    energy = W2ToTargetExact(target)
    scfg = solver_config(cfg)
    traj, aborted = _run_flow_safely(mu0, energy, scfg)
    direct, aborted_direct = _run_flow_safely(mu0, energy, scfg, runner=direct_minimize)
    f0 = traj.energy_trace[0]
    summary = {
        "initial_energy": f0,
        "sw_jko_final_ratio": traj.energy_trace[-1] / f0,
        "direct_final_ratio": direct.energy_trace[-1] / f0,
        "sw_jko_hausdorff": hausdorff(traj.final.points, target.points),
        "direct_hausdorff": hausdorff(direct.final.points, target.points),
        **flow_checks(traj),
    }
    return ExperimentResult(
        cfg, summary,
        tables={"energy_trace": trace_table(traj), "timing": timing_table(traj),
                "energy_trace_direct": trace_table(direct)},
        measures={"initial_measure": mu0, "final_measure": traj.final,
                  "final_measure_direct": direct.final, "target": target},
        trajectory=traj, extra_trajectories={"direct": direct},
        aborted=aborted or aborted_direct,
    )


def run_sw_estimate(cfg) -> ExperimentResult:
    d, n = cfg["d"], cfg["n"]
    g1 = GaussianMeasure(np.zeros(d), np.eye(d))
    shift = np.zeros(d)
    shift[0] = cfg["shift"]
    g2 = GaussianMeasure(shift, np.eye(d))
    x = sample_gaussian(g1, n, make_rng(derive_seed(cfg["seed"], 1)))
    y = sample_gaussian(g2, n, make_rng(derive_seed(cfg["seed"], 2)))
    q = None if cfg["quantile_M"] is None else QuantileGrid(cfg["quantile_M"])
    est = sliced_wasserstein(x, y, cfg["n_projections"], derive_seed(cfg["seed"], 4), q)
    summary = {
        "value": est.value,
        "std_error": est.std_error,
        "closed_form": sw2_gaussian_isotropic(g1, g2),
        "projection_seed": est.seed,
    }
    return ExperimentResult(cfg, summary)


def run_ula(cfg) -> ExperimentResult:
    d = cfg["d"]
    A, b = _gaussian_problem(cfg)
    V = QuadraticPotential(A, b)
    x0 = _gaussian_cloud(make_rng(derive_seed(cfg["seed"], 3)), cfg["n"], d, cfg["init_mean"], cfg["init_std"])
    h, T = cfg["step_h"], cfg["horizon"]
    checkpoints = sorted(set(np.arange(0.0, T + 1e-12, 1.0).tolist()) | {T})
    snaps = euler_maruyama(V.gradient, x0, h, T, make_rng(derive_seed(cfg["seed"], 5)), checkpoints)
    ou = OuSpec(A, b, x0.mean(), x0.covariance())
    rows = []
    for t in checkpoints:
        c = snaps[t]
        ref = ou_analytic(ou, t)
        rows.append([t, *c.mean(), *c.covariance().ravel(), *ref.mean, *ref.covariance.ravel()])
    idx = [f"{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    header = (["t"] + [f"mean_{i + 1}" for i in range(d)] + [f"cov_{s}" for s in idx]
              + [f"ou_mean_{i + 1}" for i in range(d)] + [f"ou_cov_{s}" for s in idx])
    final = snaps[T]
    stationary = np.linalg.inv(A)
    summary = {
        "final_mean": final.mean().tolist(),
        "final_covariance": final.covariance().tolist(),
        "mean_max_abs_error": float(np.max(np.abs(final.mean() - b))),
        "covariance_max_rel_error": float(np.max(np.abs(final.covariance() - stationary)) / np.max(np.abs(stationary))),
    }
    return ExperimentResult(cfg, summary, tables={"moments": (header, rows)}, measures={"final_measure": final})


_RUNNERS = {
    "gaussian-flow": run_gaussian_flow,
    "aggregation": run_aggregation,
    "aggregation-drift": run_aggregation,
    "disk": run_aggregation,
    "compare-trajectories": run_compare_trajectories,
    "sw-estimate": run_sw_estimate,
    "ula-baseline": run_ula,
}


def run_experiment(cfg: dict) -> ExperimentResult:
    """Run a resolved configuration (see ``resolve_config``)."""
    try:
        return _RUNNERS[cfg["experiment"]](cfg)
    except CapabilityError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path, header, rows, comments=()):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_measure(path, mu):
    d = mu.d
    header = [f"x_{i + 1}" for i in range(d)]
    if isinstance(mu, GridMeasure):
        rows = [[*x, w] for x, w in zip(mu.support, mu.weights)]
        write_csv(path, header + ["weight"], rows, comments=[f"cell_volume={_fmt(mu.cell_volume)}"])
    else:
        write_csv(path, header, mu.points.tolist())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def write_bundle(result: ExperimentResult, out_dir, wall_seconds: float | None = None):
    """Write config echo, summary, CSV tables and measure dumps into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(result.config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary = dict(result.summary)
    if result.aborted:
        summary["aborted"] = result.aborted
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, (header, rows) in result.tables.items():
        write_csv(os.path.join(out_dir, f"{name}.csv"), header, rows)
    for name, mu in result.measures.items():
        write_measure(os.path.join(out_dir, f"{name}.csv"), mu)
    # run metadata is the only file allowed to differ between identical runs
    from . import __version__

    meta = {
        "package_version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "wall_seconds": wall_seconds,
        "mode": result.trajectory.mode if result.trajectory is not None else None,
        "seed": result.config["seed"],
    }
    with open(os.path.join(out_dir, "run_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
