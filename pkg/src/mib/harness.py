"""Experiment runner: reproduces the benchmark's training traces, optimal-critic
bias/variance sweeps, encoder-gradient accuracy grids, and interpolation-scheme
comparisons at desk scale, emitting CSV artifacts plus a manifest."""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import bounds, critics, toy, training
from .autodiff import Tape, Tensor

EXPERIMENTS = ("fig2", "optimal_sweep", "gradient", "interp_compare", "table3")

DEFAULT_HIDDEN = (256, 256)
DEFAULT_EMBED = 32


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class EstimatorSpec:
    name: str
    alpha: float | None = None
    mode: str = "mixture"
    critic: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)
    marginal: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in bounds.ESTIMATOR_NAMES:
            raise ConfigError(f"unknown estimator {self.name!r}")
        if self.mode not in ("mixture", "linear", "product"):
            raise ConfigError(f"unknown interpolation mode {self.mode!r}")

    @property
    def label(self) -> str:
        lab = self.name
        if self.alpha is not None:
            lab += f"_a{self.alpha:g}"
        if self.name == "interpolated" and self.mode != "mixture":
            lab += f"_{self.mode}"
        return lab

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorSpec":
        if "name" not in d:
            raise ConfigError("estimator entry needs a name")
        return cls(name=d["name"], alpha=d.get("alpha"), mode=d.get("mode", "mixture"),
                   critic=d.get("critic", {}), baseline=d.get("baseline", {}),
                   marginal=d.get("marginal", {}))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dataset: str = "gaussian"  # gaussian | cubic | both
    estimators: tuple[EstimatorSpec, ...] = ()
    batch_sizes: tuple[int, ...] = (64,)
    mi_levels: tuple[float, ...] = (2.0, 4.0, 6.0, 8.0, 10.0)
    reps: int = 5000
    steps: int = 20000
    seed: int = 0
    dim: int = 20
    alphas: tuple[float, ...] = (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
    critic_kinds: tuple[str, ...] = ("joint", "separable")
    adam: training.AdamConfig = field(default_factory=training.AdamConfig)
    smooth_decay: float = 0.99
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.dataset not in ("gaussian", "cubic", "both"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if any(k < 2 for k in self.batch_sizes):
            raise ConfigError("batch sizes must be at least 2")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "experiment" not in d:
            raise ConfigError("config needs an experiment name")
        ests = tuple(EstimatorSpec.from_dict(e) for e in d.pop("estimators", []))
        adam = training.AdamConfig(**d.pop("adam", {}))
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key in ("batch_sizes", "mi_levels", "alphas", "critic_kinds"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(estimators=ests, adam=adam, **d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = [asdict(e) for e in self.estimators]
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return ExperimentConfig.from_dict(raw)


@dataclass
class SweepRecord:
    """Moments of one estimator's batch estimates against a known target."""

    estimator: str
    alpha: float | None
    batch_size: int
    target_mi: float
    mean: float
    stderr: float
    variance: float
    bias: float
    mse: float
    n_batches: int

    @classmethod
    def from_samples(cls, estimator: str, alpha, batch_size: int, target_mi: float,
                     samples: np.ndarray) -> "SweepRecord":
        samples = np.asarray(samples, dtype=np.float64)
        n = samples.size
        mean = float(samples.mean())
        var = float(samples.var())
        return cls(estimator=estimator, alpha=alpha, batch_size=batch_size,
                   target_mi=target_mi, mean=mean,
                   stderr=float(samples.std() / np.sqrt(n)),
                   variance=var, bias=mean - target_mi,
                   mse=float(np.mean((samples - target_mi) ** 2)), n_batches=n)


# ---------------------------------------------------------------------------
# optimal-critic evaluation

_OPTIMAL_FORMS = ("tuba", "nwj", "dv", "js", "infonce", "interpolated",
                  "infonce_tractable", "loo_upper", "reparam_nwj")


def optimal_estimate(espec: EstimatorSpec, spec: toy.GaussianPairSpec,
                     batch: toy.Batch) -> bounds.BoundResult:
    """Evaluate one estimator at its analytic optimal critic on one batch."""
    C = toy.log_conditional(spec, batch.x, batch.y, rho=batch.rho)
    lm = toy.log_marginal(spec, batch.y)
    return _optimal_from_cond(espec, C, lm)


def _optimal_from_cond(espec: EstimatorSpec, C: Tensor, lm: Tensor) -> bounds.BoundResult:
    name = espec.name
    K = C.shape[0]
    if name == "infonce":
        return bounds.infonce(C)
    if name == "infonce_tractable":
        return bounds.infonce_tractable(C)
    if name == "loo_upper":
        return bounds.loo_upper(C)
    if name == "reparam_nwj":
        return bounds.reparam_nwj(ad.diagonal(C), C, lm)
    if name == "interpolated":
        if espec.alpha is None:
            raise ConfigError("interpolated estimator needs alpha")
        if espec.mode == "linear":
            # each endpoint at its own optimal critic
            nce = bounds.infonce(C)
            nw = bounds.nwj(C - ad.reshape(lm, (K, 1)) + 1.0)
            obj = espec.alpha * nce.objective + (1.0 - espec.alpha) * nw.objective
            return bounds.BoundResult(float(obj.values), obj,
                                      {"clamp_count": nw.diagnostics["clamp_count"]})
        return bounds.interpolated(C, lm, espec.alpha, espec.mode)
    ratio = C - ad.reshape(lm, (K, 1))
    if name == "nwj":
        return bounds.nwj(ratio + 1.0)
    if name == "tuba":
        return bounds.tuba(ratio, Tensor(np.zeros(K)))  # a(y) = Z(y) = 1 at this critic
    if name == "dv":
        return bounds.dv(ratio)
    if name == "js":
        return bounds.js(ratio)
    raise ConfigError(f"estimator {name!r} has no analytic optimal critic")


def sweep_cell(especs, dim: int, K: int, target_mi: float, reps: int,
               seed: int, point_index: int) -> dict[str, np.ndarray]:
    """reps batch estimates per estimator, all estimators paired on each batch."""
    spec = toy.gaussian_pair(dim, toy.rho_for_mi(target_mi, dim))
    rng = toy.make_rng(seed, worker_id=point_index)
    out = {e.label: np.empty(reps) for e in especs}
    for b in range(reps):
        batch = toy.sample_joint(spec, K, rng)
        C = toy.log_conditional(spec, batch.x, batch.y)
        lm = toy.log_marginal(spec, batch.y)
        for e in especs:
            out[e.label][b] = _optimal_from_cond(e, C, lm).estimate
    return out


def _sweep_point(args):
    especs, dim, K, mi, reps, seed, idx = args
    samples = sweep_cell(especs, dim, K, mi, reps, seed, idx)
    return [SweepRecord.from_samples(e.label, e.alpha, K, mi, samples[e.label])
            for e in especs]


def run_optimal_sweep(config: ExperimentConfig, out_dir) -> list[SweepRecord]:
    especs = config.estimators or tuple(
        EstimatorSpec(n) for n in ("nwj", "js", "infonce", "loo_upper", "infonce_tractable"))
    for e in especs:
        if e.name not in _OPTIMAL_FORMS:
            raise ConfigError(f"estimator {e.name!r} has no analytic optimal critic")
    points = [(especs, config.dim, K, mi, config.reps, config.seed, idx)
              for idx, (K, mi) in enumerate(
                  (K, mi) for K in config.batch_sizes for mi in config.mi_levels)]
    records = [r for point in _map_points(_sweep_point, points, config.workers) for r in point]
    path = Path(out_dir) / f"optimal_sweep_{config.config_hash}.csv"
    _write_csv(path,
               ["estimator", "alpha", "batch_size", "target_mi", "mean", "stderr",
                "variance", "bias", "mse", "n_batches", "seed", "config_hash"],
               [[r.estimator, r.alpha if r.alpha is not None else "", r.batch_size,
                 r.target_mi, r.mean, r.stderr, r.variance, r.bias, r.mse, r.n_batches,
                 config.seed, config.config_hash] for r in records])
    return records


# ---------------------------------------------------------------------------
# encoder-gradient accuracy (differentiable sampling)


def gradient_cell(especs, dim: int, K: int, target_mi: float, reps: int,
                  seed: int, point_index: int = 0) -> dict[str, np.ndarray]:
    """Per-rep gradients of each optimal-critic estimate w.r.t. the encoder
    correlations, shape (reps, dim) per estimator label."""
    spec = toy.gaussian_pair(dim, toy.rho_for_mi(target_mi, dim))
    rng = toy.make_rng(seed, worker_id=point_index, stream_id=1)
    out = {e.label: np.full((reps, dim), np.nan) for e in especs}
    for b in range(reps):
        tape = Tape()
        batch = toy.sample_joint(spec, K, rng, differentiable=True, tape=tape)
        C = toy.log_conditional(spec, batch.x, batch.y, rho=batch.rho)
        lm = toy.log_marginal(spec, batch.y)
        for e in especs:
            res = _optimal_from_cond(e, C, lm)
            out[e.label][b] = ad.backward(res.objective)["rho"].values
    return out


def _gradient_point(args):
    especs, dim, K, mi, reps, seed, idx = args
    spec = toy.gaussian_pair(dim, toy.rho_for_mi(mi, dim))
    true_grad = toy.true_mi_grad(spec)
    grads = gradient_cell(especs, dim, K, mi, reps, seed, idx)
    rows = []
    for e in especs:
        g = grads[e.label]
        finite = np.all(np.isfinite(g), axis=1)
        nonfinite = int(np.sum(~finite))
        g = g[finite]
        if g.shape[0] == 0:
            rows.append([e.label, e.alpha, K, mi, np.nan, np.nan, 0, nonfinite])
            continue
        per_rep = np.mean((g - true_grad) ** 2, axis=1)
        rows.append([e.label, e.alpha if e.alpha is not None else "", K, mi,
                     float(per_rep.mean()),
                     float(per_rep.std() / np.sqrt(per_rep.size)),
                     int(per_rep.size), nonfinite])
    return rows


def run_gradient(config: ExperimentConfig, out_dir) -> list[list]:
    especs = config.estimators or (
        EstimatorSpec("nwj"),
        *(EstimatorSpec("interpolated", alpha=a) for a in config.alphas))
    points = [(especs, config.dim, K, mi, config.reps, config.seed, idx)
              for idx, (K, mi) in enumerate(
                  (K, mi) for K in config.batch_sizes for mi in config.mi_levels)]
    rows = [r for point in _map_points(_gradient_point, points, config.workers) for r in point]
    path = Path(out_dir) / f"gradient_{config.config_hash}.csv"
    _write_csv(path,
               ["estimator", "alpha", "batch_size", "target_mi", "grad_mse",
                "grad_mse_stderr", "n_reps", "nonfinite", "seed", "config_hash"],
               [[*r, config.seed, config.config_hash] for r in rows])
    # best alpha per (K, MI) over the interpolated family
    best_rows = []
    for K in config.batch_sizes:
        for mi in config.mi_levels:
            cell = [r for r in rows
                    if r[2] == K and r[3] == mi and r[0].startswith("interpolated")
                    and np.isfinite(r[4])]
            if not cell:
                continue
            best = min(cell, key=lambda r: r[4])
            best_rows.append([K, mi, best[1], best[4]])
    best_path = Path(out_dir) / f"gradient_best_alpha_{config.config_hash}.csv"
    _write_csv(best_path,
               ["batch_size", "target_mi", "best_alpha", "best_grad_mse", "seed",
                "config_hash"],
               [[*r, config.seed, config.config_hash] for r in best_rows])
    return rows


# ---------------------------------------------------------------------------
# interpolation-scheme comparison


def run_interp_compare(config: ExperimentConfig, out_dir) -> list[SweepRecord]:
    K = config.batch_sizes[0]
    records = []
    for mi in config.mi_levels:
        especs = tuple(EstimatorSpec("interpolated", alpha=a, mode=m)
                       for m in ("mixture", "linear", "product") for a in config.alphas)
        samples = sweep_cell(especs, config.dim, K, mi, config.reps, config.seed,
                             point_index=int(mi * 1000))
        for e in especs:
            rec = SweepRecord.from_samples(e.label, e.alpha, K, mi, samples[e.label])
            records.append((e.mode, rec))
    path = Path(out_dir) / f"interp_compare_{config.config_hash}.csv"
    _write_csv(path,
               ["mode", "alpha", "batch_size", "target_mi", "mean", "stderr", "variance",
                "bias", "mse", "n_batches", "seed", "config_hash"],
               [[mode, r.alpha, r.batch_size, r.target_mi, r.mean, r.stderr, r.variance,
                 r.bias, r.mse, r.n_batches, config.seed, config.config_hash]
                for mode, r in records])
    return [r for _, r in records]


# ---------------------------------------------------------------------------
# trained-critic experiments


def _dataset_spec(config: ExperimentConfig, dataset: str):
    base = toy.gaussian_pair(config.dim, toy.rho_for_mi(config.mi_levels[0], config.dim))
    if dataset == "gaussian":
        return base
    W = toy.sample_transform(config.dim, toy.make_rng(config.seed, worker_id=97))
    return toy.CubicTransformSpec(base=base, W=W)


def _staircase(config: ExperimentConfig) -> tuple[tuple[int, float], ...]:
    n = len(config.mi_levels)
    return tuple((config.steps * i // n, mi) for i, mi in enumerate(config.mi_levels))


def build_critic(espec: EstimatorSpec, kind: str, dim: int,
                 gaussian: toy.GaussianPairSpec) -> critics.Critic:
    cfg = espec.critic
    hidden = tuple(cfg.get("hidden_sizes", DEFAULT_HIDDEN))
    activation = cfg.get("activation", "relu")
    init_scale = cfg.get("init_scale", 1.0)
    if kind == "separable":
        return critics.make_separable(dim, dim, hidden, cfg.get("embed_dim", DEFAULT_EMBED),
                                      activation, init_scale)
    if kind == "joint":
        return critics.make_joint(dim, dim, hidden, activation, init_scale)
    if kind == "known_conditional":
        return critics.KnownConditionalCritic(gaussian)
    if kind == "reparameterized":
        return critics.ReparameterizedCritic(
            gaussian, critics.MLPSpec(dim, hidden, 1, activation, init_scale))
    raise ConfigError(f"unknown critic kind {kind!r}")


def build_baseline(espec: EstimatorSpec, dim: int) -> critics.Baseline | None:
    cfg = espec.baseline
    kind = cfg.get("kind")
    if kind is None:
        if espec.name == "tuba":
            kind = "learned"
        elif espec.name == "mine":
            kind = "ema"
        else:
            return None
    if kind == "constant":
        return critics.ConstantBaseline(value=cfg.get("value", 1.0))
    if kind == "learned":
        hidden = tuple(cfg.get("hidden_sizes", DEFAULT_HIDDEN))
        return critics.LearnedBaseline(critics.MLPSpec(dim, hidden, 1))
    if kind == "ema":
        return critics.EmaBaseline(decay=cfg.get("decay", 0.99))
    raise ConfigError(f"unknown baseline kind {kind!r}")


def _marginal_net(espec: EstimatorSpec, dim: int) -> critics.MLPSpec | None:
    if espec.name not in ("interpolated", "reparam_nwj"):
        return None
    kind = espec.marginal.get("kind", "learned")
    if kind == "known":
        return None
    hidden = tuple(espec.marginal.get("hidden_sizes", DEFAULT_HIDDEN))
    return critics.MLPSpec(dim, hidden, 1, espec.marginal.get("activation", "relu"))


def make_train_config(config: ExperimentConfig, espec: EstimatorSpec, dataset: str,
                      kind: str, batch_size: int, schedule, steps: int,
                      adam: training.AdamConfig | None = None) -> training.TrainConfig:
    spec = _dataset_spec(config, dataset)
    gaussian = spec.base if isinstance(spec, toy.CubicTransformSpec) else spec
    needs_critic = espec.name not in ("infonce_tractable", "loo_upper", "reparam_nwj", "ba")
    critic = build_critic(espec, kind, config.dim, gaussian) if needs_critic else None
    return training.TrainConfig(
        estimator=espec.name, critic=critic, dataset=spec, batch_size=batch_size,
        steps=steps, seed=config.seed, alpha=espec.alpha, mode=espec.mode,
        baseline=build_baseline(espec, config.dim),
        marginal_net=_marginal_net(espec, config.dim),
        mi_schedule=tuple(schedule), adam=adam or config.adam,
        smooth_decay=config.smooth_decay)


def _fig2_point(args):
    config, espec, dataset, kind = args
    tc = make_train_config(config, espec, dataset, kind, config.batch_sizes[0],
                           _staircase(config), config.steps)
    trace = training.train_estimator(tc)
    return dataset, espec.label, kind, trace


def run_fig2(config: ExperimentConfig, out_dir) -> list[Path]:
    especs = config.estimators or (
        EstimatorSpec("nwj"), EstimatorSpec("js"), EstimatorSpec("infonce"),
        *(EstimatorSpec("interpolated", alpha=a) for a in (0.01, 0.1, 0.5)))
    datasets = ("gaussian", "cubic") if config.dataset == "both" else (config.dataset,)
    points = [(config, e, ds, kind)
              for ds in datasets for e in especs for kind in config.critic_kinds
              if not (e.name in ("infonce_tractable", "loo_upper", "reparam_nwj")
                      and kind != "known_conditional")]
    files = []
    for dataset, label, kind, trace in _map_points(_fig2_point, points, config.workers):
        smoothed = training.smooth_trace(trace, config.smooth_decay)
        path = Path(out_dir) / f"fig2_{dataset}_{label}_{kind}_{config.config_hash}.csv"
        _write_csv(path,
                   ["step", "estimate", "smoothed", "objective", "target_mi",
                    "clamp_count", "seed", "config_hash"],
                   [[r.step, r.estimate, float(smoothed[i]), r.objective, r.target_mi,
                     r.clamp_count, config.seed, config.config_hash]
                    for i, r in enumerate(trace.rows)])
        files.append(path)
    return files


def _table3_point(args):
    config, espec, dataset, kind, width, lr, K, mi = args
    espec_sized = EstimatorSpec(espec.name, espec.alpha, espec.mode,
                                {**espec.critic, "hidden_sizes": [width, width]},
                                espec.baseline, espec.marginal)
    tc = make_train_config(config, espec_sized, dataset, kind, K, ((0, mi),),
                           config.steps, training.AdamConfig(learning_rate=lr))
    trace = training.train_estimator(tc)
    final = training.segment_final_estimates(trace, config.smooth_decay)[mi]
    return [dataset, espec.label, espec.alpha if espec.alpha is not None else "",
            mi, final, kind, width, lr, K, config.steps]


def run_table3(config: ExperimentConfig, out_dir,
               widths=(256,), lrs=(5e-4,)) -> list[list]:
    especs = config.estimators or (
        EstimatorSpec("nwj"), EstimatorSpec("infonce"),
        EstimatorSpec("interpolated", alpha=0.01), EstimatorSpec("js"),
        EstimatorSpec("reparam_nwj"))
    datasets = ("gaussian", "cubic") if config.dataset == "both" else (config.dataset,)
    points = []
    for ds in datasets:
        for e in especs:
            kinds = ("known_conditional",) if e.name in (
                "infonce_tractable", "loo_upper", "reparam_nwj") else config.critic_kinds
            for kind in kinds:
                for width in widths:
                    for lr in lrs:
                        for K in config.batch_sizes:
                            for mi in config.mi_levels:
                                points.append((config, e, ds, kind, width, lr, K, mi))
    rows = list(_map_points(_table3_point, points, config.workers))
    # best per (dataset, estimator, MI) across the hyperparameter grid
    best: dict[tuple, list] = {}
    for r in rows:
        key = (r[0], r[1], r[3])
        if key not in best or r[4] > best[key][4]:
            best[key] = r
    best_rows = [best[k] for k in sorted(best, key=lambda k: (k[0], k[1], k[2]))]
    path = Path(out_dir) / f"table3_{config.config_hash}.csv"
    _write_csv(path,
               ["dataset", "estimator", "alpha", "target_mi", "estimate", "critic_kind",
                "width", "learning_rate", "batch_size", "steps", "seed", "config_hash"],
               [[*r, config.seed, config.config_hash] for r in best_rows])
    return best_rows


# ---------------------------------------------------------------------------
# plumbing


def _map_points(fn, points, workers: int):
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(fn, points)
    else:
        for p in points:
            yield fn(p)


def _format(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_format(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


_FIGURE_OF = {"fig2": "fig2", "optimal_sweep": "fig3", "gradient": "fig4",
              "interp_compare": "fig7", "table3": None}


def run_experiment(config: ExperimentConfig, out_dir, echo=print, bits: bool = False,
                   full_grid: bool = False) -> dict:
    """Dispatch one experiment, write its CSVs, and merge the manifest entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    before = set(out_dir.glob("*.csv"))
    runner = {"fig2": run_fig2, "optimal_sweep": run_optimal_sweep,
              "gradient": run_gradient, "interp_compare": run_interp_compare,
              "table3": run_table3}[config.experiment]
    if config.experiment == "table3" and full_grid:
        result = run_table3(config, out_dir, widths=(256, 512), lrs=(5e-4, 1e-3))
    else:
        result = runner(config, out_dir)
    produced = sorted(p.name for p in set(out_dir.glob("*.csv")) - before | _own_files(out_dir, config))
    wall = time.perf_counter() - started
    entry = {
        "experiment": config.experiment,
        "files": produced,
        "config": config.to_dict(),
        "seed": config.seed,
        "wall_clock_seconds": wall,
    }
    fig = _FIGURE_OF[config.experiment]
    entry["figures"] = ([{"figure": fig, "inputs": produced}] if fig else [])
    _merge_manifest(out_dir / "manifest.json", config.config_hash, entry)
    if isinstance(result, list) and result and isinstance(result[0], SweepRecord):
        unit = 1.0 / np.log(2.0) if bits else 1.0
        suffix = "bits" if bits else "nats"
        for r in result[:10]:
            echo(f"{r.estimator} K={r.batch_size} MI={r.target_mi * unit:.3f} "
                 f"mean={r.mean * unit:.3f} {suffix} (bias {r.bias * unit:+.3f})")
    return entry


def _own_files(out_dir: Path, config: ExperimentConfig) -> set[Path]:
    return set(out_dir.glob(f"*_{config.config_hash}.csv"))


def _merge_manifest(path: Path, key: str, entry: dict):
    manifest = {"runs": {}}
    if path.exists():
        manifest = json.loads(path.read_text())
    manifest.setdefault("runs", {})[key] = entry
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Desk-scale defaults per experiment; overrides win."""
    base: dict = {"experiment": experiment}
    if experiment == "fig2":
        base.update(dataset="both", batch_sizes=(64,), steps=5000)
    elif experiment == "optimal_sweep":
        base.update(batch_sizes=(16, 64, 256), reps=5000)
    elif experiment == "gradient":
        base.update(batch_sizes=(16, 64, 256), mi_levels=(2.0, 6.0, 10.0), reps=256)
    elif experiment == "interp_compare":
        base.update(batch_sizes=(64,), mi_levels=(2.0, 6.0, 10.0), reps=3000)
    elif experiment == "table3":
        base.update(dataset="both", batch_sizes=(64,), steps=20000)
    base.update(overrides)
    return ExperimentConfig.from_dict(base)
