"""Adam and the training loop that maximizes a chosen bound over critic,
baseline, and marginal parameters, with an optional stepped-MI schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import bounds, critics, toy
from .autodiff import Tape, Tensor


class NumericAbort(Exception):
    """Raised when a training objective stops being finite."""

    def __init__(self, step: int, diagnostics: dict):
        super().__init__(f"non-finite objective at step {step}: {diagnostics}")
        self.step = step
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, config: AdamConfig) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam descent step on the supplied gradients."""
    t = state.t + 1
    new_params, new_m, new_v = {}, {}, {}
    c1 = 1.0 - config.beta1 ** t
    c2 = 1.0 - config.beta2 ** t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ad.ShapeMismatch("adam_step", p.shape, g.shape)
        m = config.beta1 * state.m[k] + (1.0 - config.beta1) * g
        v = config.beta2 * state.v[k] + (1.0 - config.beta2) * g * g
        new_params[k] = p - config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new_m[k], new_v[k] = m, v
    return new_params, AdamState(new_m, new_v, t)


@dataclass(frozen=True)
class TrainConfig:
    estimator: str
    critic: critics.Critic | None
    dataset: toy.GaussianPairSpec | toy.CubicTransformSpec
    batch_size: int = 64
    steps: int = 20000
    seed: int = 0
    alpha: float | None = None
    mode: str = "mixture"
    baseline: critics.Baseline | None = None
    marginal_net: critics.MLPSpec | None = None  # learned log q(y) where one is trained
    mi_schedule: tuple[tuple[int, float], ...] = ()
    adam: AdamConfig = field(default_factory=AdamConfig)
    smooth_decay: float = 0.99

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        starts = [s for s, _ in self.mi_schedule]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise ValueError("mi_schedule steps must be strictly increasing")


@dataclass
class TraceRow:
    step: int
    estimate: float
    objective: float
    clamp_count: int
    target_mi: float


@dataclass
class Trace:
    rows: list[TraceRow] = field(default_factory=list)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.rows])

    @property
    def target_mis(self) -> np.ndarray:
        return np.array([r.target_mi for r in self.rows])

    def __len__(self):
        return len(self.rows)


def smooth_trace(values, decay: float) -> np.ndarray:
    """Exponential moving average of a series, seeded with its first value."""
    values = np.asarray([r.estimate for r in values.rows] if isinstance(values, Trace) else values,
                        dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot smooth an empty trace")
    if not (0.0 <= decay < 1.0):
        raise ValueError("decay must lie in [0, 1)")
    out = np.empty_like(values)
    acc = values[0]
    for i, v in enumerate(values):
        acc = decay * acc + (1.0 - decay) * v
        out[i] = acc
    out[0] = values[0]
    return out


def _spec_at(config: TrainConfig, step: int):
    """Dataset spec with the scheduled correlation active at this step."""
    base = config.dataset
    target = toy.true_mi(base)
    for start, mi in config.mi_schedule:
        if step >= start:
            target = mi
    if not config.mi_schedule:
        return base, target
    inner = base.base if isinstance(base, toy.CubicTransformSpec) else base
    sched = toy.gaussian_pair(inner.dim, toy.rho_for_mi(target, inner.dim))
    if isinstance(base, toy.CubicTransformSpec):
        return toy.CubicTransformSpec(base=sched, W=base.W), target
    return sched, target


_TRAINABLE = ("tuba", "nwj", "mine", "infonce", "interpolated", "js",
              "infonce_tractable", "loo_upper", "reparam_nwj", "ba")


def _gaussian_of(dataset) -> toy.GaussianPairSpec:
    return dataset.base if isinstance(dataset, toy.CubicTransformSpec) else dataset


def build_bound(config: TrainConfig, batch: toy.Batch, params: dict[str, Tensor],
                spec, baseline: critics.Baseline | None) -> bounds.BoundResult:
    """Assemble the configured estimator's BoundResult for one batch."""
    name = config.estimator
    if name in ("infonce_tractable", "loo_upper", "reparam_nwj"):
        g = _gaussian_of(spec)
        C = toy.log_conditional(g, batch.x, batch.y, rho=batch.rho)
        if name == "infonce_tractable":
            return bounds.infonce_tractable(C)
        if name == "loo_upper":
            return bounds.loo_upper(C)
        if config.marginal_net is not None:
            lq = ad.reshape(critics.mlp_apply(config.marginal_net, params, batch.y, "qm_"),
                            (batch.size,))
        else:
            lq = toy.log_marginal(g, batch.y)
        return bounds.reparam_nwj(ad.diagonal(C), C, lq)
    if name == "ba":
        h_x = toy.standard_normal_entropy(batch.x.shape[1])
        return bounds.ba_lower(params["ba_A"], ad.exp(params["ba_log_s"]), batch, h_x)

    S = critics.score_matrix(config.critic, batch, params)
    if name == "nwj":
        return bounds.nwj(S)
    if name == "infonce":
        return bounds.infonce(S)
    if name == "js":
        return bounds.js(S)
    if name == "tuba":
        la = critics.baseline_log_value(baseline, batch.y, params)
        return bounds.tuba(S, la)
    if name == "mine":
        return bounds.mine_objective(S, baseline)
    if name == "interpolated":
        if config.alpha is None:
            raise ValueError("interpolated estimator needs alpha")
        if config.marginal_net is not None:
            lq = ad.reshape(critics.mlp_apply(config.marginal_net, params, batch.y, "qm_"),
                            (batch.size,))
        else:
            lq = toy.log_marginal(_gaussian_of(spec), batch.y)
        return bounds.interpolated(S, lq, config.alpha, config.mode)
    raise ValueError(f"estimator {name!r} cannot be trained")


def init_trainable(config: TrainConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    if config.estimator == "ba":
        d = _gaussian_of(config.dataset).dim
        params["ba_A"] = 0.1 * toy.standard_normal(rng, (d, d))
        params["ba_log_s"] = np.zeros(d)
        return params
    if config.critic is not None:
        params.update(critics.critic_init(config.critic, rng))
    if isinstance(config.baseline, critics.LearnedBaseline):
        params.update(critics.baseline_init(config.baseline, rng))
    if config.marginal_net is not None:
        params.update(critics.init_params(config.marginal_net, rng, "qm_"))
    return params


def train_estimator(config: TrainConfig) -> Trace:
    """Maximize the configured bound; fresh samples every step (infinite data)."""
    if config.estimator not in _TRAINABLE:
        raise ValueError(f"estimator {config.estimator!r} is not trainable")
    rng = toy.make_rng(config.seed)
    param_values = init_trainable(config, rng)
    adam_state = AdamState.init(param_values)
    baseline = config.baseline
    if isinstance(baseline, critics.EmaBaseline):
        baseline = replace(baseline)  # private EMA state per run
    trace = Trace()
    for step in range(config.steps):
        spec, target = _spec_at(config, step)
        tape = Tape()
        params = {k: tape.parameter(k, v) for k, v in param_values.items()}
        batch = toy.sample_joint(spec, config.batch_size, rng)
        result = build_bound(config, batch, params, spec, baseline)
        obj = float(result.objective.values)
        if not (math.isfinite(obj) and math.isfinite(result.estimate)):
            raise NumericAbort(step, result.diagnostics)
        if param_values and result.objective.requires_grad:
            grads = ad.backward(result.objective)
            neg = {k: -g.values for k, g in grads.items()}
            param_values, adam_state = adam_step(param_values, neg, adam_state, config.adam)
        trace.rows.append(TraceRow(step, result.estimate, obj,
                                   result.diagnostics.get("clamp_count", 0), target))
        if config.estimator == "mine":
            # EMA state moves only after the gradient step has consumed it
            baseline.update(result.diagnostics["batch_mean_exp_f"])
    return trace


def segment_final_estimates(trace: Trace, decay: float = 0.99) -> dict[float, float]:
    """Smoothed estimate at the last step of each scheduled MI segment."""
    smoothed = smooth_trace(trace, decay)
    targets = trace.target_mis
    out = {}
    for i in range(len(trace)):
        if i == len(trace) - 1 or targets[i + 1] != targets[i]:
            out[float(targets[i])] = float(smoothed[i])
    return out
