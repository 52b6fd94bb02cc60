"""Parameterized scoring functions f(x, y) and their auxiliary networks.

Four critic families: separable (inner product of two embeddings, 2K network
evaluations per batch), joint (one MLP on the concatenated pair, K^2
evaluations), known-conditional (f = log p(y|x), no parameters), and
reparameterized (f = 1 + log p(y|x) - log q(y) with a learned unnormalized
marginal). Baselines a(y) live in log domain so positivity is structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .toy import Batch, GaussianPairSpec, log_conditional


class NonFiniteScore(Exception):
    def __init__(self, i: int, j: int, value: float):
        super().__init__(f"non-finite critic score at ({i}, {j}): {value}")
        self.location = (i, j)


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    hidden_sizes: tuple[int, ...]
    output_dim: int
    activation: str = "relu"  # relu | tanh
    init_scale: float = 1.0

    def __post_init__(self):
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.init_scale < 0:
            raise ValueError("init_scale must be nonnegative")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_sizes, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def param_count(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_dims)


def init_params(spec: MLPSpec, rng: np.random.Generator, prefix: str = "") -> dict[str, np.ndarray]:
    """Weights ~ N(0, init_scale^2 / fan_in), biases zero; deterministic per seed."""
    params = {}
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        std = spec.init_scale / math.sqrt(fan_in)
        params[f"{prefix}w{i}"] = std * rng.standard_normal((fan_in, fan_out))
        params[f"{prefix}b{i}"] = np.zeros(fan_out)
    return params


def mlp_apply(spec: MLPSpec, params: dict, x: Tensor, prefix: str = "") -> Tensor:
    """Forward pass; params may hold tensors (training) or plain arrays (eval)."""
    act = ad.relu if spec.activation == "relu" else ad.tanh
    h = x if isinstance(x, Tensor) else Tensor(x)
    last = len(spec.layer_dims) - 1
    for i in range(last + 1):
        w, b = params[f"{prefix}w{i}"], params[f"{prefix}b{i}"]
        w = w if isinstance(w, Tensor) else Tensor(w)
        h = ad.matmul(h, w) + b
        if i < last:
            h = act(h)
    return h


# ---------------------------------------------------------------------------
# critics


@dataclass(frozen=True)
class SeparableCritic:
    """f(x, y) = <x_net(x), y_net(y)> in a shared embedding space."""

    x_net: MLPSpec
    y_net: MLPSpec
    embed_dim: int

    def __post_init__(self):
        if self.x_net.output_dim != self.embed_dim or self.y_net.output_dim != self.embed_dim:
            raise ValueError("embedding networks must map into embed_dim")


@dataclass(frozen=True)
class JointCritic:
    """f(x, y) = scalar MLP output on the concatenated pair."""

    body: MLPSpec

    def __post_init__(self):
        if self.body.output_dim != 1:
            raise ValueError("joint critic body must be scalar-valued")


@dataclass(frozen=True)
class KnownConditionalCritic:
    """f(x, y) = log p(y|x) exactly; no trainable parameters."""

    spec: GaussianPairSpec


@dataclass(frozen=True)
class ReparameterizedCritic:
    """f(x, y) = 1 + log p(y|x) - log q(y) with only q learned."""

    spec: GaussianPairSpec
    log_q_net: MLPSpec

    def __post_init__(self):
        if self.log_q_net.output_dim != 1:
            raise ValueError("log q network must be scalar-valued")


Critic = SeparableCritic | JointCritic | KnownConditionalCritic | ReparameterizedCritic


def make_separable(x_dim: int, y_dim: int, hidden_sizes=(256, 256), embed_dim: int = 32,
                   activation: str = "relu", init_scale: float = 1.0) -> SeparableCritic:
    hs = tuple(hidden_sizes)
    return SeparableCritic(
        x_net=MLPSpec(x_dim, hs, embed_dim, activation, init_scale),
        y_net=MLPSpec(y_dim, hs, embed_dim, activation, init_scale),
        embed_dim=embed_dim)


def make_joint(x_dim: int, y_dim: int, hidden_sizes=(256, 256),
               activation: str = "relu", init_scale: float = 1.0) -> JointCritic:
    return JointCritic(body=MLPSpec(x_dim + y_dim, tuple(hidden_sizes), 1, activation, init_scale))


def critic_init(critic: Critic, rng: np.random.Generator) -> dict[str, np.ndarray]:
    if isinstance(critic, SeparableCritic):
        return {**init_params(critic.x_net, rng, "gx_"), **init_params(critic.y_net, rng, "hy_")}
    if isinstance(critic, JointCritic):
        return init_params(critic.body, rng, "f_")
    if isinstance(critic, ReparameterizedCritic):
        return init_params(critic.log_q_net, rng, "q_")
    return {}


def score_matrix(critic: Critic, batch: Batch, params: dict[str, Tensor] | None = None) -> Tensor:
    """K x K score tensor S with S[i, j] = f(x_j, y_i).

    Row i holds y_i against every x; the diagonal holds the joint pairs.
    """
    x, y = batch.x, batch.y
    K = batch.size
    if isinstance(critic, SeparableCritic):
        gx = mlp_apply(critic.x_net, params, x, "gx_")      # (K, e)
        hy = mlp_apply(critic.y_net, params, y, "hy_")      # (K, e)
        S = ad.matmul(hy, ad.transpose(gx))
    elif isinstance(critic, JointCritic):
        d_x, d_y = x.shape[1], y.shape[1]
        xs = ad.broadcast_to(ad.reshape(x, (1, K, d_x)), (K, K, d_x))
        ys = ad.broadcast_to(ad.reshape(y, (K, 1, d_y)), (K, K, d_y))
        pairs = ad.reshape(ad.concatenate([xs, ys], axis=2), (K * K, d_x + d_y))
        S = ad.reshape(mlp_apply(critic.body, params, pairs, "f_"), (K, K))
    elif isinstance(critic, KnownConditionalCritic):
        S = log_conditional(critic.spec, x, y, rho=batch.rho)
    elif isinstance(critic, ReparameterizedCritic):
        C = log_conditional(critic.spec, x, y, rho=batch.rho)
        lq = mlp_apply(critic.log_q_net, params, y, "q_")   # (K, 1)
        S = C - lq + 1.0
    else:
        raise TypeError(f"unknown critic {critic!r}")
    bad = ~np.isfinite(S.values)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NonFiniteScore(int(i), int(j), float(S.values[i, j]))
    return S


# ---------------------------------------------------------------------------
# baselines


@dataclass(frozen=True)
class ConstantBaseline:
    """log a(y) = value everywhere; the default 1 makes a(y) the constant e."""

    value: float = 1.0


@dataclass(frozen=True)
class LearnedBaseline:
    """An MLP emitting log a(y), so a(y) > 0 by construction."""

    net: MLPSpec

    def __post_init__(self):
        if self.net.output_dim != 1:
            raise ValueError("baseline network must be scalar-valued")


@dataclass
class EmaBaseline:
    """Scalar running mean of exp(f) across minibatches, frozen w.r.t. gradients."""

    decay: float
    state: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.decay < 1.0):
            raise ValueError("decay must be in [0, 1)")

    def update(self, batch_mean_exp_f: float) -> float:
        self.state = ema_update(self.state, batch_mean_exp_f, self.decay)
        return self.state


Baseline = ConstantBaseline | LearnedBaseline | EmaBaseline


def baseline_init(baseline: Baseline, rng: np.random.Generator) -> dict[str, np.ndarray]:
    if isinstance(baseline, LearnedBaseline):
        return init_params(baseline.net, rng, "a_")
    return {}


def baseline_log_value(baseline: Baseline, y: Tensor, params: dict[str, Tensor] | None = None) -> Tensor:
    """Vector of log a(y_i). The EMA variant is a stop-gradient constant."""
    K = y.shape[0]
    if isinstance(baseline, ConstantBaseline):
        return Tensor(np.full(K, baseline.value))
    if isinstance(baseline, LearnedBaseline):
        return ad.reshape(mlp_apply(baseline.net, params, y, "a_"), (K,))
    if isinstance(baseline, EmaBaseline):
        if baseline.state is None:
            raise ValueError("EMA baseline queried before its first update")
        return Tensor(np.full(K, math.log(baseline.state)))
    raise TypeError(f"unknown baseline {baseline!r}")


def ema_update(state: float | None, batch_mean_exp_f: float, decay: float) -> float:
    """state' = decay * state + (1 - decay) * batch mean; the first call adopts the mean."""
    if batch_mean_exp_f <= 0.0:
        raise ValueError("EMA update needs a positive batch mean")
    if state is None:
        return float(batch_mean_exp_f)
    return float(decay * state + (1.0 - decay) * batch_mean_exp_f)
