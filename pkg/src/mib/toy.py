"""Analytic toy joints: correlated Gaussian pairs and their cubic transform.

Both distributions have closed-form mutual information, conditionals, and
marginals, so estimator bias and variance can be measured against ground
truth. Sampling is reparameterized so estimates stay differentiable with
respect to the per-dimension correlations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor

LOG_TWO_PI = math.log(2.0 * math.pi)


def make_rng(seed: int, worker_id: int = 0, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator; (seed, worker, stream) fully determines the stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, worker_id, stream_id])))


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller normals from counter-based uniforms, stable across platforms."""
    n = int(np.prod(shape))
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps the log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
    return z.reshape(shape)


@dataclass(frozen=True)
class GaussianPairSpec:
    """x ~ N(0, I_d), y_i = rho_i x_i + sqrt(1 - rho_i^2) eps_i per dimension."""

    dim: int
    rho: tuple[float, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        if len(self.rho) != self.dim:
            raise ValueError(f"rho has length {len(self.rho)}, expected {self.dim}")
        if any(abs(r) >= 1.0 for r in self.rho):
            raise ValueError("correlations must satisfy |rho| < 1")

    @property
    def rho_array(self) -> np.ndarray:
        return np.asarray(self.rho, dtype=np.float64)


def gaussian_pair(dim: int, rho) -> GaussianPairSpec:
    """Build a spec from a scalar correlation (shared by all dims) or a vector."""
    if np.ndim(rho) == 0:
        rho = (float(rho),) * dim
    return GaussianPairSpec(dim=dim, rho=tuple(rho))


@dataclass(frozen=True, eq=False)
class CubicTransformSpec:
    """Gaussian pair with y mapped through (Wy)^3; MI is unchanged for full-rank W."""

    base: GaussianPairSpec
    W: np.ndarray = field(repr=False)

    def __post_init__(self):
        W = np.ascontiguousarray(self.W, dtype=np.float64)
        object.__setattr__(self, "W", W)
        d = self.base.dim
        if W.shape != (d, d):
            raise ValueError(f"W has shape {W.shape}, expected {(d, d)}")
        if np.linalg.matrix_rank(W) < d:
            raise ValueError("W must be full rank")

    @property
    def dim(self) -> int:
        return self.base.dim


def sample_transform(dim: int, rng: np.random.Generator, cond_limit: float = 1e6) -> np.ndarray:
    """Draw W with N(0,1) entries, resampling until reasonably conditioned."""
    while True:
        W = standard_normal(rng, (dim, dim))
        if np.linalg.cond(W) < cond_limit:
            return W


@dataclass
class Batch:
    """K paired samples; row i of (x, y) is a joint draw, rows are independent."""

    x: Tensor
    y: Tensor
    rho: Tensor | None = None  # leaf parameter when sampled differentiably

    @property
    def size(self) -> int:
        return self.x.shape[0]


def sample_joint(spec, K: int, rng: np.random.Generator,
                 differentiable: bool = False, tape: Tape | None = None,
                 param_name: str = "rho") -> Batch:
    """Draw K joint pairs; with differentiable=True the correlations become a
    tape leaf so estimates can be differentiated through the sampler."""
    if K < 2:
        raise ValueError("K must be at least 2: every multi-sample bound needs a negative")
    base = spec.base if isinstance(spec, CubicTransformSpec) else spec
    d = base.dim
    xv = standard_normal(rng, (K, d))
    ev = standard_normal(rng, (K, d))
    x = Tensor(xv)
    if differentiable:
        if tape is None:
            raise ValueError("differentiable sampling needs a tape for the rho leaf")
        rho = tape.parameter(param_name, base.rho_array)
        y = x * rho + Tensor(ev) * ad.sqrt(1.0 - rho * rho)
    else:
        rho = None
        rv = base.rho_array
        y = Tensor(xv * rv + ev * np.sqrt(1.0 - rv * rv))
    if isinstance(spec, CubicTransformSpec):
        y = cubic_transform(spec, y)
    return Batch(x=x, y=y, rho=rho)


def cubic_transform(spec: CubicTransformSpec, y) -> Tensor:
    """Elementwise cube of the linear map W y, applied row-wise to a K x d batch."""
    y = y if isinstance(y, Tensor) else Tensor(y)
    z = ad.matmul(y, Tensor(spec.W.T.copy()))
    return z * z * z


def log_conditional(spec: GaussianPairSpec, x, y, rho: Tensor | None = None) -> Tensor:
    """Matrix C with C[i, j] = log p(y_i | x_j).

    Expanded into rank-one terms so only 2-D products appear:
    sum_d w_d (y - rho x)^2 = (y^2) w + (x^2)(w rho^2) - 2 (y (w rho)) x^T
    with w_d = 1 / (2 (1 - rho_d^2)).
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    y = y if isinstance(y, Tensor) else Tensor(y)
    d = spec.dim
    if x.shape[1] != d or y.shape[1] != d:
        raise ad.ShapeMismatch("log_conditional", x.shape, y.shape)
    r = rho if rho is not None else Tensor(spec.rho_array)
    one_minus = 1.0 - r * r
    w = 1.0 / (2.0 * one_minus)
    const = ad.reduce_sum(-0.5 * (LOG_TWO_PI + ad.log(one_minus)))
    a = ad.matmul(y * y, ad.reshape(w, (d, 1)))                      # (M, 1)
    b = ad.matmul(x * x, ad.reshape(w * r * r, (d, 1)))              # (K, 1)
    cross = ad.matmul(y * (w * r), ad.transpose(x))                  # (M, K)
    return const - a - ad.transpose(b) + 2.0 * cross


def log_marginal(spec: GaussianPairSpec, y) -> Tensor:
    """Per-row log density of the exact y-marginal, which is N(0, I_d)."""
    y = y if isinstance(y, Tensor) else Tensor(y)
    if y.shape[1] != spec.dim:
        raise ad.ShapeMismatch("log_marginal", y.shape)
    return ad.reduce_sum(-0.5 * (y * y), axis=1) - 0.5 * spec.dim * LOG_TWO_PI


def true_mi(spec) -> float:
    """Exact mutual information in nats: -1/2 sum_i log(1 - rho_i^2)."""
    base = spec.base if isinstance(spec, CubicTransformSpec) else spec
    return float(-0.5 * np.sum(np.log1p(-base.rho_array ** 2)))


def true_mi_grad(spec: GaussianPairSpec) -> np.ndarray:
    """d MI / d rho_i = rho_i / (1 - rho_i^2)."""
    r = spec.rho_array
    return r / (1.0 - r * r)


def rho_for_mi(target_mi: float, dim: int) -> float:
    """Shared per-dimension correlation that yields the requested MI."""
    if target_mi < 0.0:
        raise ValueError("target MI must be nonnegative")
    return float(np.sqrt(-np.expm1(-2.0 * target_mi / dim)))


def standard_normal_entropy(dim: int) -> float:
    """Differential entropy of N(0, I_dim) in nats."""
    return 0.5 * dim * (LOG_TWO_PI + 1.0)
