"""Variational MI estimators as pure functions of K x K score matrices.

Convention throughout: S[i, j] = f(x_j, y_i), so the diagonal holds joint
pairs and off-diagonal entries are independent pairs. Product-of-marginals
expectations (the linear-domain exp terms) average over the K(K-1)
off-diagonal entries only; the contrastive denominators of infonce and its
tractable variant keep the diagonal, which is what caps them at log K per
batch. Denominators are always computed in log domain with max-shifted
reductions; scores feeding a linear-domain exp are clamped to +-50 first and
the clamp events reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .critics import EmaBaseline
from .toy import Batch, GaussianPairSpec

SCORE_CLAMP = 50.0

# estimate is within this many nats of the hard cap => flagged saturated
_SATURATION_MARGIN = 0.1


@dataclass
class BoundResult:
    """Numeric estimate plus the tensor objective a trainer ascends.

    For most bounds the objective's value equals the estimate; mine_objective
    and js split evaluation from the gradient path, and diagnostics record
    both sides.
    """

    estimate: float
    objective: Tensor
    diagnostics: dict = field(default_factory=dict)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_scores(S: Tensor, op: str) -> int:
    if S.values.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ad.ShapeMismatch(op, S.shape)
    K = S.shape[0]
    if K < 2:
        raise ValueError(f"{op}: needs K >= 2, got {K}")
    return K


def _clamp_count(S: Tensor) -> int:
    return int(np.sum(np.abs(S.values) >= SCORE_CLAMP))


def _diag_mean(S: Tensor) -> Tensor:
    return ad.reduce_mean(ad.diagonal(S))


def _offdiag_mean(T: Tensor) -> Tensor:
    """Mean over the K(K-1) off-diagonal entries."""
    K = T.shape[0]
    mask = np.ones((K, K))
    np.fill_diagonal(mask, 0.0)
    return ad.reduce_sum(T * Tensor(mask)) * (1.0 / (K * (K - 1)))


def _neg_inf_diag(K: int) -> Tensor:
    mask = np.zeros((K, K))
    np.fill_diagonal(mask, -np.inf)
    return Tensor(mask)


def _offdiag_logmeanexp(S: Tensor) -> Tensor:
    """log of the off-diagonal mean of exp(S), max-shifted."""
    K = S.shape[0]
    return ad.logsumexp(S + _neg_inf_diag(K)) - math.log(K * (K - 1))


def _row_loo_logmeanexp(S: Tensor) -> Tensor:
    """Per-row log mean of exp over the K-1 entries j != i."""
    K = S.shape[0]
    return ad.logsumexp(S + _neg_inf_diag(K), axis=1) - math.log(K - 1)


def _col(v: Tensor) -> Tensor:
    return ad.reshape(v, (v.shape[0], 1))


# ---------------------------------------------------------------------------
# unnormalized single-sample bounds


def tuba(scores, log_baseline) -> BoundResult:
    """Unnormalized lower bound with a free baseline a(y), supplied in log domain.

    mean_diag(S) - mean_i [ mean_{j != i} e^{S_ij} / a(y_i) + log a(y_i) - 1 ]
    """
    S = _as_tensor(scores)
    K = _check_scores(S, "tuba")
    la = _as_tensor(log_baseline)
    if la.values.ndim == 0:
        la = ad.broadcast_to(ad.reshape(la, (1,)), (K,))
    if la.shape != (K,):
        raise ad.ShapeMismatch("tuba", S.shape, la.shape)
    if not np.all(np.isfinite(la.values)):
        raise ad.DomainError("tuba: log baseline must be finite")
    Sc = ad.clip(S, -SCORE_CLAMP, SCORE_CLAMP)
    ratios = ad.exp(Sc - _col(la))
    obj = _diag_mean(S) - _offdiag_mean(ratios) - ad.reduce_mean(la) + 1.0
    return BoundResult(float(obj.values), obj, {"clamp_count": _clamp_count(S)})


def nwj(scores) -> BoundResult:
    """tuba with the constant baseline a(y) = e; unbiased at the optimal critic."""
    S = _as_tensor(scores)
    K = _check_scores(S, "nwj")
    res = tuba(S, Tensor(np.ones(K)))
    res.diagnostics["baseline"] = "constant_e"
    return res


def dv(scores) -> BoundResult:
    """mean_diag(S) - log(offdiag mean of e^S). Evaluation-only: batch estimates
    are neither an upper nor a lower bound, and the harness never trains on it."""
    S = _as_tensor(scores)
    _check_scores(S, "dv")
    obj = _diag_mean(S) - _offdiag_logmeanexp(S)
    return BoundResult(float(obj.values), obj,
                       {"clamp_count": 0, "evaluation_only": True})


def mine_objective(scores, baseline: EmaBaseline) -> BoundResult:
    """Training surrogate whose gradient equals tuba's with the baseline frozen
    at the running EMA of exp(f).

    The estimate reported is the tuba-with-EMA value (a valid lower bound);
    diagnostics also carry the dv value, which is how this estimator family is
    usually quoted.
    """
    S = _as_tensor(scores)
    _check_scores(S, "mine")
    Sc = ad.clip(S, -SCORE_CLAMP, SCORE_CLAMP)
    batch_mean = float(_offdiag_mean(ad.exp(Sc)).values)
    if baseline.state is None:
        baseline.state = batch_mean
    log_state = math.log(baseline.state)
    obj = _diag_mean(S) - _offdiag_mean(ad.exp(Sc - log_state))
    dv_value = float((_diag_mean(S) - _offdiag_logmeanexp(S)).values)
    tuba_value = float(obj.values) - log_state + 1.0
    return BoundResult(tuba_value, obj,
                       {"clamp_count": _clamp_count(S), "dv_estimate": dv_value,
                        "tuba_ema_estimate": tuba_value, "ema_state": baseline.state,
                        "batch_mean_exp_f": batch_mean})


# ---------------------------------------------------------------------------
# multi-sample bounds


def infonce(scores) -> BoundResult:
    """Contrastive bound mean_i [S_ii - log mean_j e^{S_ij}]; the denominator
    keeps the diagonal, so each batch estimate is capped at log K."""
    S = _as_tensor(scores)
    K = _check_scores(S, "infonce")
    obj = _diag_mean(S) - ad.reduce_mean(ad.log_mean_exp(S, axis=1))
    est = float(obj.values)
    cap = math.log(K)
    return BoundResult(est, obj,
                       {"clamp_count": 0, "cap": cap,
                        "saturated": est > cap - _SATURATION_MARGIN})


def interpolated(scores, log_marginal, alpha: float, mode: str = "mixture") -> BoundResult:
    """Continuum between nwj (alpha=0) and infonce (alpha=1).

    mixture: denominator alpha * m + (1 - alpha) * q with m the batch estimate
    of the partition function. The positive term uses all K columns; the
    independent-sample term treats y_i as the held-out draw and uses the
    leave-one-out m over the other K-1 columns, which makes the alpha=1 term
    identically 1. product: m^alpha q^(1-alpha) instead. linear: the plain
    convex combination of the infonce and nwj estimates.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    S = _as_tensor(scores)
    K = _check_scores(S, "interpolated")

    if mode == "linear":
        nce, nw = infonce(S), nwj(S)
        obj = alpha * nce.objective + (1.0 - alpha) * nw.objective
        return BoundResult(float(obj.values), obj,
                           {"clamp_count": nw.diagnostics["clamp_count"],
                            "cap": alpha * math.log(K) + (1.0 - alpha) * np.inf
                            if alpha < 1.0 else math.log(K)})
    if mode not in ("mixture", "product"):
        raise ValueError(f"unknown interpolation mode {mode!r}")

    lq = _as_tensor(log_marginal)
    if lq.shape != (K,):
        raise ad.ShapeMismatch("interpolated", S.shape, lq.shape)
    if not np.all(np.isfinite(lq.values)):
        raise ad.DomainError("interpolated: log marginal must be finite")

    log_m = ad.log_mean_exp(S, axis=1)          # all K columns
    log_loo = _row_loo_logmeanexp(S)            # K-1 columns, row i excluded

    def mix(log_batch):
        if alpha == 1.0:
            return log_batch
        if alpha == 0.0:
            return lq
        if mode == "mixture":
            return ad.logaddexp(log_batch + math.log(alpha), lq + math.log(1.0 - alpha))
        return alpha * log_batch + (1.0 - alpha) * lq      # product

    first = ad.reduce_mean(ad.diagonal(S) - mix(log_m))
    # clamp the ratio exponent, not the raw scores: the log denominator tracks
    # the scores' scale, so clamping S alone would fabricate huge ratios
    # whenever both run very negative (routine for conditional-density critics)
    exponent = S - _col(mix(log_loo))
    second = _offdiag_mean(ad.exp(ad.clip(exponent, -SCORE_CLAMP, SCORE_CLAMP)))
    obj = 1.0 + first - second
    est = float(obj.values)
    cap = 1.0 + math.log(K / alpha) if alpha > 0.0 else np.inf
    return BoundResult(est, obj,
                       {"clamp_count": _clamp_count(exponent), "cap": cap,
                        "saturated": bool(np.isfinite(cap)) and est > cap - _SATURATION_MARGIN})


def js(scores) -> BoundResult:
    """Density-ratio training via the Jensen-Shannon surrogate.

    The objective (what the critic ascends) is the f-GAN JS value
    mean_diag(-softplus(-S)) - offdiag_mean(softplus(S)); the reported
    estimate plugs the ratio into the nwj form, 1 + mean_diag(S) -
    offdiag_mean(e^S). Gradients flow only through the JS objective.
    """
    S = _as_tensor(scores)
    _check_scores(S, "js")
    obj = ad.reduce_mean(-ad.softplus(-ad.diagonal(S))) - _offdiag_mean(ad.softplus(S))
    v = S.values
    K = v.shape[0]
    mask = ~np.eye(K, dtype=bool)
    est = 1.0 + float(np.mean(np.diag(v))) - float(np.mean(np.exp(np.clip(v[mask], -SCORE_CLAMP, SCORE_CLAMP))))
    return BoundResult(est, obj,
                       {"clamp_count": _clamp_count(S), "js_value": float(obj.values)})


# ---------------------------------------------------------------------------
# structured bounds on conditional matrices C[i, j] = log p(y_i | x_j)


def infonce_tractable(cond) -> BoundResult:
    """infonce evaluated directly on the known conditional; no parameters."""
    C = _as_tensor(cond)
    res = infonce(C)
    res.diagnostics["structured"] = True
    return res


def loo_upper(cond) -> BoundResult:
    """mean_i [C_ii - log mean_{j != i} e^{C_ij}]: the marginal replaced by the
    mixture of the other K-1 conditionals. An upper bound in expectation only;
    single batches can land below the true MI."""
    C = _as_tensor(cond)
    _check_scores(C, "loo_upper")
    obj = _diag_mean(C) - ad.reduce_mean(_row_loo_logmeanexp(C))
    return BoundResult(float(obj.values), obj,
                       {"clamp_count": 0, "upper_bound_in_expectation": True})


def reparam_nwj(cond_diag, cond, log_marginal) -> BoundResult:
    """nwj with the critic reparameterized as 1 + log p(y|x) - log q(y).

    mean_i [C_ii - log q(y_i)] + 1 - mean_i mean_{j != i} e^{C_ij} / q(y_i).
    Valid for any positive q, normalized or not; exact in expectation when q
    is the true marginal.
    """
    C = _as_tensor(cond)
    K = _check_scores(C, "reparam_nwj")
    cd = _as_tensor(cond_diag)
    lq = _as_tensor(log_marginal)
    if cd.shape != (K,) or lq.shape != (K,):
        raise ad.ShapeMismatch("reparam_nwj", C.shape, cd.shape, lq.shape)
    exponent = C - _col(lq)  # clamp the ratio exponent, as in interpolated
    correction = _offdiag_mean(ad.exp(ad.clip(exponent, -SCORE_CLAMP, SCORE_CLAMP)))
    obj = ad.reduce_mean(cd - lq) + 1.0 - correction
    return BoundResult(float(obj.values), obj, {"clamp_count": _clamp_count(exponent)})


def rate_upper(spec: GaussianPairSpec, q_var) -> float:
    """Exact E_x[KL(p(y|x) || q(y))] for a diagonal zero-mean Gaussian q.

    Per dimension: (1/2) [1/var - 1 + log var - log(1 - rho^2)], using
    E[x^2] = 1. Analytic, no sampling; equals the true MI when q matches the
    standard-normal marginal.
    """
    v = np.asarray(q_var, dtype=np.float64)
    if v.ndim == 0:
        v = np.full(spec.dim, float(v))
    if v.shape != (spec.dim,):
        raise ad.ShapeMismatch("rate_upper", v.shape)
    if np.any(v <= 0.0):
        raise ad.DomainError("rate_upper: variances must be positive")
    r2 = spec.rho_array ** 2
    return float(np.sum(0.5 * (1.0 / v - 1.0 + np.log(v) - np.log1p(-r2))))


def ba_lower(A, s, batch: Batch, h_x: float) -> BoundResult:
    """Decoder-based lower bound: mean_i log q(x_i | y_i) + h(X) with the
    linear-Gaussian decoder q(x|y) = N(Ay, diag(s^2))."""
    A = _as_tensor(A)
    s = _as_tensor(s)
    if np.any(s.values <= 0.0):
        raise ad.DomainError("ba_lower: decoder scales must be positive")
    x, y = batch.x, batch.y
    d_x = x.shape[1]
    if A.shape != (d_x, y.shape[1]) or s.shape != (d_x,):
        raise ad.ShapeMismatch("ba_lower", A.shape, s.shape)
    mean = ad.matmul(y, ad.transpose(A))
    var = s * s
    resid = x - mean
    log_q = ad.reduce_sum(-0.5 * (math.log(2.0 * math.pi) + ad.log(var))
                          - resid * resid / (2.0 * var), axis=1)
    obj = ad.reduce_mean(log_q) + h_x
    return BoundResult(float(obj.values), obj, {"clamp_count": 0})


def tc_upper(uppers, lower: float) -> float:
    """Total-correlation upper bound: sum of per-dimension I(X; Y_i) uppers
    minus a joint I(X; Y) lower."""
    return float(np.sum(np.asarray(uppers, dtype=np.float64)) - lower)


ESTIMATOR_NAMES = ("tuba", "nwj", "dv", "mine", "infonce", "interpolated", "js",
                   "infonce_tractable", "loo_upper", "reparam_nwj", "rate", "ba",
                   "tc_upper")
