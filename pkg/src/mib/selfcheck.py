"""Built-in invariant suite behind `mib selfcheck`: quick algebraic and
gradient sanity checks that need no configuration and finish in seconds."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import bounds, toy
from .autodiff import Tensor


def _w(rng, shape):
    return Tensor(rng.standard_normal(shape))


def _primitive_checks(rng) -> list[tuple[str, float]]:
    """Max finite-difference error for every differentiable primitive."""
    pos = lambda shape: 0.5 + np.abs(rng.standard_normal(shape))
    away = lambda shape: rng.standard_normal(shape) + 0.3 * np.sign(rng.standard_normal(shape))
    x34 = rng.standard_normal((3, 4))
    cases = {
        "add": (lambda t: ad.reduce_sum(ad.add(t, _w(rng, (3, 4))) * _w(rng, (3, 4))), x34),
        "subtract": (lambda t: ad.reduce_sum(ad.subtract(_w(rng, (3, 4)), t) * _w(rng, (3, 4))), x34),
        "multiply": (lambda t: ad.reduce_sum(ad.multiply(t, _w(rng, (3, 4))) * _w(rng, (3, 4))), x34),
        "divide": (lambda t: ad.reduce_sum(ad.divide(_w(rng, (3, 4)), t) * _w(rng, (3, 4))), pos((3, 4))),
        "negate": (lambda t: ad.reduce_sum(ad.negate(t) * _w(rng, (3, 4))), x34),
        "matmul": (lambda t: ad.reduce_sum(ad.matmul(t, _w(rng, (4, 2))) * _w(rng, (3, 2))), x34),
        "exp": (lambda t: ad.reduce_sum(ad.exp(t) * _w(rng, (3, 4))), x34),
        "log": (lambda t: ad.reduce_sum(ad.log(t) * _w(rng, (3, 4))), pos((3, 4))),
        "sqrt": (lambda t: ad.reduce_sum(ad.sqrt(t) * _w(rng, (3, 4))), pos((3, 4))),
        "relu": (lambda t: ad.reduce_sum(ad.relu(t) * _w(rng, (3, 4))), away((3, 4))),
        "tanh": (lambda t: ad.reduce_sum(ad.tanh(t) * _w(rng, (3, 4))), x34),
        "softplus": (lambda t: ad.reduce_sum(ad.softplus(t) * _w(rng, (3, 4))), x34),
        "reduce_sum": (lambda t: ad.reduce_sum(ad.reduce_sum(t, axis=1) * _w(rng, (3,))), x34),
        "reduce_mean": (lambda t: ad.reduce_sum(ad.reduce_mean(t, axis=0) * _w(rng, (4,))), x34),
        "logsumexp": (lambda t: ad.reduce_sum(ad.logsumexp(t, axis=1) * _w(rng, (3,))), x34),
        "log_mean_exp": (lambda t: ad.log_mean_exp(t), x34),
        "logaddexp": (lambda t: ad.reduce_sum(ad.logaddexp(t, _w(rng, (3, 4))) * _w(rng, (3, 4))), x34),
        "diagonal": (lambda t: ad.reduce_sum(ad.diagonal(t) * _w(rng, (4,))), rng.standard_normal((4, 4))),
        "broadcast_to": (lambda t: ad.reduce_sum(ad.broadcast_to(t, (3, 4)) * _w(rng, (3, 4))), rng.standard_normal((3, 1))),
        "reshape": (lambda t: ad.reduce_sum(ad.reshape(t, (2, 6)) * _w(rng, (2, 6))), x34),
        "transpose": (lambda t: ad.reduce_sum(ad.transpose(t) * _w(rng, (4, 3))), x34),
        "concatenate": (lambda t: ad.reduce_sum(ad.concatenate([t, _w(rng, (2, 4))], axis=0) * _w(rng, (5, 4))), rng.standard_normal((3, 4))),
        "clip": (lambda t: ad.reduce_sum(ad.clip(t, -1.0, 1.0) * _w(rng, (3, 4))), 0.5 * away((3, 4))),
    }
    return [(name, ad.check_gradient(fn, point)) for name, (fn, point) in cases.items()]


def _objective_checks(rng) -> list[tuple[str, float]]:
    S = rng.standard_normal((6, 6))
    lq = rng.standard_normal(6)
    cases = {
        "tuba": lambda t: bounds.tuba(t, Tensor(lq)).objective,
        "nwj": lambda t: bounds.nwj(t).objective,
        "infonce": lambda t: bounds.infonce(t).objective,
        "js": lambda t: bounds.js(t).objective,
        "interpolated": lambda t: bounds.interpolated(t, Tensor(lq), 0.3).objective,
        "loo_upper": lambda t: bounds.loo_upper(t).objective,
    }
    return [(f"objective/{name}", ad.check_gradient(fn, S)) for name, fn in cases.items()]


def run_selfcheck(echo=print) -> bool:
    rng = np.random.default_rng(20240)
    ok = True

    def report(name: str, passed: bool, detail: str = ""):
        nonlocal ok
        ok &= passed
        echo(f"{'ok  ' if passed else 'FAIL'} {name}{' (' + detail + ')' if detail else ''}")

    for name, err in _primitive_checks(rng) + _objective_checks(rng):
        report(f"gradient {name}", err < 1e-4, f"max rel err {err:.2e}")

    v = Tensor(np.array([700.0, -700.0, 0.0]))
    lme = ad.log_mean_exp(v).item()
    report("log_mean_exp stays finite at |v| = 700", np.isfinite(lme))

    capped = True
    for _ in range(200):
        K = int(rng.integers(2, 12))
        est = bounds.infonce(10.0 * rng.standard_normal((K, K))).estimate
        capped &= est <= np.log(K) + 1e-12
    report("infonce per-batch cap log K", capped)

    S = Tensor(rng.standard_normal((8, 8)))
    lq = Tensor(rng.standard_normal(8))
    a1 = bounds.interpolated(S, lq, 1.0).estimate
    report("interpolated alpha=1 equals infonce",
           abs(a1 - bounds.infonce(S).estimate) < 1e-12)
    a0 = bounds.interpolated(S, lq, 0.0).estimate
    report("interpolated alpha=0 equals tuba with q baseline",
           abs(a0 - bounds.tuba(S, lq).estimate) < 1e-12)

    m = np.exp(S.values).mean(axis=1)
    ratio = np.mean(np.exp(S.values) / m[:, None], axis=1)
    report("batch-mixture averaging identity equals 1", np.allclose(ratio, 1.0, atol=1e-12))

    perm = rng.permutation(8)
    Sp = Tensor(S.values[np.ix_(perm, perm)])
    report("exchange symmetry of estimators",
           abs(bounds.infonce(S).estimate - bounds.infonce(Sp).estimate) < 1e-12
           and abs(bounds.nwj(S).estimate - bounds.nwj(Sp).estimate) < 1e-12)

    spec = toy.gaussian_pair(5, 0.6)
    b1 = toy.sample_joint(spec, 32, toy.make_rng(7))
    b2 = toy.sample_joint(spec, 32, toy.make_rng(7))
    same = np.array_equal(b1.y.values, b2.y.values)
    report("sampling and forward passes are bit-deterministic", same)

    return ok
