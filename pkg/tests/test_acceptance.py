"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. Monte Carlo tolerances are
3 standard errors over the stated batch counts with fixed seeds; wall-clock
budgets are asserted where the criterion states one. The full module takes
roughly half an hour, dominated by the three 20k-step training runs.
"""

import math
import time

import numpy as np
import pytest

from mib import autodiff as ad
from mib import bounds, critics, harness, toy, training
from mib.autodiff import Tape, Tensor
from mib.harness import EstimatorSpec, gradient_cell, sweep_cell

D = 20  # benchmark dimensionality


def _report(num: int, desc: str):
    print(f"\nPASS criterion {num:02d}: {desc}")


def _stderr(v):
    return v.std() / math.sqrt(v.size)


# ---------------------------------------------------------------------------


def test_criterion_01_autodiff_correctness():
    started = time.perf_counter()
    rng = np.random.default_rng(801)

    from test_autodiff import PRIM_NAMES, _case
    worst_prim = 0.0
    for name in PRIM_NAMES:
        prim_rng = np.random.default_rng(abs(hash(name)) % 2**32)
        for _ in range(10):
            fn, point = _case(prim_rng, name)
            worst_prim = max(worst_prim, ad.check_gradient(fn, point, epsilon=1e-5))
    assert worst_prim < 1e-4

    worst_obj = 0.0
    for _ in range(10):
        S = rng.standard_normal((8, 8))
        lq = Tensor(rng.standard_normal(8))
        la = Tensor(rng.standard_normal(8))
        objectives = [
            lambda t: bounds.tuba(t, la).objective,
            lambda t: bounds.nwj(t).objective,
            lambda t: bounds.infonce(t).objective,
            lambda t: bounds.js(t).objective,
            lambda t: bounds.interpolated(t, lq, 0.0).objective,
            lambda t: bounds.interpolated(t, lq, 0.3).objective,
            lambda t: bounds.interpolated(t, lq, 1.0).objective,
        ]
        for fn in objectives:
            worst_obj = max(worst_obj, ad.check_gradient(fn, S, epsilon=1e-5))
    assert worst_obj < 1e-4

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    _report(1, f"autodiff vs finite differences: primitives {worst_prim:.2e}, "
               f"objectives {worst_obj:.2e} (< 1e-4), {elapsed:.1f}s < 30s")


def test_criterion_02_nwj_unbiasedness():
    started = time.perf_counter()
    K, reps = 128, 10_000
    zs = {}
    for mi in (2.0, 6.0, 10.0):
        vals = sweep_cell((EstimatorSpec("nwj"),), D, K, mi, reps,
                          seed=802, point_index=int(mi))["nwj"]
        z = abs(vals.mean() - mi) / _stderr(vals)
        zs[mi] = z
        assert z < 3.0, f"nwj biased at MI={mi}: z={z:.2f}"
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    _report(2, "nwj unbiased at MI in {2, 6, 10}, K=128, 1e4 batches: "
               + ", ".join(f"z={z:.2f}" for z in zs.values()) + f"; {elapsed:.0f}s < 2min")


def test_criterion_03_infonce_cap_and_bias():
    rng = np.random.default_rng(803)
    for _ in range(1000):
        K = int(rng.integers(2, 24))
        S = Tensor(5.0 * rng.standard_normal((K, K)))
        assert bounds.infonce(S).estimate <= math.log(K) + 1e-12

    K, mi, reps = 64, 10.0, 10_000
    spec = toy.gaussian_pair(D, toy.rho_for_mi(mi, D))
    gen = toy.make_rng(803)
    cap = math.log(K)
    vals = np.empty(reps)
    for b in range(reps):
        batch = toy.sample_joint(spec, K, gen)
        vals[b] = bounds.infonce(toy.log_conditional(spec, batch.x, batch.y)).estimate
        assert vals[b] <= cap + 1e-12
    assert 3.8 <= vals.mean() <= 4.158883
    _report(3, f"infonce capped at log K on 1e3 random matrices and 1e4 optimal-critic "
               f"batches; mean at MI=10, K=64 is {vals.mean():.3f} in [3.8, 4.158883]")


def test_criterion_04_sandwich_and_table_row():
    expected_tnce = {2.0: 1.9, 4.0: 3.3, 6.0: 4.2, 8.0: 4.6, 10.0: 4.8}
    K, reps = 128, 10_000
    especs = (EstimatorSpec("loo_upper"), EstimatorSpec("infonce_tractable"))
    summary = []
    for mi in (2.0, 4.0, 6.0, 8.0, 10.0):
        s = sweep_cell(especs, D, K, mi, reps, seed=804, point_index=int(mi))
        up, lo = s["loo_upper"], s["infonce_tractable"]
        assert up.mean() >= mi - 3.0 * _stderr(up), f"loo_upper below MI at {mi}"
        assert lo.mean() <= mi + 3.0 * _stderr(lo), f"tnce above MI at {mi}"
        assert abs(lo.mean() - expected_tnce[mi]) <= 0.15, \
            f"tnce at MI={mi}: {lo.mean():.3f} vs published {expected_tnce[mi]}"
        summary.append(f"{lo.mean():.2f}")
    _report(4, f"sandwich holds at K=128; known-conditional infonce row "
               f"[{', '.join(summary)}] within 0.15 of [1.9, 3.3, 4.2, 4.6, 4.8]")


def test_criterion_05_exact_structured_recovery():
    for mi in (2.0, 4.0, 6.0, 8.0, 10.0):
        spec = toy.gaussian_pair(D, toy.rho_for_mi(mi, D))
        assert abs(bounds.rate_upper(spec, np.ones(D)) - toy.true_mi(spec)) < 1e-9

    K, reps = 128, 4000
    zs = []
    for mi in (2.0, 4.0, 6.0, 8.0, 10.0):
        vals = sweep_cell((EstimatorSpec("reparam_nwj"),), D, K, mi, reps,
                          seed=805, point_index=int(mi))["reparam_nwj"]
        z = abs(vals.mean() - mi) / _stderr(vals)
        zs.append(z)
        assert z < 3.0, f"reparam_nwj off at MI={mi}: z={z:.2f}"
    _report(5, "rate upper bound with the true marginal equals MI to 1e-9; "
               "reparam_nwj recovers MI within 3 stderr at every level "
               f"(max z={max(zs):.2f})")


def test_criterion_06_interpolation_identities_and_caps():
    rng = np.random.default_rng(806)
    for _ in range(200):
        K = int(rng.integers(2, 12))
        S = Tensor(3.0 * rng.standard_normal((K, K)))
        lq = Tensor(rng.standard_normal(K))
        assert abs(bounds.interpolated(S, lq, 1.0).estimate
                   - bounds.infonce(S).estimate) < 1e-12
        assert abs(bounds.interpolated(S, lq, 0.0).estimate
                   - bounds.tuba(S, lq).estimate) < 1e-12
        for alpha in (0.01, 0.1, 0.5):
            est = bounds.interpolated(S, lq, alpha).estimate
            assert est <= 1.0 + math.log(K / alpha) + 1e-9

    K, reps = 128, 2000
    for mi in (2.0, 4.0, 6.0):
        especs = tuple(EstimatorSpec("interpolated", alpha=a) for a in (0.01, 0.1, 0.5))
        s = sweep_cell(especs, D, K, mi, reps, seed=806, point_index=int(mi))
        for e in especs:
            vals = s[e.label]
            cap = math.log(K / e.alpha)
            assert vals.mean() <= cap + 3.0 * _stderr(vals), \
                f"alpha={e.alpha}, MI={mi}: mean {vals.mean():.3f} above log(K/alpha)={cap:.3f}"
    _report(6, "interpolated: alpha=1 == infonce and alpha=0 == q-baseline nwj to 1e-12; "
               "per-batch <= 1 + log(K/alpha); Monte Carlo means <= log(K/alpha) + 3 stderr")


def test_criterion_07_mse_crossover():
    started = time.perf_counter()
    K, mi, reps = 64, 6.0, 10_000
    alphas = (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
    especs = (EstimatorSpec("nwj"), EstimatorSpec("infonce"),
              *(EstimatorSpec("interpolated", alpha=a) for a in alphas))
    s = sweep_cell(especs, D, K, mi, reps, seed=807, point_index=0)
    mse_nwj = float(np.mean((s["nwj"] - mi) ** 2))
    mse_nce = float(np.mean((s["infonce"] - mi) ** 2))
    found = None
    for a in alphas:
        sq_a = (s[f"interpolated_a{a:g}"] - mi) ** 2  # same batches as nwj/infonce
        margin = min(mse_nwj, mse_nce) - sq_a.mean()
        if margin > 3.0 * _stderr(sq_a):
            found = (a, sq_a.mean(), mse_nwj, mse_nce)
            break
    elapsed = time.perf_counter() - started
    assert found is not None, "no alpha strictly dominates both nwj and infonce in MSE"
    assert elapsed < 180.0
    _report(7, f"MSE crossover at MI=6, K=64: alpha={found[0]} has MSE {found[1]:.3f} "
               f"< nwj {found[2]:.3f} and infonce {found[3]:.3f} (margins > 3 stderr); "
               f"{elapsed:.0f}s < 3min")


def test_criterion_08_gradient_experiment():
    started = time.perf_counter()
    # unbiased encoder gradients for nwj
    K, mi, reps = 128, 2.0, 400
    spec = toy.gaussian_pair(D, toy.rho_for_mi(mi, D))
    grads = gradient_cell((EstimatorSpec("nwj"),), D, K, mi, reps, seed=808)["nwj"]
    true_grad = toy.true_mi_grad(spec)
    z = np.abs(grads.mean(axis=0) - true_grad) / (grads.std(axis=0) / math.sqrt(reps))
    assert np.all(z < 3.0), f"nwj gradient bias: max z={z.max():.2f}"

    # best interpolation weight by regime
    alphas = (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
    especs = tuple(EstimatorSpec("interpolated", alpha=a) for a in alphas)

    def best_alpha(mi_level, K_level, reps_level):
        spec_l = toy.gaussian_pair(D, toy.rho_for_mi(mi_level, D))
        tg = toy.true_mi_grad(spec_l)
        g = gradient_cell(especs, D, K_level, mi_level, reps_level, seed=808,
                          point_index=K_level)
        mses = {e.alpha: float(np.mean((g[e.label] - tg) ** 2)) for e in especs}
        return min(mses, key=mses.get)

    small = best_alpha(2.0, 16, 300)
    large = best_alpha(10.0, 256, 256)
    assert small >= 0.5, f"best alpha at (MI=2, K=16) is {small}, expected >= 0.5"
    assert large <= 0.1, f"best alpha at (MI=10, K=256) is {large}, expected <= 0.1"
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0
    _report(8, f"nwj encoder gradients unbiased per coordinate (max z={z.max():.2f}); "
               f"best alpha {small} at (MI=2, K=16) and {large} at (MI=10, K=256); "
               f"{elapsed:.0f}s < 10min")


def test_criterion_09_trained_critic_reproduction():
    started = time.perf_counter()
    levels = (2.0, 4.0, 6.0, 8.0, 10.0)
    cfg = harness.default_config("fig2", dataset="gaussian", steps=20_000,
                                 batch_sizes=(64,), mi_levels=levels, seed=809)
    width = {"hidden_sizes": [96, 96]}  # fits the runtime budget on 2 cores
    runs = {}
    for espec in (EstimatorSpec("infonce", critic=width),
                  EstimatorSpec("interpolated", alpha=0.01, critic=width,
                                marginal={"hidden_sizes": [96, 96]}),
                  EstimatorSpec("nwj", critic=width)):
        tc = harness.make_train_config(cfg, espec, "gaussian", "joint", 64,
                                       harness._staircase(cfg), cfg.steps)
        trace = training.train_estimator(tc)
        runs[espec.label] = (trace, training.segment_final_estimates(trace))

    nce_trace, nce_final = runs["infonce"]
    assert np.all(nce_trace.estimates <= math.log(64) + 1e-12)
    assert all(v <= math.log(64) + 1e-12 for v in nce_final.values())

    interp_final = runs["interpolated_a0.01"][1]
    for mi in (8.0, 10.0):
        assert interp_final[mi] > nce_final[mi], \
            f"interpolated(0.01) {interp_final[mi]:.2f} not above infonce {nce_final[mi]:.2f} at MI={mi}"

    nwj_mi2 = runs["nwj"][1][2.0]
    assert 1.2 <= nwj_mi2 <= 2.0, f"nwj at MI=2 segment: {nwj_mi2:.3f}"

    elapsed = time.perf_counter() - started
    assert elapsed < 1800.0
    _report(9, f"20k-step joint-critic staircase runs: infonce capped at log 64; "
               f"interpolated(0.01) {interp_final[8.0]:.2f}/{interp_final[10.0]:.2f} above "
               f"infonce {nce_final[8.0]:.2f}/{nce_final[10.0]:.2f} at MI 8/10; "
               f"nwj MI=2 final {nwj_mi2:.2f} in [1.2, 2.0]; {elapsed:.0f}s < 30min")


def test_criterion_10_js_estimator():
    K, reps = 128, 5000
    for mi in (2.0, 6.0):
        vals = sweep_cell((EstimatorSpec("js"),), D, K, mi, reps,
                          seed=810, point_index=int(mi))["js"]
        z = abs(vals.mean() - mi) / _stderr(vals)
        assert z < 3.0, f"js with exact ratio off at MI={mi}: z={z:.2f}"

    cfg = harness.default_config("fig2", dataset="gaussian", steps=4000,
                                 batch_sizes=(64,), mi_levels=(2.0,), seed=810)
    espec = EstimatorSpec("js", critic={"hidden_sizes": [96, 96]})
    tc = harness.make_train_config(cfg, espec, "gaussian", "joint", 64,
                                   ((0, 2.0),), cfg.steps)
    trace = training.train_estimator(tc)
    final = training.smooth_trace(trace, 0.99)[-1]
    assert final >= 1.0, f"trained js at MI=2 reached only {final:.3f}"
    _report(10, f"js with the exact ratio matches MI at 2 and 6 (3 stderr); "
                f"trained js at MI=2 reaches {final:.2f} >= 1.0")


def test_criterion_11_total_correlation_upper_bound():
    K, reps = 256, 300
    rng = toy.make_rng(811)

    # mean-field encoder over independent inputs: analytic TC = 0
    d, rho = 4, 0.12
    spec = toy.gaussian_pair(d, rho)
    dim_spec = toy.gaussian_pair(1, rho)
    vals = np.empty(reps)
    for r in range(reps):
        uppers = []
        for _ in range(d):
            b = toy.sample_joint(dim_spec, K, rng)
            uppers.append(bounds.loo_upper(toy.log_conditional(dim_spec, b.x, b.y)).estimate)
        b = toy.sample_joint(spec, K, rng)
        lower = bounds.infonce_tractable(toy.log_conditional(spec, b.x, b.y)).estimate
        vals[r] = bounds.tc_upper(uppers, lower)
    z_mf = abs(vals.mean()) / _stderr(vals)
    assert z_mf < 3.0, f"mean-field TC {vals.mean():.4f}, z={z_mf:.2f}"

    # linear-Gaussian encoder y = Ax + sigma eps with non-diagonal A
    dx = dy = 4
    sigma2 = 1.0
    A = 0.6 * toy.standard_normal(toy.make_rng(812), (dy, dx))
    cov = A @ A.T + sigma2 * np.eye(dy)
    tc_true = 0.5 * (np.sum(np.log(np.diag(cov))) - np.linalg.slogdet(cov)[1])
    enc_reps = 200
    vals = np.empty(enc_reps)
    for r in range(enc_reps):
        x = toy.standard_normal(rng, (K, dx))
        y = x @ A.T + math.sqrt(sigma2) * toy.standard_normal(rng, (K, dy))
        uppers = []
        for i in range(dy):
            mean_i = x @ A[i]
            Ci = -0.5 * np.log(2 * np.pi * sigma2) \
                - (y[:, i][:, None] - mean_i[None, :]) ** 2 / (2 * sigma2)
            uppers.append(bounds.loo_upper(Ci).estimate)
        sq = ((y[:, None, :] - (x @ A.T)[None, :, :]) ** 2).sum(axis=2)
        C = -0.5 * dy * np.log(2 * np.pi * sigma2) - sq / (2 * sigma2)
        lower = bounds.infonce_tractable(C).estimate
        vals[r] = bounds.tc_upper(uppers, lower)
    assert vals.mean() >= tc_true - 3.0 * _stderr(vals), \
        f"tc estimate {vals.mean():.4f} below analytic {tc_true:.4f}"
    _report(11, f"tc upper bound: mean-field case {z_mf:.2f} stderr from 0; "
                f"encoder case {vals.mean():.3f} >= analytic {tc_true:.3f} - 3 stderr")


def test_criterion_12_mine_gradient_equivalence():
    rng = np.random.default_rng(812)
    for _ in range(20):
        K = int(rng.integers(3, 10))
        values = rng.standard_normal((K, K))
        state = float(np.exp(rng.standard_normal()))

        tape1 = Tape()
        S1 = tape1.parameter("S", values)
        res = bounds.mine_objective(S1, critics.EmaBaseline(0.9, state))
        g_mine = ad.backward(res.objective)["S"].values

        tape2 = Tape()
        S2 = tape2.parameter("S", values)
        frozen = Tensor(np.full(K, math.log(state)))
        g_tuba = ad.backward(bounds.tuba(S2, frozen).objective)["S"].values
        np.testing.assert_allclose(g_mine, g_tuba, atol=1e-10)

    # and through a real critic's parameters
    spec = toy.gaussian_pair(4, 0.5)
    batch = toy.sample_joint(spec, 16, toy.make_rng(90))
    critic = critics.make_separable(4, 4, hidden_sizes=(16,), embed_dim=8)
    values = critics.critic_init(critic, toy.make_rng(91))
    state = 1.7

    tape1 = Tape()
    params1 = {k: tape1.parameter(k, v) for k, v in values.items()}
    S = critics.score_matrix(critic, batch, params1)
    g_mine = ad.backward(bounds.mine_objective(S, critics.EmaBaseline(0.9, state)).objective)

    tape2 = Tape()
    params2 = {k: tape2.parameter(k, v) for k, v in values.items()}
    S = critics.score_matrix(critic, batch, params2)
    g_tuba = ad.backward(bounds.tuba(S, Tensor(np.full(16, math.log(state)))).objective)
    for k in values:
        np.testing.assert_allclose(g_mine[k].values, g_tuba[k].values, atol=1e-10)
    _report(12, "mine objective gradient equals tuba's with the baseline frozen at "
                "log(EMA) to 1e-10, on raw score matrices and through critic parameters")
