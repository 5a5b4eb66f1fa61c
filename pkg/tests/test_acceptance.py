"""Acceptance battery: the project's ten exit criteria, one test each, every
tolerance pinned in the test body.  Each test prints one PASS/FAIL line
(run with ``pytest tests/test_acceptance.py -v -s`` to see them).

Three criteria assert claims that are demonstrably out of reach for a correct
implementation (6 at its top lag index, 8, 9); they run faithfully, report
their true status, and the mathematically sound part of each claim is locked
in by the companion tests at the bottom of this module.  The analysis lives
with the reviewer notes, not here.
"""

import json
import time
from itertools import permutations

import numpy as np
import pytest

import latentvar as lv
from latentvar import cli

from conftest import (
    canon_keys,
    gen_single_path_instance,
    gen_stationary_model,
    gen_unique_parent_tree,
    matches_tree_recovery,
)


def report(num: int, ok: bool, detail: str = ""):
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"criterion {num}: {detail}"


def timed(budget: float, started: float) -> str:
    elapsed = time.perf_counter() - started
    assert elapsed < budget, f"exceeded time budget: {elapsed:.2f}s >= {budget}s"
    return f"({elapsed:.2f}s < {budget}s)"


def test_criterion_01_dairy_case(tmp_path, dairy_meas):
    t0 = time.perf_counter()
    meas_path = tmp_path / "dairy.json"
    out_path = tmp_path / "net.json"
    cli.write_json(str(meas_path), cli.measurements_to_json(dairy_meas))
    code = cli.main(["recover", str(meas_path), "--mode", "dtr", "--out", str(out_path)])
    assert code == 0
    net = cli.network_from_json(json.loads(out_path.read_text()))
    ok = net.latent_count == 1 and net.edges == frozenset({(0, 2), (2, 1)})
    report(1, ok, f"one latent, milk -> L0 -> cheese {timed(1.0, t0)}")


def test_criterion_02_west_german_case(tmp_path, west_german_meas):
    t0 = time.perf_counter()
    meas_path = tmp_path / "wg.json"
    out_path = tmp_path / "net.json"
    cli.write_json(str(meas_path), cli.measurements_to_json(west_german_meas))
    code = cli.main(["recover", str(meas_path), "--mode", "dtr", "--out", str(out_path)])
    assert code == 0
    net = cli.network_from_json(json.loads(out_path.read_text()))
    ok = net.latent_count == 1 and net.edges == frozenset({(0, 2), (2, 0), (2, 1)})
    report(2, ok, f"one latent, expend -> L0 -> {{expend, invest}} {timed(1.0, t0)}")


def test_criterion_03_two_network_ambiguity(ambig_left, ambig_right, ambig_meas):
    t0 = time.perf_counter()
    nets = lv.nm(ambig_meas)
    keys = canon_keys(nets)
    ok = (
        canon_keys([ambig_left, ambig_right]) <= keys
        and all(g.latent_count == 3 for g in nets)
        and keys == canon_keys(lv.oracle_minimal(ambig_meas, 5))
    )
    report(3, ok, f"{len(nets)} minimal networks, search == brute force {timed(10.0, t0)}")


def test_criterion_04_tree_recovery_identifiability():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    total = 200
    for _ in range(total):
        g = gen_unique_parent_tree(rng, n_max=12, m_max=5)
        try:
            rec = lv.dtr(lv.complete_census(g))
        except lv.LatentVarError:
            failures += 1
            continue
        if not matches_tree_recovery(g, rec):
            failures += 1
    ok = failures == 0
    report(4, ok, f"{total - failures}/{total} exact recoveries {timed(60.0, t0)}")


def test_criterion_05_merge_search_completeness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(31337)
    matches = 0
    total = 100
    done = 0
    while done < total:
        got = gen_single_path_instance(rng)
        if got is None:
            continue
        _, meas = got
        done += 1
        if canon_keys(lv.nm(meas)) == canon_keys(lv.oracle_minimal(meas, 5)):
            matches += 1
    ok = matches == total
    report(5, ok, f"{matches}/{total} search == brute force {timed(600.0, t0)}")


def test_criterion_06_coefficient_bound_soundness():
    # Expected red: the bound is exactly 0 at k = l-1, but the projection of
    # the latent noise onto the correlated regressor stack leaves a small
    # nonzero remainder on that lag whenever l >= 2 (the companion test below
    # pins the k <= l-2 and l = 1 parts, which do hold).
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    bad = 0
    total = 50
    for _ in range(total):
        model = gen_stationary_model(rng)
        b = model.blocks
        l = lv.nilpotency_index(b.a22)
        gammas = [lv.population_autocov(model, h) for h in range(l + 2)]
        coeffs, _ = lv.fit_from_autocovariances(gammas, l)
        m_val, l_val = lv.compute_ml_ratio(model)
        rho12 = np.linalg.norm(b.a12, 2)
        rho22 = np.linalg.norm(b.a22, 2)
        a_true = [b.a11] + [
            b.a12 @ np.linalg.matrix_power(b.a22, k - 1) @ b.a21
            for k in range(1, l + 1)
        ]
        for k in range(l):
            err = np.abs(coeffs[k] - a_true[k]).sum(axis=0).max()
            bound = lv.prop1_bound(model.n, l, k, m_val / l_val, rho12, rho22)
            if err > bound + 1e-8:
                bad += 1
                break
    ok = bad == 0
    report(6, ok, f"{total - bad}/{total} models inside the bound {timed(60.0, t0)}")


def test_criterion_07_noise_ratio_monotonicity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    bad = 0
    for _ in range(20):
        model = gen_stationary_model(rng)
        vals = []
        for ratio in (0.1, 1.0, 10.0, 100.0):
            scaled = lv.LatentVarModel(model.blocks, sigma_x2=ratio, sigma_z2=1.0)
            m_val, l_val = lv.compute_ml_ratio(scaled)
            vals.append(m_val / l_val)
        if not all(b < a - 1e-10 for a, b in zip(vals, vals[1:])):
            bad += 1
    ok = bad == 0
    report(7, ok, f"{20 - bad}/20 structures strictly decreasing {timed(60.0, t0)}")


def _support_error_median(n: int, seeds: range) -> float:
    errs = []
    for seed in seeds:
        cfg = lv.DrgConfig(
            n=n, m=n, p=0.4, q=0.4, a=0.1, sigma_x2=0.1, sigma_z2=0.1, seed=seed
        )
        model = lv.gen_drg(cfg)
        panel = lv.simulate(model, 1000, seed=seed + 777)
        lag = lv.select_lag(panel, 4, "aic")
        rep = lv.fit_coefficients(panel, lag)
        meas = lv.extract_support(rep, 0.05)
        true0 = (np.abs(model.blocks.a11) > 1e-12).astype(int)
        errs.append(((meas.supports[0] - true0) ** 2).sum() / n**2)
    return float(np.median(errs))


def test_criterion_08_support_error_trend():
    # Expected red: with the latent share held at m = n the error is dominated
    # by misses of weak direct links, a per-entry quantity that does not move
    # with n, so the medians are statistically flat rather than decreasing.
    t0 = time.perf_counter()
    medians = [_support_error_median(n, range(100)) for n in (10, 20, 40)]
    ok = all(b <= a for a, b in zip(medians, medians[1:]))
    report(8, ok, f"medians {[f'{m:.4f}' for m in medians]} {timed(600.0, t0)}")


def test_criterion_09_noise_ratio_error_trend():
    # Expected red: at this sparsity almost no draw has active latent
    # coupling, so the median error equals the sampling floor, which does not
    # move with the noise ratio (the companion below shows the mean latent
    # bias itself does fall tenfold per decade).
    t0 = time.perf_counter()
    medians = []
    for ratio in (0.1, 1.0, 10.0, 100.0):
        errs = []
        for seed in range(100):
            cfg = lv.DrgConfig(
                n=5, m=5, p=0.05, q=0.05, a=0.1,
                sigma_x2=0.1 * ratio, sigma_z2=0.1, seed=seed,
            )
            model = lv.gen_drg(cfg)
            panel = lv.simulate(model, 1000, seed=seed + 555)
            lag = lv.select_lag(panel, 4, "aic")
            rep = lv.fit_coefficients(panel, lag)
            errs.append(np.abs(rep.b_hat[0] - model.blocks.a11).sum(axis=0).max())
        medians.append(float(np.median(errs)))
    ok = all(b < a for a, b in zip(medians, medians[1:]))
    report(9, ok, f"medians {[f'{m:.4f}' for m in medians]} {timed(300.0, t0)}")


def test_criterion_10_latent_free_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        blocks = lv.BlockTransitionMatrix(
            np.where(rng.random((n, n)) < 0.7, rng.uniform(-0.25, 0.25, (n, n)), 0.0),
            np.zeros((n, m)),
            rng.uniform(-0.25, 0.25, (m, n)),
            np.zeros((m, m)),
        )
        model = lv.LatentVarModel(blocks)
        gammas = [lv.population_autocov(model, h) for h in range(3)]
        coeffs, _ = lv.fit_from_autocovariances(gammas, 1)
        worst = max(worst, float(np.abs(coeffs[0] - blocks.a11).max()))
    ok = worst < 1e-8
    report(10, ok, f"max |B0 - A11| = {worst:.2e} {timed(60.0, t0)}")


# --- companions: the attainable content behind criteria 6, 9, and the
# latent-budget behavior that stands in for the large-scale timing studies


def test_companion_bound_soundness_below_top_lag():
    """The analytic bound holds wherever its derivation applies: every lag
    index below l-1, and every lag of an l = 1 model (exactly zero gap)."""
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(50):
        model = gen_stationary_model(rng)
        b = model.blocks
        l = lv.nilpotency_index(b.a22)
        gammas = [lv.population_autocov(model, h) for h in range(l + 2)]
        coeffs, _ = lv.fit_from_autocovariances(gammas, l)
        m_val, l_val = lv.compute_ml_ratio(model)
        rho12 = np.linalg.norm(b.a12, 2)
        rho22 = np.linalg.norm(b.a22, 2)
        a_true = [b.a11] + [
            b.a12 @ np.linalg.matrix_power(b.a22, k - 1) @ b.a21
            for k in range(1, l + 1)
        ]
        for k in range(l - 1):
            err = np.abs(coeffs[k] - a_true[k]).sum(axis=0).max()
            bound = lv.prop1_bound(model.n, l, k, m_val / l_val, rho12, rho22)
            assert err <= bound + 1e-8
            checked += 1
        if l == 1:
            assert np.abs(coeffs[0] - a_true[0]).max() < 1e-9
    assert checked >= 50


def test_companion_mean_latent_bias_falls_with_noise_ratio():
    """Population-level coefficient bias, averaged over 100 random draws,
    falls strictly across the noise-ratio grid (tenfold per decade)."""
    means = []
    for ratio in (0.1, 1.0, 10.0, 100.0):
        vals = []
        for seed in range(100):
            cfg = lv.DrgConfig(n=5, m=5, p=0.05, q=0.05, a=0.1, seed=seed)
            blocks = lv.gen_drg(cfg).blocks
            model = lv.LatentVarModel(blocks, sigma_x2=0.1 * ratio, sigma_z2=0.1)
            l = lv.nilpotency_index(blocks.a22)
            gammas = [lv.population_autocov(model, h) for h in range(l + 2)]
            coeffs, _ = lv.fit_from_autocovariances(gammas, l)
            vals.append(np.abs(coeffs[0] - blocks.a11).sum(axis=0).max())
        means.append(float(np.mean(vals)))
    assert all(b < a for a, b in zip(means, means[1:]))
    assert means[0] / means[-1] > 100.0


def test_companion_latent_budget_boundary(ambig_meas):
    """The initial merge graph for the ambiguity example needs exactly five
    latent nodes: a budget of 5 works, 4 raises the budget error."""
    assert len(lv.nm(ambig_meas, cap=5)) == 2
    with pytest.raises(lv.CapExceeded):
        lv.nm(ambig_meas, cap=4)
