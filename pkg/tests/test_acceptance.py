"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (lines are printed even without ``-s``) or directly with
``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from stable_estim import linear_mix as lm
from stable_estim import oracle
from stable_estim import subgaussian as sg
from stable_estim.stable_core import (
    StableParams,
    SubordinatorParams,
    empirical_cf,
    positive_stable_sample,
    sas_cf,
    sas_sample,
)
from stable_estim.validation import ValidationConfig, binned_conditional_mean, draw_pairs, empirical_error_scale

# (a11, a12, a21, a22, gammaZ1, gammaZ2): two additive, one dense, two mixed-sign
ORACLE_MATRICES = (
    (1.0, 0.0, 2.0, 1.0, 1.0, 3.0),
    (1.0, 0.0, 1.0, 1.0, 1.0, 1.0),
    (0.7, -1.2, 1.5, 0.8, 1.1, 0.6),
    (2.0, 1.0, -1.0, 1.5, 0.5, 1.5),
    (-0.5, 1.0, 1.0, -1.5, 1.0, 0.8),
)
ORACLE_ALPHAS = (0.8, 1.0, 1.2, 1.5, 1.8)
ORACLE_YS = (-2.0, -1.0, 1.0, 2.0)


def _line(num: int, passed: bool, detail: str) -> str:
    return f"criterion {num} [{'PASS' if passed else 'FAIL'}]: {detail}"


def criterion_1():
    t0 = time.perf_counter()
    worst_fd = worst_cov = 0.0
    for row in ORACLE_MATRICES:
        for al in ORACLE_ALPHAS:
            m = lm.build_model(*row, al)
            slope = lm.conditional_mean_slope(m)
            for y in ORACLE_YS:
                scale = max(1.0, abs(y))
                worst_fd = max(worst_fd, abs(oracle.conditional_mean_fd_oracle(m, y) - slope * y) / scale)
                worst_cov = max(worst_cov, abs(oracle.conditional_mean_cov_oracle(m, y) - slope * y) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst_fd <= 1e-3 and worst_cov <= 1e-3 and elapsed < 120
    return ok, (f"100 cases, max scaled error fd={worst_fd:.2e} cov={worst_cov:.2e} (tol 1e-3), "
                f"{elapsed:.1f}s (budget 120s)")


def criterion_2():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        m = lm.random_model(rng, alpha_range=(1.0, 2.0))
        assert m.alpha > 1
        worst = max(worst, abs(lm.optimal_slope(m).value - lm.minimize_error_scale_numeric(m).value))
    misses = uniform_misses = unexplained = 0
    for _ in range(100):
        m = lm.random_model(rng, alpha_range=(0.1, 1.0))
        res = lm.optimal_slope(m)
        lo, hi = lm.search_bracket(m)
        uniform = np.arange(lo, hi + 1e-4, 1e-4)
        # the objective has |a - k|^alpha cusps at the kinks; a uniform grid only resolves them to
        # within (1e-4)^alpha, so the kinks themselves are added as scan nodes
        grid = np.union1d(uniform, [m.k1, m.k2])
        a_min = grid[np.argmin(lm.error_scale_pow(m, grid))]
        if min(abs(a_min - c) for c in res.candidates) > 1e-4:
            misses += 1
        fu = lm.error_scale_pow(m, uniform)
        if min(abs(uniform[np.argmin(fu)] - c) for c in res.candidates) > 1e-4:
            uniform_misses += 1
            # a uniform-grid miss is only a sampling artifact if the predicted endpoint beats every node
            unexplained += int(lm.error_scale_pow(m, res.candidates[0]) > fu.min())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and misses == 0 and unexplained == 0 and elapsed < 60
    return ok, (f"alpha>1 max |closed - numeric| = {worst:.2e} (tol 1e-6); alpha<=1 endpoint misses {misses}/100 "
                f"(uniform grid without kink nodes: {uniform_misses}, of which {unexplained} not explained by "
                f"cusp sampling); {elapsed:.1f}s")


def criterion_3():
    rng = np.random.default_rng(3)
    gaps = [abs(lm.conditional_mean_slope(m) - lm.optimal_slope(m).value)
            for m in (lm.random_model(rng, alpha=1.999) for _ in range(100))]
    worst = max(gaps)
    return worst <= 1e-3, f"max |conditional - optimal| at alpha=1.999 over 100 models = {worst:.2e} (tol 1e-3)"


def criterion_4():
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(1000):
        m = sg.random_subgaussian(rng)
        if not (sg.conditional_mean_slope_sg(m) == sg.optimal_slope_sg(m).value == sg.map_estimate(m, 1.0)):
            mismatches += 1
    worst = 0.0
    for _ in range(10):
        m = sg.random_subgaussian(rng)
        y = float(rng.uniform(-2, 2))
        worst = max(worst, abs(oracle.posterior_argmax(m, y, step=1e-3) - m.beta * y))
    ok = mismatches == 0 and worst <= 1e-3
    return ok, f"identity mismatches {mismatches}/1000; max |argmax - beta y| over 10 models = {worst:.1e} (tol 1e-3)"


def criterion_5():
    details, ok = [], True
    cases = (
        ("linear-mix", lm.build_model(1, 0, 2, 1, 1, 3, 1.6), None),
        ("sub-gaussian", sg.build_subgaussian(1.5, 2, 1, 0.5), 1.0),
    )
    for name, m, expected in cases:
        t0 = time.perf_counter()
        theory = lm.conditional_mean_slope(m) if expected is None else expected
        cfg = ValidationConfig(n_samples=1_000_000, seed=5, trim=0.01)
        slope, se = binned_conditional_mean(draw_pairs(m, cfg.n_samples, cfg.seed), cfg, scale=m.gammaY,
                                            alpha=m.alpha)
        dt = time.perf_counter() - t0
        good = abs(slope - theory) <= 3 * se and dt < 60
        ok &= good
        details.append(f"{name} slope {slope:.5f} vs {theory:.5f} ({abs(slope - theory) / se:.2f} SE, {dt:.1f}s)")
    return ok, "; ".join(details)


def criterion_6():
    reference = lm.build_model(1, 0, 2, 1, 1, 3, 1.5)
    dense = lm.build_model(0.7, -1.2, 1.5, 0.8, 1.1, 0.6, 1.2)
    cases = (
        (reference, 0.0, lm.error_scale),
        (reference, 0.3, lm.error_scale),
        (dense, lm.optimal_slope(dense).value, lm.error_scale),
        (sg.build_subgaussian(1.0, 1, 1, 0.0), 0.0, sg.error_scale_sg),
        (sg.build_subgaussian(1.5, 2, 1, 0.5), 1.0, sg.error_scale_sg),
        (sg.build_subgaussian(0.7, 1, 2, -0.3), 0.5, sg.error_scale_sg),
    )
    worst = 0.0
    for i, (m, a, formula) in enumerate(cases):
        pairs = draw_pairs(m, 1_000_000, 60 + i)
        worst = max(worst, abs(empirical_error_scale(pairs, a) / formula(m, a) - 1))
    return worst <= 0.05, f"6 (model, slope) pairs incl. Cauchy b=0, max relative error {worst:.2%} (tol 5%)"


def criterion_7():
    n = 1_000_000
    t = np.round(np.arange(1, 21) * 0.1, 10)
    worst_cf = 0.0
    worst_lt = 0.0
    for i, al in enumerate((0.7, 1.2, 1.8)):
        p = StableParams(al, 1.0)
        x = sas_sample(p, np.random.default_rng(70 + i), n)
        worst_cf = max(worst_cf, float(np.max(np.abs(empirical_cf(x, t) - sas_cf(p, t)))) * math.sqrt(n))
        a = positive_stable_sample(SubordinatorParams(al), np.random.default_rng(80 + i), n)
        for u in (0.5, 1.0, 2.0, 4.0):
            v = np.exp(-u * a)
            z = abs(v.mean() - math.exp(-(u ** (al / 2)))) / (v.std(ddof=1) / math.sqrt(n))
            worst_lt = max(worst_lt, z)
    ok = worst_cf <= 4 and worst_lt <= 3
    return ok, f"max ECF deviation {worst_cf:.2f}/sqrt(n) (tol 4); max Laplace z-score {worst_lt:.2f} (tol 3)"


def criterion_8():
    rng = np.random.default_rng(8)
    smallest = math.inf
    count = 0
    while count < 50:
        m = lm.random_model(rng, alpha_range=(1.0, 2.0))
        if m.k1 == m.k2 or m.gamma1 == m.gamma2:
            continue
        count += 1
        diff = lm.error_scale(m, lm.conditional_mean_slope(m)) - lm.error_scale(m, lm.optimal_slope(m).value)
        smallest = min(smallest, diff)
    return smallest > 1e-9, f"min gamma_e(conditional) - gamma_e(optimal) over 50 models = {smallest:.2e} (> 1e-9)"


def criterion_9():
    argv = [sys.executable, "-m", "stable_estim", "validate", "--model", "linear-mix", "--a", "1,0,2,1", "--gammas",
            "1,3", "--alpha", "1.5", "--n", "200000", "--seed", "9"]
    outs = [subprocess.run(argv, capture_output=True, check=False).stdout for _ in range(2)]
    same = outs[0] == outs[1] and len(outs[0]) > 0
    return same, f"two CLI validate runs, {len(outs[0])} bytes each, identical={same}"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 10)}


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num, capsys):
    passed, detail = CRITERIA[num]()
    with capsys.disabled():
        print("\n" + _line(num, passed, detail))
    assert passed, detail


if __name__ == "__main__":
    results = []
    for num, fn in CRITERIA.items():
        passed, detail = fn()
        results.append(passed)
        print(_line(num, passed, detail), flush=True)
    sys.exit(0 if all(results) else 1)
