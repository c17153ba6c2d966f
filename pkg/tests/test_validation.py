from __future__ import annotations

import json
import math

import numpy as np
import pytest

from stable_estim import linear_mix as lm
from stable_estim import subgaussian as sg
from stable_estim.validation import (
    RECORD_KEYS,
    DegenerateVarianceError,
    EmptyBinError,
    ValidationConfig,
    ValidationReport,
    binned_conditional_mean,
    draw_pairs,
    empirical_error_scale,
    run_validation,
)

REFERENCE = (1, 0, 2, 1, 1, 3)


@pytest.fixture(scope="module")
def ref_report():
    return run_validation(lm.build_model(*REFERENCE, 1.5), ValidationConfig(seed=11))


@pytest.fixture(scope="module")
def ref_pairs():
    return draw_pairs(lm.build_model(*REFERENCE, 1.5), 1_000_000, 12)


@pytest.mark.parametrize(
    "kw", [{"n_samples": 9999}, {"n_samples": 1e4 + 0.5}, {"bandwidth": 0.0}, {"trim": 0.5}, {"trim": -0.1},
           {"tolerances": {"nope": 1}}]
)
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        ValidationConfig(**kw)


def test_default_trim_rule():
    cfg = ValidationConfig()
    assert cfg.trim_for(1.3) == 0.01 and cfg.trim_for(1.31) == 0.0
    assert ValidationConfig(trim=0.05).trim_for(1.9) == 0.05


# -- binned regression -----------------------------------------------------------------------


def test_binned_exact_linear_data():
    cfg = ValidationConfig(n_samples=10_000)
    y = np.repeat(np.array(cfg.centers()), 40)
    slope, se = binned_conditional_mean(np.column_stack([0.4 * y, y]), cfg)
    assert slope == pytest.approx(0.4, rel=1e-15) and se == pytest.approx(0.0, abs=1e-15)


def test_binned_empty_bin_names_center():
    cfg = ValidationConfig(n_samples=10_000)
    y = np.full(1000, 50.0)
    with pytest.raises(EmptyBinError, match="y = -2"):
        binned_conditional_mean(np.column_stack([y, y]), cfg)


def test_binned_degenerate_variance():
    cfg = ValidationConfig(n_samples=10_000, bin_centers=(0.0,), bandwidth=0.1)
    with pytest.raises(DegenerateVarianceError):
        binned_conditional_mean(np.zeros((100, 2)), cfg)


def test_binned_requires_trim_for_heavy_tails():
    cfg = ValidationConfig(trim=0.0)
    with pytest.raises(ValueError, match="trim"):
        binned_conditional_mean(np.zeros((100, 2)), cfg, alpha=0.9)


def test_binned_linear_mix_monte_carlo():
    m = lm.build_model(*REFERENCE, 1.6)
    cfg = ValidationConfig(n_samples=1_000_000, seed=1, trim=0.01)
    slope, se = binned_conditional_mean(draw_pairs(m, cfg.n_samples, cfg.seed), cfg, scale=m.gammaY, alpha=m.alpha)
    assert abs(slope - lm.conditional_mean_slope(m)) <= 3 * se


# -- empirical dispersion ---------------------------------------------------------------------


def test_error_scale_at_zero_is_gamma_x(ref_pairs):
    assert abs(empirical_error_scale(ref_pairs, 0.0) - 1.0) <= 0.05


def test_error_scale_matches_formula(ref_pairs):
    m = lm.build_model(*REFERENCE, 1.5)
    assert abs(empirical_error_scale(ref_pairs, 0.3) / lm.error_scale(m, 0.3) - 1) <= 0.05


def test_error_scale_cauchy_subgaussian():
    m = sg.build_subgaussian(1.0, 1, 1, 0.0)
    pairs = draw_pairs(m, 1_000_000, 2)
    assert abs(empirical_error_scale(pairs, 0.0) * math.sqrt(2) - 1) <= 0.05


def test_error_scale_needs_enough_samples():
    with pytest.raises(ValueError, match="n >="):
        empirical_error_scale(np.ones((1000, 2)), 0.1)


# -- report ----------------------------------------------------------------------------------


def test_report_symmetric_model_passes():
    rep = run_validation(lm.build_model(1, 0, 1, 1, 1, 1, 1.5), ValidationConfig(seed=3))
    assert rep.passed, rep.to_json()
    assert rep.record("conditional_slope").theory == 0.5


def test_report_reference_model(ref_report):
    assert ref_report.record("conditional_slope").theory == pytest.approx(0.176235, abs=1e-6)
    assert ref_report.record("optimal_slope").theory == pytest.approx(0.114286, abs=1e-6)
    assert ref_report.record("error_scale@optimal").theory < ref_report.record("error_scale@conditional").theory
    assert ref_report.passed


def test_report_subgaussian_identity():
    rep = run_validation(sg.build_subgaussian(1.5, 2, 1, 0.5), ValidationConfig(seed=4))
    assert rep.record("conditional_slope").theory == 1.0
    assert rep.record("optimal_slope").theory == 1.0
    assert rep.record("estimator_identity").passed
    assert rep.passed, rep.to_json()


def test_report_round_trip(ref_report):
    text = ref_report.to_json()
    back = ValidationReport.from_json(text)
    assert back == ref_report
    assert back.to_json() == text
    d = json.loads(text)
    assert list(d) == ["status", "model", "provenance", "records", "errors"]
    assert all(list(r) == list(RECORD_KEYS) for r in d["records"])
    assert set(d["provenance"]) == {"seed", "n", "config_hash"}


def test_report_status_must_match_records(ref_report):
    d = ref_report.to_dict()
    d["status"] = "fail"
    with pytest.raises(ValueError):
        ValidationReport.from_dict(d)


def test_report_deterministic():
    m = lm.build_model(0.5, -1, 1, 2, 1, 0.7, 1.2)
    cfg = ValidationConfig(n_samples=200_000, seed=9)
    assert run_validation(m, cfg).to_json() == run_validation(m, cfg).to_json()


def test_se_halves_when_n_quadruples():
    m = lm.build_model(*REFERENCE, 1.5)
    small = run_validation(m, ValidationConfig(n_samples=250_000, seed=5))
    big = run_validation(m, ValidationConfig(n_samples=1_000_000, seed=5))
    for r_small, r_big in zip(small.records, big.records):
        if r_small.se:
            assert r_big.se <= 0.5 * r_small.se * 1.2, r_small.check


def test_sub_errors_become_failed_records():
    # a single narrow bin far in the tail holds fewer than 30 of 10^4 points
    cfg = ValidationConfig(n_samples=10_000, bin_centers=(500.0,), bandwidth=1e-3)
    rep = run_validation(lm.build_model(*REFERENCE, 1.5), cfg)
    assert not rep.passed
    assert not rep.record("conditional_slope").passed
    assert "EmptyBinError" in rep.errors["conditional_slope"]
    assert "error_scale@zero" in rep.errors  # n below the dispersion-fit minimum
    assert rep.record("optimal_slope").passed


def test_invalid_model_spec_raises():
    with pytest.raises(TypeError):
        run_validation({"model": "linear-mix"}, ValidationConfig())


def test_residual_record_optional():
    rep = run_validation(sg.build_subgaussian(1.5, 1, 1, 0.6), ValidationConfig(n_samples=200_000, seed=6,
                                                                                  residual_check=True))
    assert rep.record("residual_integrability").passed, rep.errors
