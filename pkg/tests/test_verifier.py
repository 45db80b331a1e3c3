import math
import random

import numpy as np
import pytest

from crossnoise import (
    Group,
    InvalidInput,
    MissingEstimate,
    NoiseEstimate,
    Utterance,
    Waveform,
    augment_utterance,
    check_pair_oracle,
    check_pair_practical,
    cross_noise_scale,
    power,
    summarize,
)
from crossnoise.verifier import ConditionReport, check_pair_standard, residual_matrix

FS = 16000


def wf(x):
    return Waveform(np.asarray(x, dtype=np.float64), FS)


def random_pair(rng, n=FS):
    s_h = wf(rng.uniform(0.05, 1) * rng.standard_normal(n))
    s_p = wf(rng.uniform(0.05, 1) * rng.standard_normal(n))
    n_h = wf(rng.uniform(1e-3, 0.1) * rng.standard_normal(n))
    n_p = wf(rng.uniform(1e-3, 0.1) * rng.standard_normal(n))
    return s_h, n_h, s_p, n_p


def oracle_report(s_h, n_h, s_p, n_p):
    a_h = cross_noise_scale(power(s_h), power(s_p))
    a_p = cross_noise_scale(power(s_p), power(s_h))
    return check_pair_oracle(s_h, n_h, n_p, a_h, s_p, n_p, n_h, a_p)


def test_residual_definitions(rng):
    r = oracle_report(*random_pair(rng))
    assert r.residual_c1 == r.snr_h_own - r.snr_p_cross
    assert r.residual_c2 == r.snr_h_cross - r.snr_p_own
    assert r.residual_c3 == r.snr_h_total - r.snr_p_total
    assert r.residual_c3_waveform == r.snr_h_total_waveform - r.snr_p_total_waveform
    assert r.mode == "oracle"


def test_oracle_residuals_vanish():
    rng = np.random.default_rng(1)
    reports = [oracle_report(*random_pair(rng, n=int(rng.integers(400, 4000)))) for _ in range(1000)]
    assert np.abs(residual_matrix(reports)).max() < 1e-9


def test_waveform_sum_cross_term_bound():
    rng = np.random.default_rng(2)
    for _ in range(20):
        r = oracle_report(*random_pair(rng))
        assert abs(r.residual_c3_waveform) <= 0.1


def test_waveform_sum_residual_bounded_by_cross_correlation(rng):
    s_h, n_h, s_p, n_p = random_pair(rng)
    r = oracle_report(s_h, n_h, s_p, n_p)
    # total-noise power gains a relative cross term of at most 2|rho|*sqrt(a*b)/(a+b) <= |rho|
    rho = abs(float(np.mean(n_h.samples * n_p.samples)) / math.sqrt(power(n_h) * power(n_p)))
    bound = 2 * abs(10 * math.log10(1 - rho))
    assert abs(r.residual_c3_waveform) <= bound


def test_full_symmetry_exact_zero(rng):
    s = wf(rng.standard_normal(1000))
    n = wf(0.1 * rng.standard_normal(1000))
    r = check_pair_oracle(s, n, n, 1.0, s, n, n, 1.0)
    assert r.residuals == (0.0, 0.0, 0.0)


def test_joint_scale_invariance(rng):
    comps = random_pair(rng)
    base = oracle_report(*comps)
    scaled = oracle_report(*(c.with_samples(3.7 * c.samples) for c in comps))
    np.testing.assert_allclose(scaled.residuals, base.residuals, atol=1e-9)
    assert scaled.snr_h_own == pytest.approx(base.snr_h_own, abs=1e-9)


def test_silent_component_rejected(rng):
    s_h, n_h, s_p, n_p = random_pair(rng)
    with pytest.raises(InvalidInput):
        check_pair_oracle(s_h, wf(np.zeros(FS)), n_p, 1.0, s_p, n_p, n_h, 1.0)


def test_length_mismatch_rejected(rng):
    s_h, n_h, s_p, n_p = random_pair(rng)
    with pytest.raises(InvalidInput):
        check_pair_oracle(s_h, wf(n_h.samples[:10]), n_p, 1.0, s_p, n_p, n_h, 1.0)


def _utterances_from_truth(s_h, n_h, s_p, n_p, clamped=False):
    y_h = Utterance("h", Group.HEALTHY, wf(s_h.samples + n_h.samples), NoiseEstimate(n_h, power(n_h), "h", 1.0),
                    power(s_h), clamped)
    y_p = Utterance("p", Group.PATHOLOGICAL, wf(s_p.samples + n_p.samples), NoiseEstimate(n_p, power(n_p), "p", 1.0),
                    power(s_p))
    return y_h, y_p


class TestPractical:
    def test_reduces_to_oracle(self, rng):
        comps = random_pair(rng)
        y_h, y_p = _utterances_from_truth(*comps)
        out_h = augment_utterance(y_h, y_p.noise_estimate, y_p.clean_power)
        out_p = augment_utterance(y_p, y_h.noise_estimate, y_h.clean_power)
        prac = check_pair_practical(y_h, y_p, out_h, out_p)
        orac = oracle_report(*comps)
        assert prac.mode == "practical"
        for name in ("snr_h_own", "snr_p_cross", "snr_h_cross", "snr_p_own", "snr_h_total", "snr_p_total"):
            assert getattr(prac, name) == pytest.approx(getattr(orac, name), abs=1e-12)
        np.testing.assert_allclose(prac.residuals, orac.residuals, atol=1e-12)

    def test_degraded_flag(self, rng):
        y_h, y_p = _utterances_from_truth(*random_pair(rng), clamped=True)
        out_h = augment_utterance(y_h, y_p.noise_estimate, y_p.clean_power)
        out_p = augment_utterance(y_p, y_h.noise_estimate, y_h.clean_power)
        assert check_pair_practical(y_h, y_p, out_h, out_p).degraded

    def test_missing_estimate(self, rng):
        y_h, y_p = _utterances_from_truth(*random_pair(rng))
        out_h = augment_utterance(y_h, y_p.noise_estimate, y_p.clean_power)
        out_p = augment_utterance(y_p, y_h.noise_estimate, y_h.clean_power)
        y_h.noise_estimate = None
        with pytest.raises(MissingEstimate):
            check_pair_practical(y_h, y_p, out_h, out_p)

    def test_non_reciprocal_rejected(self, rng):
        y_h, y_p = _utterances_from_truth(*random_pair(rng))
        out_h = augment_utterance(y_h, y_p.noise_estimate, y_p.clean_power)
        with pytest.raises(InvalidInput):
            check_pair_practical(y_h, y_p, out_h, out_h)

    def test_standard_gap(self, rng):
        s_h, n_h, s_p, n_p = random_pair(rng)
        y_h, y_p = _utterances_from_truth(s_h, n_h, s_p, n_p)
        d = check_pair_standard(y_h, y_p)
        assert d.gap == pytest.approx(10 * math.log10(power(s_h) / power(n_h)) - 10 * math.log10(power(s_p) / power(n_p)))


def _fake(r1, r2, r3, degraded=False):
    return ConditionReport("h", "p", 0, 0, 0, 0, 0, 0, r1, r2, r3, "oracle", degraded=degraded)


class TestSummarize:
    def test_single(self):
        s = summarize([_fake(0.5, -0.25, 1.0)])
        assert (s["c1"]["mean"], s["c2"]["mean"], s["c3"]["mean"]) == (0.5, -0.25, 1.0)
        assert s["c1"]["std"] == 0.0
        assert s["count"] == 1 and s["degraded"] == 0

    def test_symmetric(self):
        s = summarize([_fake(0.3, 0, 0), _fake(-0.3, 0, 0, degraded=True)])
        assert s["c1"]["mean"] == 0.0
        assert s["c1"]["max_abs"] == 0.3
        assert s["c1"]["std"] == pytest.approx(0.3)
        assert s["degraded"] == 1

    def test_empty(self):
        with pytest.raises(InvalidInput):
            summarize([])

    def test_permutation_invariant(self):
        rng = random.Random(3)
        reports = [_fake(rng.uniform(-1, 1), rng.uniform(-1e-10, 1e-10), rng.gauss(0, 5)) for _ in range(9)]
        ref = summarize(reports)
        for _ in range(20):
            rng.shuffle(reports)
            assert summarize(reports) == ref

    def test_oracle_suite(self):
        rng = np.random.default_rng(77)
        s = summarize([oracle_report(*random_pair(rng, 2000)) for _ in range(100)])
        assert s["c1"]["max_abs"] < 1e-9
        assert s["max_abs_residual"] < 1e-9
