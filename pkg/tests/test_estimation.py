import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cvqkd_ir.attacks import AttackSpec, Block
from cvqkd_ir.estimation import (
    ChannelEstimator,
    EstimationError,
    EstimationResult,
    RevealedSubset,
    eps_confidence,
    estimate_channel,
    reveal_subset,
)
from cvqkd_ir.experiment import BlockConfig, Calibration, _estimate_block, simulate_raw_block
from cvqkd_ir.optics import DetectorModel, ModulationParams, RngStream

DET, MOD = DetectorModel(0.6), ModulationParams(36.6)
CAL = Calibration(mod=MOD, det=DET)
CFG = BlockConfig()


def block(spec, idx=0, cfg=CFG):
    return simulate_raw_block(cfg, spec, CAL, idx)


def test_reveal_everything(gen):
    blk, _, _ = block(AttackSpec(T=0.5), cfg=BlockConfig(pulses_per_block=100, test_pulses=0, reveal_m=2))
    sub = reveal_subset(blk, len(blk), gen)
    assert sub.m == len(blk) and not sub.key_mask.any()


def test_reveal_from_key_candidates(gen):
    blk, test, _ = block(AttackSpec(T=0.5))
    sub = reveal_subset(blk, 5000, gen, candidates=~test)
    assert sub.m == 5000
    assert sub.key_mask.sum() == 35_000
    assert not (sub.key_mask & test).any()
    assert sub.pairs.shape == (5000, 2)


def test_reveal_minimum_and_errors(gen):
    blk, _, _ = block(AttackSpec(T=0.5))
    assert reveal_subset(blk, 2, gen).m == 2
    with pytest.raises(ValueError):
        reveal_subset(blk, len(blk) + 1, gen)
    with pytest.raises(ValueError):
        reveal_subset(blk, 1, gen)


def test_noise_free_line():
    T, eta = 0.3, 0.6
    a = np.linspace(-5, 5, 101)
    sub = RevealedSubset(a, math.sqrt(eta * T) * a, np.zeros(101, bool))
    r = estimate_channel(sub, DetectorModel(eta), MOD)
    assert r.T_hat == pytest.approx(T, rel=1e-12)
    assert r.chi_hat == pytest.approx(-1.0, abs=1e-12)
    assert r.chi0_hat == pytest.approx(1 / (eta * T) - 1, rel=1e-12)
    assert r.eps_hat == pytest.approx(-1 / (eta * T), rel=1e-12)
    assert r.se_eps == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("T", [0.1, 0.5, 1.0])
def test_full_ir_estimate(T):
    r = _estimate_block(CFG, AttackSpec(mu=1.0, T=T, eps_T=0.1), CAL, 3)
    assert abs(r.eps_hat - 2.1) < 3 * r.se_eps
    assert r.m == 5000


def test_pure_bs_estimate():
    r = _estimate_block(CFG, AttackSpec(mu=0.0, T=0.25), CAL, 4)
    assert abs(r.eps_hat) < 3 * r.se_eps


def test_decomposition_identity_exact():
    for i in range(20):
        r = _estimate_block(CFG, AttackSpec(mu=0.3, T=0.2 + 0.04 * i, eps_T=0.1), CAL, i)
        assert abs(r.chi_hat - (r.chi0_hat + r.eps_hat)) <= 4 * np.finfo(float).eps * abs(r.chi_hat)
        assert r.se_eps >= 0


def test_eps_confidence():
    r = EstimationResult(T_hat=0.5, chi_hat=0, chi0_hat=0, eps_hat=2.0, se_eps=0.05, m=5000)
    assert eps_confidence(r, 0) == 2.0
    assert eps_confidence(r, 1) == pytest.approx(2.05)
    with pytest.raises(ValueError):
        eps_confidence(r, -1)


def test_error_bar_matches_resampling():
    # Oracle: spread of eps_hat over independent blocks.
    spec = AttackSpec(mu=0.5, T=0.25, eps_T=0.1)
    rs = [_estimate_block(CFG, spec, CAL, 1000 + i) for i in range(200)]
    emp = np.std([r.eps_hat for r in rs], ddof=1)
    se = np.mean([r.se_eps for r in rs])
    assert abs(emp / se - 1) < 0.2


def test_consistency_large_sample():
    spec = AttackSpec(mu=0.5, T=0.5, eps_T=0.1)
    cfg = BlockConfig(pulses_per_block=1_000_000, test_pulses=0, reveal_m=999_999)
    r = _estimate_block(cfg, spec, CAL, 0)
    assert abs(r.T_hat - 0.5) < 0.002
    assert abs(r.eps_hat - 1.1) < 3 * r.se_eps
    assert r.se_eps < 0.01


def test_estimation_ignores_ground_truth_flag():
    blk, test, _ = block(AttackSpec(mu=0.5, T=0.5))
    flipped = Block(blk.alice_x, blk.alice_p, ~blk.intercepted, blk.eve_x, blk.eve_p, blk.bob_choice, blk.bob_outcome)
    r1 = estimate_channel(reveal_subset(blk, 5000, RngStream(1, 1)), DET, MOD)
    r2 = estimate_channel(reveal_subset(flipped, 5000, RngStream(1, 1)), DET, MOD)
    assert r1 == r2


def test_sklearn_api():
    est = ChannelEstimator(eta=0.5, modulation_variance=10.0)
    assert est.get_params() == {"eta": 0.5, "modulation_variance": 10.0}
    c = clone(est).set_params(eta=0.7)
    assert c.eta == 0.7 and est.eta == 0.5
    with pytest.raises(NotFittedError):
        est.predict([[1.0]])
    a = np.array([[1.0], [2.0], [-1.0]])
    est.fit(a, [0.5, 1.1, -0.4])
    assert est.predict([[2.0]]) == pytest.approx([2 * est.slope_])
    assert est.result_.m == 3


def test_estimator_input_validation():
    est = ChannelEstimator()
    with pytest.raises(ValueError):
        est.fit([[1.0], [np.nan]], [1.0, 2.0])
    with pytest.raises(ValueError):
        est.fit([[1.0]], [1.0])
    with pytest.raises(ValueError):
        est.fit([[1.0, 2.0], [3.0, 4.0]], [1.0, 2.0])
    with pytest.raises(EstimationError):
        est.fit([[0.0], [0.0]], [1.0, 2.0])
    with pytest.raises(EstimationError):
        est.fit([[1.0], [-1.0]], [1.0, 1.0])


def test_estimate_channel_requires_two_pairs():
    sub = RevealedSubset(np.array([1.0]), np.array([1.0]), np.zeros(1, bool))
    with pytest.raises(EstimationError):
        estimate_channel(sub, DET, MOD)
