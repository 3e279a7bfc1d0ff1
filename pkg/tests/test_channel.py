import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from hmmldpc.channel import (
    LLR_MAX,
    ChannelParams,
    awgn,
    channel_llr,
    demodulate,
    hard_decision,
    llr_to_prob,
    modulate,
    prob_to_llr,
)


def test_modulate_mapping():
    assert np.array_equal(modulate(np.zeros(4, dtype=int)), np.ones(4))
    assert np.array_equal(modulate([0, 1]), [1.0, -1.0])


def test_round_trip_noiseless():
    bits = np.random.default_rng(0).integers(0, 2, 100)
    y = awgn(modulate(bits), ChannelParams(0.0, noiseless=True), rng=1)
    assert np.array_equal(y, modulate(bits))
    assert np.array_equal(demodulate(y), bits)


def test_sigma_at_zero_db():
    assert ChannelParams(0.0, rate=0.5).sigma == pytest.approx(1.0, abs=1e-15)
    assert ChannelParams(3.0, rate=0.5).sigma == pytest.approx(np.sqrt(10 ** -0.3))


def test_awgn_deterministic():
    p = ChannelParams(2.0)
    s = modulate(np.zeros(64, dtype=int))
    assert np.array_equal(awgn(s, p, 5), awgn(s, p, 5))
    assert not np.array_equal(awgn(s, p, 5), awgn(s, p, 6))


def test_awgn_unit_variance():
    noise = awgn(np.zeros(10**6), ChannelParams(0.0), rng=3)
    assert np.var(noise) == pytest.approx(1.0, abs=0.01)


def test_llr_formula():
    p = ChannelParams(0.0)
    assert channel_llr([0.0], p)[0] == 0.0
    assert channel_llr([1.0], p)[0] == pytest.approx(-2.0)
    assert channel_llr([-100.0], p)[0] == LLR_MAX


def test_llr_noiseless_saturates():
    p = ChannelParams(0.0, noiseless=True)
    assert np.array_equal(channel_llr([1.0, -1.0, 0.0], p), [-LLR_MAX, LLR_MAX, 0.0])


@settings(max_examples=200)
@given(st.floats(-5, 5), st.floats(1e-3, 1.0))
def test_llr_strictly_decreasing(y, dy):
    p = ChannelParams(1.0)
    a, b = channel_llr([y, y + dy], p)
    assert b < a


@pytest.mark.parametrize("ebn0", [8.0, 11.0])
def test_wrong_sign_rate_matches_gaussian_tail(ebn0):
    # all-zero transmission: P(LLR > 0) = Q(1 / sigma) = Q(sqrt(2 R Eb/N0))
    p = ChannelParams(ebn0)
    n = 10**5
    y = awgn(modulate(np.zeros(n, dtype=int)), p, rng=4)
    rate = np.mean(channel_llr(y, p) > 0)
    expected = norm.sf(1.0 / p.sigma)
    assert abs(rate - expected) < 5 * np.sqrt(expected / n) + 1e-5
    if ebn0 >= 11.0:
        assert rate < 1e-3


@settings(max_examples=300)
@given(st.floats(1e-9, 1 - 1e-9))
def test_prob_llr_inverse(p):
    assert llr_to_prob(prob_to_llr(p)) == pytest.approx(p, abs=1e-12)


def test_hard_decision_sign():
    assert np.array_equal(hard_decision([-3.0, 0.0, 2.0]), [0, 0, 1])
    assert llr_to_prob(0.0) == 0.5
