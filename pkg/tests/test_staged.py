import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hmmldpc.staged as staged
from hmmldpc.bp import bp_decode
from hmmldpc.channel import LLR_MAX
from hmmldpc.hmm import hmm_multiwalk
from hmmldpc.sim import make_frame
from hmmldpc.staged import (
    FAILED,
    DecodeOutcome,
    DecoderConfig,
    decode,
    load_fixture,
    reliability_metric,
    reliability_stats,
    sort_and_erase,
    two_bit_repair,
)

from .conftest import FIXTURES


def test_reliability_examples():
    assert reliability_metric([2, 2, 2, 2]) == 0.0
    assert reliability_metric([1, -1, 1, -1]) == 1e12
    assert reliability_metric([3, 1]) == pytest.approx(0.70711, abs=1e-5)
    with pytest.raises(ValueError):
        reliability_metric([1.0])


def test_reliability_stats_columns():
    X = np.array([[3.0, 2.0, 1.0], [1.0, 2.0, -1.0]])
    g = reliability_stats(X)
    assert g[0] == pytest.approx(np.sqrt(2) / 2)
    assert g[1] == 0.0 and g[2] == 1e12
    with pytest.raises(ValueError):
        reliability_stats(X[:1])


def test_erase_two_highest():
    llr = np.arange(1.0, 11.0)
    gamma = np.array([0.1, 5.0, 0.2, 0.3, 9.0, 0.1, 0.0, 0.4, 0.5, 0.6])
    out = sort_and_erase(llr, gamma, 2 / 10)
    assert np.flatnonzero(out == 0).tolist() == [1, 4]


def test_erase_ties_by_index():
    llr = np.ones(10)
    out = sort_and_erase(llr, np.zeros(10), 0.2)
    # ascending (gamma, index): the last two in that order are erased
    assert np.flatnonzero(out == 0).tolist() == [8, 9]
    assert np.array_equal(out, sort_and_erase(llr, np.zeros(10), 0.2))


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10))
def test_erase_only_zeroes(seed, k):
    rng = np.random.default_rng(seed)
    llr = rng.normal(0, 5, 128)
    gamma = rng.exponential(1, 128)
    f = 0.02 * k
    out = sort_and_erase(llr, gamma, f)
    kept = out != 0
    assert np.array_equal(out[kept], llr[kept])
    assert (~kept).sum() == int(np.ceil(round(f * 128, 9)))
    assert gamma[~kept].min() >= gamma[kept].max()


def test_erase_rejects_bad_fraction():
    with pytest.raises(ValueError):
        sort_and_erase(np.ones(10), np.zeros(10), 0.0)
    with pytest.raises(ValueError):
        sort_and_erase(np.ones(10), np.zeros(10), 0.5)


def test_config_defaults_and_validation():
    cfg = DecoderConfig()
    assert (cfg.max_walks, cfg.iters, cfg.bp_iters) == (100, 5, 250)
    assert cfg.erase_fractions == pytest.approx([0.02 * k for k in range(1, 11)])
    with pytest.raises(ValueError):
        DecoderConfig(stage_mask=(5,))
    with pytest.raises(ValueError):
        DecoderConfig(erase_max=0.3)
    with pytest.raises(ValueError):
        DecoderConfig(max_walks=0)


def test_outcome_stage_flag_consistency():
    with pytest.raises(AssertionError):
        DecodeOutcome(hard=np.zeros(2), success=False, stage=1)


# --- two-bit repair --------------------------------------------------------------


def test_repair_codeword_unchanged(code128):
    c = code128.encode(np.random.default_rng(0).integers(0, 2, 64))
    assert np.array_equal(two_bit_repair(c, code128.H), c)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_repair_recovers_up_to_two_flips(code128, seed, k):
    rng = np.random.default_rng(seed)
    c = code128.encode(rng.integers(0, 2, 64))
    d = c.copy()
    d[rng.choice(128, k, replace=False)] ^= 1
    assert np.array_equal(two_bit_repair(d, code128.H), c)


def test_repair_gives_up_or_returns_codeword(code128):
    rng = np.random.default_rng(1)
    for _ in range(20):
        d = rng.integers(0, 2, 128).astype(np.uint8)
        r = two_bit_repair(d, code128.H)
        if r is not None:
            assert not code128.syndrome(r).any()
            assert (r != d).sum() <= 2


# --- the staged pipeline --------------------------------------------------------


def test_high_snr_frame_stage1(code128):
    c, llr = make_frame(code128, 5.0, (1, 0, 0))
    out = decode(llr, code128, DecoderConfig(), seed=0)
    assert out.success and out.stage == 1
    assert out.walks_used <= 3
    assert np.array_equal(out.hard, c)
    assert np.array_equal(out.info, code128.G.info_bits(c))


def test_zero_llrs_fail(code128):
    cfg = DecoderConfig(max_walks=3, erase_step=0.1, erase_max=0.2)
    out = decode(np.zeros(128), code128, cfg, seed=0)
    assert not out.success and out.stage == FAILED
    # two erasure rounds each for stages 3 and 4, after stages 1 and 2
    assert out.bp_invocations == 6


def test_decode_deterministic(code128):
    _, llr = make_frame(code128, 2.0, (2, 0, 5))
    cfg = DecoderConfig(max_walks=10)
    a = decode(llr, code128, cfg, seed=(4, 5))
    b = decode(llr, code128, cfg, seed=(4, 5))
    assert a.stage == b.stage and np.array_equal(a.hard, b.hard) and a.history == b.history


def test_stage1_outcome_independent_of_later_stages(code128):
    cfg_all = DecoderConfig(max_walks=20, stage_mask=(1, 3, 4))
    cfg_one = DecoderConfig(max_walks=20, stage_mask=(1,))
    for f in range(40):
        _, llr = make_frame(code128, 2.0, (3, 0, f))
        a = decode(llr, code128, cfg_all, seed=(3, 0, f))
        b = decode(llr, code128, cfg_one, seed=(3, 0, f))
        assert (a.stage == 1) == (b.stage == 1)
        if b.stage == 1:
            assert np.array_equal(a.hard, b.hard) and a.walks_used == b.walks_used


def test_stage3_reuses_stage1_matrix(code128, monkeypatch):
    def forbidden(*args, **kwargs):
        raise AssertionError("stage 3 regenerated first-iteration LLRs")

    monkeypatch.setattr(staged, "first_iteration_matrix", forbidden)
    cfg = DecoderConfig(max_walks=3, stage_mask=(1, 3), erase_step=0.1)
    out = decode(np.zeros(128), code128, cfg, seed=0)
    assert out.stage == FAILED


def test_stage4_generates_matrix_when_stage2_off(code128, monkeypatch):
    calls = []
    real = staged.first_iteration_matrix

    def spy(*args, **kwargs):
        calls.append(args)
        return real(*args, **kwargs)

    monkeypatch.setattr(staged, "first_iteration_matrix", spy)
    cfg = DecoderConfig(max_walks=3, stage_mask=(4,), erase_step=0.1)
    out = decode(np.zeros(128), code128, cfg, seed=0)
    assert len(calls) == 1
    assert out.walks_used == 3 + 2 * 3


def test_repair2_inside_pipeline(code128):
    c = code128.encode(np.random.default_rng(7).integers(0, 2, 64))
    llr = np.where(c == 1, 4.0, -4.0)
    llr[[3, 90]] *= -1
    out = decode(llr, code128, DecoderConfig(max_walks=1, iters=1, bp_iters=1, repair2=True), seed=0)
    assert out.success and out.stage == 1
    assert np.array_equal(out.hard, c)


def test_fixture_chain_only(code128):
    llr, code, expected, seed, cfg = load_fixture(FIXTURES / "chain_only.json")
    assert code.H == code128.H
    assert expected == 1
    assert np.sum(llr == 16.0) == 1
    assert not bp_decode(llr, code.H, cfg.bp_iters).converged
    mw = hmm_multiwalk(llr, code.H, cfg.max_walks, cfg.iters, seed=(seed, 1, 0))
    assert not mw.decoded and mw.walks_used == cfg.max_walks
    out = decode(llr, code, cfg, seed=seed)
    assert out.stage == expected
    assert dict(out.history)["s1:bp"] == 0


def test_fixture_erasure_only():
    llr, code, expected, seed, cfg = load_fixture(FIXTURES / "erasure_only.json")
    assert expected in (3, 4)
    out = decode(llr, code, cfg, seed=seed)
    assert out.stage == expected
    assert out.erasure_fraction > 0
    labels = [label for label, _ in out.history]
    assert {"s1:hmm", "s1:bp", "s2:hmm", "s2:bp"} <= set(labels)
    assert all(u > 0 for label, u in out.history if label.startswith(("s1", "s2")))


def test_chain_rescue_exists_in_stress_corpus(code128):
    # over 1000 threshold-region frames, some frame is lost by BP and by every walk but saved by the chain
    rescued = 0
    for f in range(1000):
        c, llr = make_frame(code128, 2.5, (11, 0, f))
        if bp_decode(llr, code128.H, 250).converged:
            continue
        mw = hmm_multiwalk(llr, code128.H, 100, 5, seed=(f,))
        if mw.decoded:
            continue
        chained = bp_decode(mw.best_walk_output, code128.H, 250)
        if chained.converged and np.array_equal(chained.hard, c):
            rescued += 1
            break
    assert rescued


def test_noiseless_saturated_input_stage1(code128):
    c = code128.encode(np.ones(64, dtype=int))
    out = decode(np.where(c == 1, LLR_MAX, -LLR_MAX), code128, seed=1)
    assert out.stage == 1 and out.walks_used == 1 and out.bp_invocations == 0
