import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockcert.detectors import PNR, DetectorModel
from fockcert.exceptions import DomainError, InsufficientSamplesError
from fockcert.fock import DiagonalState, heralded_diagonals
from fockcert.montecarlo import (
    SIGNIFICANCE_FLOOR,
    CampaignConfig,
    _samples_for,
    draw_run,
    run_stream,
    simulate_ensemble,
    simulate_runs,
    summarize_runs,
    truncate_state,
    witness_pair,
)

from conftest import make_params


@pytest.mark.parametrize(
    "prob, reps, expected",
    [
        (1.0, 10**8, 10**8),
        (1e-5, 10**8, 1000),
        (2.34e-4, 10**8, 23400),
    ],
)
def test_samples_examples(prob, reps, expected):
    assert _samples_for(prob, reps) == expected


def test_samples_floor():
    with pytest.raises(InsufficientSamplesError) as info:
        _samples_for(0.99e-5, 10**8)
    assert info.value.n_samples < 1000
    assert SIGNIFICANCE_FLOOR == 1000


@given(prob=st.floats(1e-5, 1.0), reps=st.integers(10**5, 10**9))
def test_samples_is_floor(prob, reps):
    n = prob * reps
    if n < SIGNIFICANCE_FLOOR:
        return
    got = _samples_for(prob, reps)
    assert got in (int(np.floor(n)), int(np.floor(n)) + 1)
    assert abs(got - n) < 1


def test_delta_state_histogram():
    state = DiagonalState.from_probs([0, 0, 0, 0, 1.0, 0])
    hist = draw_run(state, 12345, run_stream(3, ()))
    assert hist.tolist() == [0, 0, 0, 0, 12345, 0, 0]


def test_binomial_frequencies_within_five_sigma():
    n = 10**6
    state = DiagonalState.from_probs([0.25, 0.5, 0.25])
    hist = draw_run(state, n, run_stream(11, (0,)))
    for k, p in enumerate([0.25, 0.5, 0.25]):
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(hist[k] / n - p) < 5 * sigma
    assert hist[-1] == 0
    assert hist.sum() == n


def test_same_seed_same_histogram():
    state = heralded_diagonals(make_params(0.5, 0.8, 0.95, 3), 20)
    a = draw_run(state, 50_000, run_stream(42, (1, 2)))
    b = draw_run(state, 50_000, run_stream(42, (1, 2)))
    assert np.array_equal(a, b)
    c = draw_run(state, 50_000, run_stream(42, (1, 3)))
    assert not np.array_equal(a, c)


def test_overflow_bin_collects_tail():
    state = DiagonalState(np.array([0.5, 0.25]), 0.25)
    hist = draw_run(state, 10**6, run_stream(5, ()))
    assert hist.size == 3
    assert abs(hist[2] / 10**6 - 0.25) < 5 * np.sqrt(0.25 * 0.75 / 10**6)


def test_truncate_state_folds_tail():
    state = DiagonalState.from_probs([0.1, 0.2, 0.3, 0.4])
    cut = truncate_state(state, 2)
    assert cut.probs.tolist() == [0.1, 0.2]
    assert cut.tail_mass == pytest.approx(0.7)
    assert truncate_state(state, 10) is state


@pytest.mark.parametrize(
    "hist, m, expected",
    [
        ([0, 0, 0, 0, 100, 0, 0], 4, (0.0, 1.0)),
        ([100, 0, 0, 0, 0, 0, 0], 4, (0.0, 0.0)),
        ([0, 0, 0, 50, 0, 50, 0], 4, (0.5, 0.0)),
        ([0, 0, 0, 0, 50, 0, 50], 4, (0.5, 0.5)),
    ],
)
def test_witness_examples(hist, m, expected):
    assert witness_pair(hist, m) == expected


def test_witness_domain():
    with pytest.raises(DomainError):
        witness_pair([1, 0, 0], 2)
    with pytest.raises(DomainError):
        witness_pair([0, 0, 0, 0], 1)


def test_ideal_fock_ensemble():
    stats = simulate_ensemble(make_params(0.5, 1.0, 1.0, 4), PNR, CampaignConfig(10**6, 20))
    assert (stats.mean_x, stats.mean_y, stats.sd_x, stats.sd_y) == (0.0, 1.0, 0.0, 0.0)


def test_ensemble_mean_matches_analytic():
    p = make_params(0.5, 0.8, 0.95, 3)
    cfg = CampaignConfig(repetitions=10**6, runs=200, seed=9)
    stats = simulate_ensemble(p, PNR, cfg)
    state = heralded_diagonals(p, 20)
    x, y = state.witness(3)
    assert abs(stats.mean_y - y) < 5 * stats.sd_y / np.sqrt(stats.runs)
    assert abs(stats.mean_x - x) < 5 * stats.sd_x / np.sqrt(stats.runs)


def test_seed_changes_bits_not_statistics():
    p = make_params(0.5, 0.8, 0.95, 3)
    a = simulate_ensemble(p, PNR, CampaignConfig(10**6, 100, seed=1))
    b = simulate_ensemble(p, PNR, CampaignConfig(10**6, 100, seed=2))
    assert a != b
    assert abs(a.mean_y - b.mean_y) < 5 * np.hypot(a.sd_y, b.sd_y) / np.sqrt(100)
    assert a == simulate_ensemble(p, PNR, CampaignConfig(10**6, 100, seed=1))


def test_runs_are_independent_of_ensemble_size():
    state = heralded_diagonals(make_params(0.5, 0.8, 0.95, 3), 20)
    small = simulate_runs(state, 5000, 10, seed=4, key=(2,))
    large = simulate_runs(state, 5000, 30, seed=4, key=(2,))
    assert np.array_equal(small, large[:10])


def test_summarize_uses_sample_sd():
    hists = np.array([[0, 10, 0], [0, 5, 5]])
    stats = summarize_runs(hists, 1)
    assert stats.mean_y == 0.75
    assert stats.sd_y == pytest.approx(np.std([1.0, 0.5], ddof=1))


def test_cap_ensemble_runs():
    stats = simulate_ensemble(make_params(0.5, 0.8, 0.95, 2), DetectorModel.cap(10), CampaignConfig(10**6, 10))
    assert 0 < stats.mean_y < 1


def test_insufficient_samples():
    with pytest.raises(InsufficientSamplesError):
        simulate_ensemble(make_params(0.5, 0.05, 0.9, 5), PNR, CampaignConfig(10**6, 10))


@pytest.mark.parametrize(
    "kwargs",
    [dict(repetitions=0), dict(runs=1), dict(sample_cutoff=1), dict(seed=-1)],
)
def test_campaign_validation(kwargs):
    with pytest.raises(DomainError):
        CampaignConfig(**kwargs)


def test_cutoff_must_cover_target():
    with pytest.raises(DomainError):
        CampaignConfig(sample_cutoff=5).check_target(4)


@given(probs=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8), n=st.integers(1, 5000), seed=st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_histogram_total(probs, n, seed):
    total = sum(probs)
    if total <= 0:
        return
    state = DiagonalState.from_probs(np.array(probs) / total)
    hist = draw_run(state, n, run_stream(seed, ()))
    assert hist.sum() == n
    assert np.all(hist[:-1][state.probs == 0] == 0)
