import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockcert.detectors import (
    PNR,
    DetectorModel,
    cap_heralded_diagonals,
    cap_success_probability,
    cap_weight,
    click_weight_table,
    herald_probability,
    herald_state,
)
from fockcert.exceptions import DomainError
from fockcert.fock import heralded_diagonals, success_probability
from fockcert.oracle import oracle_povm_heralded

from conftest import make_params


def brute_force_weight(i, m, n):
    hits = sum(1 for assignment in itertools.product(range(n), repeat=i) if len(set(assignment)) == m)
    return hits / n**i


@pytest.mark.parametrize(
    "i, m, n, expected",
    [
        (0, 0, 5, 1.0),
        (2, 2, 2, 0.5),
        (3, 2, 5, 0.48),
    ],
)
def test_cap_weight_examples(i, m, n, expected):
    assert cap_weight(i, m, n) == pytest.approx(expected, abs=1e-15)


def test_cap_weight_matches_enumeration():
    for n in range(1, 7):
        for i in range(7):
            for m in range(n + 1):
                assert cap_weight(i, m, n) == pytest.approx(brute_force_weight(i, m, n), abs=1e-15)


@pytest.mark.parametrize("n", [1, 10, 15, 20])
def test_rows_sum_to_one(n):
    for i in range(41):
        assert math.fsum(cap_weight(i, m, n) for m in range(n + 1)) == pytest.approx(1.0, abs=1e-12)
    table = click_weight_table(n, 40)
    assert np.max(np.abs(table.rows.sum(axis=1) - 1.0)) < 1e-12


def test_table_matches_exact_weights():
    table = click_weight_table(12, 40)
    exact = np.array([[cap_weight(i, m, 12) for m in range(13)] for i in range(41)])
    assert np.max(np.abs(table.rows - exact)) < 1e-14


def test_table_cached():
    assert click_weight_table(7, 30) is click_weight_table(7, 30)


@given(m=st.integers(0, 10), n=st.integers(10, 10_000))
def test_diagonal_weight_product(m, n):
    expected = math.prod(1 - j / n for j in range(m))
    assert cap_weight(m, m, n) == pytest.approx(expected, abs=1e-14)
    assert 1 - cap_weight(m, m, n) <= m * (m - 1) / (2 * n) + 1e-15


def _pnr_limit_distances(i, m, n_values):
    target = 1.0 if m == i else 0.0
    return [abs(cap_weight(i, m, n) - target) for n in n_values]


N_SCAN = list(itertools.chain(range(1, 200), range(200, 10_001, 97)))


@pytest.mark.xfail(strict=True, reason="w(i, m, n) rises with n for some m < i before decaying; w(4, 3, 4) < w(4, 3, 5)")
def test_pnr_limit_monotone_from_n_equal_i():
    for i in range(9):
        for m in range(i + 1):
            ns = [n for n in N_SCAN if n >= max(i, 1)]
            dist = _pnr_limit_distances(i, m, ns)
            assert all(b <= a + 1e-15 for a, b in zip(dist, dist[1:])), (i, m)


def test_pnr_limit_exact_diagonal_monotone():
    for i in range(9):
        ns = [n for n in N_SCAN if n >= max(i, 1)]
        dist = _pnr_limit_distances(i, i, ns)
        assert all(b <= a + 1e-15 for a, b in zip(dist, dist[1:])), i


def test_pnr_limit_monotone_beyond_pair_count():
    # off the diagonal, w(i, m, n) = C(n, m) S(i, m) m! / n^i falls for n >= i (i - 1) / 2
    for i in range(9):
        for m in range(i):
            ns = [n for n in N_SCAN if n >= max(i * (i - 1) // 2, i, 1)]
            dist = _pnr_limit_distances(i, m, ns)
            assert all(b <= a + 1e-15 for a, b in zip(dist, dist[1:])), (i, m)
            assert dist[-1] <= i * (i - 1) / (2 * ns[-1])


def test_pnr_limit_direction_follows_ratio():
    # w(i, m, n + 1) / w(i, m, n) = (n + 1) / (n + 1 - m) * (n / (n + 1))^i
    for i in range(1, 9):
        for m in range(1, i):
            for n in range(i, 60):
                ratio = (n + 1) / (n + 1 - m) * (n / (n + 1)) ** i
                assert cap_weight(i, m, n + 1) / cap_weight(i, m, n) == pytest.approx(ratio, rel=1e-12)


@pytest.mark.parametrize("bad", [(1, -1, 3), (1, 4, 3), (-1, 0, 3)])
def test_cap_weight_domain(bad):
    with pytest.raises(DomainError):
        cap_weight(*bad)


def test_detector_model_validation():
    assert DetectorModel.cap(10).label() == "cap10"
    assert PNR.label() == "pnr"
    for bad in [("cap", None), ("cap", 0), ("pnr", 5), ("apd", None)]:
        with pytest.raises(DomainError):
            DetectorModel(*bad)
    with pytest.raises(DomainError):
        DetectorModel.cap(3).check_outcome(4)


def test_vacuum_herald_any_n():
    for n in (1, 5, 40):
        assert cap_success_probability(make_params(0.0, 0.6, 1.0, 0), DetectorModel.cap(n)) == 1.0


def test_single_diode_heralds_any_photon():
    p = make_params(0.5, 1.0, 1.0, 1)
    assert cap_success_probability(p, DetectorModel.cap(1)) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("l2, z1, z2, m, n", [(0.5, 0.9, 0.95, 4, 10), (0.3, 0.6, 0.8, 2, 3), (0.6, 0.8, 1.0, 5, 20)])
def test_cap_matches_oracle(l2, z1, z2, m, n):
    p = make_params(l2, z1, z2, m)
    det = DetectorModel.cap(n)
    prob_o, state_o = oracle_povm_heralded(p, lambda a: cap_weight(a, m, n), 60)
    assert cap_success_probability(p, det) == pytest.approx(prob_o, abs=1e-10)
    state = cap_heralded_diagonals(p, det, 30)
    assert np.max(np.abs(state.probs - state_o.probs[:30])) < 1e-10


def test_large_cascade_approaches_pnr():
    p = make_params(0.4, 0.9, 0.9, 3)
    cap = cap_heralded_diagonals(p, DetectorModel.cap(2000), 20)
    pnr = heralded_diagonals(p, 20)
    assert np.max(np.abs(cap.probs - pnr.probs)) <= 1e-2


def test_single_diode_vacuum_herald_is_pnr_vacuum():
    p = make_params(0.0, 0.7, 0.9, 0)
    state = cap_heralded_diagonals(p, DetectorModel.cap(1), 5)
    assert state.probs.tolist() == heralded_diagonals(p, 5).probs.tolist()


@given(
    l2=st.floats(0.0, 0.7),
    z1=st.floats(0.05, 1.0),
    z2=st.floats(0.0, 1.0),
    m=st.integers(0, 4),
    n=st.sampled_from([4, 8, 16, 32]),
)
@settings(max_examples=40, deadline=None)
def test_cap_normalization(l2, z1, z2, m, n):
    p = make_params(l2, z1, z2, m)
    det = DetectorModel.cap(n)
    if herald_probability(p, det) <= 1e-200:
        return
    state = herald_state(p, det, 30)
    assert state.probs.sum() + state.tail_mass == pytest.approx(1.0, abs=1e-9)


def test_dispatch():
    p = make_params(0.3, 0.8, 0.9, 2)
    assert herald_probability(p, PNR) == success_probability(p)
    assert herald_state(p, PNR, 10).probs.tolist() == heralded_diagonals(p, 10).probs.tolist()
    assert herald_probability(p, DetectorModel.cap(5)) == cap_success_probability(p, DetectorModel.cap(5))
