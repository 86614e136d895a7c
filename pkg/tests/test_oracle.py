import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from fockcert.exceptions import DegenerateHeraldError, DomainError, TruncationError
from fockcert.fock import heralded_diagonals, success_probability
from fockcert.oracle import (
    kraus_operator,
    loss_kernel,
    loss_matrix,
    oracle_heralded,
    oracle_joint,
    oracle_povm_heralded,
)

from conftest import make_params


@pytest.mark.parametrize(
    "i, zeta, expected",
    [
        (0, 0.3, [1.0]),
        (2, 1.0, [0.0, 0.0, 1.0]),
        (2, 0.5, [0.25, 0.5, 0.25]),
    ],
)
def test_loss_kernel_examples(i, zeta, expected):
    assert loss_kernel(i, zeta) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("zeta", [0.0, 0.13, 0.5, 0.9, 1.0])
def test_kernel_rows_sum_to_one(zeta):
    for i in range(61):
        assert loss_kernel(i, zeta).sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("i", [1, 4, 9, 17])
@pytest.mark.parametrize("zeta", [0.2, 0.75])
def test_kernel_is_binomial(i, zeta):
    assert np.max(np.abs(loss_kernel(i, zeta) - binom.pmf(np.arange(i + 1), i, zeta))) < 1e-13


def test_kraus_completeness():
    # sum_k M_k^T M_k = 1 on the truncated space
    dim, zeta = 12, 0.37
    total = sum(kraus_operator(k, zeta, dim).T @ kraus_operator(k, zeta, dim) for k in range(dim))
    assert np.allclose(total, np.eye(dim), atol=1e-13)


@given(za=st.floats(0.0, 1.0), zb=st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_loss_channels_compose(za, zb):
    dim = 15
    a = loss_matrix(za, dim)
    b = loss_matrix(zb, dim)
    assert np.max(np.abs(a @ b - loss_matrix(za * zb, dim))) < 1e-12


def test_loss_matrix_read_only():
    mat = loss_matrix(0.5, 4)
    with pytest.raises(ValueError):
        mat[0, 0] = 2.0


@pytest.mark.parametrize("bad", [-0.1, 1.1])
def test_kernel_domain(bad):
    with pytest.raises(DomainError):
        loss_kernel(2, bad)


def test_herald_marginal_sums_to_one_minus_deficit():
    p = make_params(0.5, 0.8, 0.9, 0)
    joint = oracle_joint(p, 40)
    assert joint.p.sum() == pytest.approx(1.0 - joint.tail_deficit, abs=1e-13)
    assert joint.tail_deficit == pytest.approx(0.5**40)
    herald_marginal = joint.p.sum(axis=1)
    for m in range(6):
        assert herald_marginal[m] == pytest.approx(success_probability(p.with_m(m)), abs=1e-12)


def test_truncation_error():
    with pytest.raises(TruncationError):
        oracle_joint(make_params(0.6, 0.8, 0.8, 1), 5)


def test_lossless_projection():
    l2 = 0.3
    prob, state = oracle_heralded(make_params(l2, 1.0, 1.0, 2))
    assert prob == pytest.approx((1 - l2) * l2**2, abs=1e-15)
    assert state.probs[2] == pytest.approx(1.0, abs=1e-15)


def test_example_probability():
    prob, _ = oracle_heralded(make_params(0.5, 0.8, 1.0, 1))
    assert prob == pytest.approx(0.24691358024691357, abs=1e-12)


def test_vacuum():
    prob, state = oracle_heralded(make_params(0.0, 0.8, 0.5, 0))
    assert prob == 1.0
    assert state.probs[0] == 1.0


def test_degenerate():
    with pytest.raises(DegenerateHeraldError):
        oracle_heralded(make_params(0.0, 0.8, 0.5, 1))


@pytest.mark.parametrize(
    "l2, z1, z2, m",
    list(itertools.product((0.1, 0.3, 0.5), (0.6, 0.8, 1.0), (0.6, 0.8, 1.0), range(6))),
)
def test_closed_form_matches_oracle(l2, z1, z2, m):
    p = make_params(l2, z1, z2, m)
    prob_o, state_o = oracle_heralded(p)
    state = heralded_diagonals(p, 30)
    assert abs(success_probability(p) - prob_o) < 1e-12
    assert np.max(np.abs(state.probs - state_o.probs[:30])) < 1e-10


def test_povm_herald_matches_sum_of_outcomes():
    # a threshold detector heralds "a >= 1"
    p = make_params(0.4, 0.7, 0.9, 1)
    prob, _ = oracle_povm_heralded(p, lambda a: 1.0 if a >= 1 else 0.0)
    assert prob == pytest.approx(1.0 - success_probability(p.with_m(0)), abs=1e-12)
    assert not math.isnan(prob)
