from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asep_lab.errors import DegenerateInputError, PreconditionError
from asep_lab.identities import (
    TauBinomial,
    check_det_identity,
    check_identity1,
    check_identity2,
    check_identity3,
    log_tau_binomial,
    random_points,
    run_suite,
    tau_binomial,
)
from asep_lab.rates import HoppingRates


def test_tau_binomial_small_cases():
    tau = Fraction(1, 3)
    assert tau_binomial(4, 0, tau) == 1
    assert tau_binomial(4, 5, tau) == 0
    assert tau_binomial(4, -1, tau) == 0
    # [3 choose 1]_tau = 1 + tau + tau^2
    assert tau_binomial(3, 1, tau) == 1 + tau + tau**2
    # [4 choose 2]_tau = 1 + tau + 2 tau^2 + tau^3 + tau^4
    assert tau_binomial(4, 2, tau) == 1 + tau + 2 * tau**2 + tau**3 + tau**4


@given(st.integers(0, 12), st.integers(0, 12), st.fractions(Fraction(1, 10), Fraction(9, 10)))
def test_tau_binomial_pascal(n, m, tau):
    # q-Pascal rule
    lhs = tau_binomial(n + 1, m, tau)
    rhs = tau_binomial(n, m - 1, tau) + tau**m * tau_binomial(n, m, tau)
    assert lhs == rhs


def test_log_tau_binomial_large_n():
    assert np.exp(log_tau_binomial(20, 7, 0.4)) == pytest.approx(tau_binomial(20, 7, 0.4), rel=1e-12)
    assert np.isfinite(log_tau_binomial(400, 200, 0.9))


def test_modified_binomial_routes_agree_exactly():
    tb = TauBinomial(Fraction(3, 10), Fraction(7, 10))
    for n in range(8):
        for m in range(n + 1):
            assert tb.modified(n, m) == tb.modified_from_brackets(n, m)


def test_bracket_needs_p_ne_q():
    with pytest.raises(PreconditionError):
        TauBinomial(0.5, 0.5)


@pytest.mark.parametrize("p", [0.3, 0.45])
def test_identities_at_random_points(p):
    rates = HoppingRates(p)
    rng = np.random.default_rng(1)
    for n in (2, 4, 5):
        xi = random_points(n, rng, rates)
        assert check_identity1(xi, rates) < 1e-10
        for m in range(n):
            assert check_identity2(xi, m, rates) < 1e-10
        for m in range(n + 1):
            assert check_identity3(xi, m, rates) < 1e-10
    assert check_det_identity(random_points(7, rng, rates), rates) < 1e-10


def test_identity3_m0_is_one(rates):
    xi = random_points(4, np.random.default_rng(0), rates)
    assert check_identity3(xi, 0, rates) == 0.0


def test_identity2_needs_m_below_n(rates):
    with pytest.raises(PreconditionError):
        check_identity2(np.array([0.5j, 1.3]), 2, rates)


def test_coincident_points_rejected(rates):
    with pytest.raises(DegenerateInputError):
        check_identity1(np.array([0.5 + 0.5j, 0.5 + 0.5j]), rates)
    with pytest.raises(DegenerateInputError):
        check_det_identity(np.array([1.0 + 0j, 0.4j]), rates)


def test_random_points_respect_punctures(rates):
    pts = random_points(6, np.random.default_rng(3), rates)
    assert np.all(np.abs(pts) >= 0.3 - 1e-12) and np.all(np.abs(pts) <= 1.7 + 1e-12)
    assert np.all(np.abs(pts - 1) >= 1e-2)
    assert np.all(np.abs(pts - rates.tau) >= 1e-2)
    d = np.abs(pts[:, None] - pts[None, :]) + np.eye(6)
    assert d.min() >= 1e-2


def test_suite_rows_shape(rates):
    rows = run_suite(rates, n_values=range(1, 3), det_k_values=range(1, 3), points=3)
    labels = [(r.identity, r.n, r.m) for r in rows]
    assert ("identity2", 2, 1) in labels and ("det", 2, -1) in labels
    assert all(r.max_residual < 1e-10 for r in rows)
