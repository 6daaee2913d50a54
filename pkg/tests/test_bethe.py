import math

import numpy as np
import pytest

from asep_lab.bethe import (
    ContourQuadrature,
    amplitude,
    critical_radius,
    default_radius,
    epsilon,
    generator_oracle,
    inversions,
    oracle_window,
    permutation_terms,
    s_factor,
    transition_probability,
    transition_table,
    u_value,
)
from asep_lab.errors import ConvergenceError, PoleError, PreconditionError
from asep_lab.rates import HoppingRates


def bessel_i(k, z, terms=80):
    """Power series for the modified Bessel function I_k."""
    k = abs(k)
    return sum((z / 2) ** (2 * j + k) / (math.factorial(j) * math.factorial(j + k)) for j in range(terms))


# ---------------------------------------------------------------- S and eps


def test_s_factor_on_diagonal(rates):
    xi = 0.3 + 0.2j
    assert s_factor(xi, xi, rates) == pytest.approx(-1.0)


def test_s_factor_totally_right():
    r = HoppingRates(1.0)
    a, b = 0.2 + 0.1j, -0.3 + 0.25j
    assert s_factor(a, b, r) == pytest.approx(-(1 - a) / (1 - b), rel=1e-14)


def test_s_factor_reevaluation(rates):
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    p, q = rates.p, rates.q
    num = p + q * a * b - a
    den = p + q * a * b - b
    assert abs(s_factor(a, b, rates) - (-num / den)) < 1e-14 * abs(num / den)


def test_s_factor_pole(rates):
    b = 0.5
    # p + q a b - b = 0  at  a = (b - p) / (q b)
    a = (b - rates.p) / (rates.q * b)
    with pytest.raises(PoleError):
        s_factor(a, b, rates)


def test_epsilon_values(rates):
    assert epsilon(1.0, rates) == pytest.approx(0.0, abs=1e-15)
    assert epsilon(rates.tau, rates) == pytest.approx(0.0, abs=1e-15)
    assert epsilon(2.0, rates) == pytest.approx(0.55)
    with pytest.raises(PreconditionError):
        epsilon(0.0, rates)


def test_amplitude_identity_and_inversions(rates):
    xi = [0.2 + 0.1j, -0.15 + 0.2j, 0.1 - 0.25j]
    assert amplitude((0, 1, 2), xi, rates) == 1.0
    assert set(inversions((2, 0, 1))) == {(2, 0), (2, 1)}
    assert amplitude((1, 0, 2), xi, rates) == pytest.approx(s_factor(xi[1], xi[0], rates))


# ---------------------------------------------------------------- contour


def test_quadrature_invariants(rates):
    with pytest.raises(PreconditionError):
        ContourQuadrature(0.1, 15)
    with pytest.raises(PoleError):
        ContourQuadrature(1.5 * critical_radius(rates), 64).check_small(rates)
    assert default_radius(HoppingRates(0.45)) < critical_radius(HoppingRates(0.45))


@pytest.mark.parametrize("Y", [(0,), (0, 1), (-1, 0, 2)])
def test_initial_condition(rates, Y):
    assert transition_probability(Y, Y, 0.0, rates) == pytest.approx(1.0, abs=1e-12)
    X = tuple(y + 1 for y in Y)
    assert transition_probability(Y, X, 0.0, rates) == pytest.approx(0.0, abs=1e-12)


def test_non_identity_terms_vanish_at_t0(rates):
    for X in [(0, 1, 3), (-2, 1, 2), (0, 2, 4)]:
        res = transition_probability((0, 1, 3), X, 0.0, rates, full_output=True)
        assert abs(res.other_terms) < 1e-10


@pytest.mark.parametrize("k", [-4, -1, 0, 2, 5])
def test_single_particle_bessel(rates, k):
    t = 1.3
    exact = math.exp(-t) * (rates.p / rates.q) ** (k / 2) * bessel_i(k, 2 * math.sqrt(rates.p * rates.q) * t)
    assert transition_probability((0,), (k,), t, rates) == pytest.approx(exact, rel=1e-10, abs=1e-15)


def test_two_particles_against_oracle(rates):
    oracle = generator_oracle((0, 1), 1.0, rates, (-20, 21))
    table = transition_table((0, 1), 1.0, rates, (-8, 9))
    for X, val in table.items():
        assert abs(val - oracle[X]) < 1e-8
    # [-8, 9] leaves about 5e-8 of mass outside; the table must see exactly that
    inside = sum(oracle[X] for X in table)
    assert abs(sum(table.values()) - inside) < 1e-12
    wide = transition_table((0, 1), 1.0, rates, oracle_window((0, 1), 1.0))
    assert abs(sum(wide.values()) - 1.0) < 1e-8
    for X in [(-3, 2), (0, 1), (1, 4), (-6, -5)]:
        assert abs(transition_probability((0, 1), X, 1.0, rates) - oracle[X]) < 1e-8


def test_three_particles_against_oracle():
    r = HoppingRates(0.4)
    Y = (0, 1, 2)
    win = oracle_window(Y, 0.5)
    oracle = generator_oracle(Y, 0.5, r, win)
    table = transition_table(Y, 0.5, r, win)
    heavy = [X for X, v in oracle.items() if v > 1e-10]
    assert max(abs(table[X] - oracle[X]) for X in heavy) < 1e-8
    for X in heavy[:: max(1, len(heavy) // 6)]:
        assert abs(transition_probability(Y, X, 0.5, r) - oracle[X]) < 1e-8


def test_master_equation(rates):
    Y, X, t, h = (0, 2), (0, 3), 0.7, 1e-4
    P = lambda X_, s: transition_probability(Y, X_, s, rates)
    lhs = (P(X, t + h) - P(X, t - h)) / (2 * h)
    rhs = 0.0
    for i in range(2):
        minus = list(X)
        minus[i] -= 1
        plus = list(X)
        plus[i] += 1
        rhs += rates.p * u_value(Y, minus, t, rates).real + rates.q * u_value(Y, plus, t, rates).real
        rhs -= P(X, t)
    assert lhs == pytest.approx(rhs, abs=1e-8)


@pytest.mark.parametrize("x", [-2, 0, 1, 3])
def test_boundary_condition(rates, x):
    Y, t = (0, 2), 0.6
    lhs = u_value(Y, (x, x + 1), t, rates)
    rhs = rates.p * u_value(Y, (x, x), t, rates) + rates.q * u_value(Y, (x + 1, x + 1), t, rates)
    assert abs(lhs - rhs) < 1e-10


def test_node_doubling_converged(rates):
    res = transition_probability((0, 2), (1, 2), 0.8, rates, full_output=True)
    assert res.change < 1e-12
    finer = transition_probability((0, 2), (1, 2), 0.8, rates, quad=ContourQuadrature(default_radius(rates), 2 * res.nodes))
    assert abs(finer - res.probability) < 1e-12


def test_preconditions(rates):
    with pytest.raises(PreconditionError):
        transition_probability((0,), (1,), 1.0, HoppingRates(0.0))
    with pytest.raises(PreconditionError):
        transition_probability((1, 0), (0, 1), 1.0, rates)
    with pytest.raises(PreconditionError):
        transition_probability(tuple(range(7)), tuple(range(7)), 1.0, rates)
    with pytest.raises(PreconditionError):
        transition_probability((0,), (1,), -1.0, rates)


def test_imaginary_residue_flagged(rates):
    with pytest.raises(ConvergenceError):
        transition_probability((0, 1), (-3, 4), 2.0, rates, quad=ContourQuadrature(default_radius(rates), 16), imag_tol=1e-16)


def test_oracle_basics(rates):
    dist = generator_oracle((0, 1), 0.0, rates, (-3, 4))
    assert dist[(0, 1)] == 1.0 and sum(dist.values()) == 1.0
    dist, leak = generator_oracle((0, 1), 0.8, rates, oracle_window((0, 1), 0.8), full_output=True)
    assert abs(sum(dist.values()) + leak - 1.0) < 1e-12
    with pytest.raises(PreconditionError):
        generator_oracle((0, 1, 2), 1.0, rates, (-40, 40), max_states=1000)
