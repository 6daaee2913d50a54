import numpy as np
import pytest

from asep_lab.errors import ConvergenceError, PoleError, PreconditionError
from asep_lab.fredholm import (
    CircleKernelDiscretization,
    airy_fredholm_f2,
    default_xi_radius,
    det_i_minus_lambda_k,
    k_rho,
    marginal_cdf,
    marginal_cdf_series,
    min_radius,
    series_coefficient,
)
from asep_lab.identities import tau_binomial
from asep_lab.painleve import TWDistribution, moments
from asep_lab.rates import HoppingRates, Step, StepBernoulli
from asep_lab.simulation import sample_observables


def test_kernel_step_reduction(rates):
    xi, xp = 1.7 + 0.9j, -1.2 + 1.5j
    eps = rates.p / xi + rates.q * xi - 1
    plain = rates.q * xi**3 * np.exp(0.8 * eps) / (rates.p + rates.q * xi * xp - xi)
    assert k_rho(xi, xp, 3, 0.8, rates, 1.0) == pytest.approx(plain, rel=1e-14)


def test_kernel_t0_x0(rates):
    xi, xp, rho = 2.0 + 0.5j, 1.1 - 1.9j, 0.6
    bern = rho * (xi - rates.tau) / (xi - 1 + rho * (1 - rates.tau))
    expect = rates.q / (rates.p + rates.q * xi * xp - xi) * bern
    assert k_rho(xi, xp, 0, 0.0, rates, rho) == pytest.approx(expect, rel=1e-14)


def test_kernel_reevaluation(rates):
    rng = np.random.default_rng(7)
    xi, xp = 2 * np.exp(2j * np.pi * rng.random(2))
    p, q, tau, rho, t = rates.p, rates.q, rates.tau, 0.6, 2.0
    # expanded form: q xi^3 e^{t(p/xi + q xi - 1)} rho (xi - tau) / ((p + q xi xp - xi)(xi - 1 + rho(1 - tau)))
    num = q * xi * xi * xi * np.exp(t * p / xi) * np.exp(t * q * xi) * np.exp(-t) * rho * (xi - tau)
    den = (p + q * xi * xp - xi) * (xi - 1 + rho * (1 - tau))
    assert abs(k_rho(xi, xp, 3, t, rates, rho) - num / den) < 1e-14 * abs(num / den)


def test_kernel_pole(rates):
    xp = 2.0
    xi = rates.p / (1 - rates.q * xp)
    with pytest.raises(PoleError):
        k_rho(xi, xp, 0, 1.0, rates)


def test_discretization_margin(rates):
    d = CircleKernelDiscretization.build(0, 1.0, rates)
    assert d.radius == pytest.approx(default_xi_radius(rates)) and d.radius > min_radius(rates)
    assert d.pole_margin >= 1e-3
    with pytest.raises(PoleError):
        CircleKernelDiscretization.build(0, 1.0, rates, radius=min_radius(rates))
    with pytest.raises(PreconditionError):
        CircleKernelDiscretization.build(0, 1.0, HoppingRates(0.6))


def test_det_at_zero_and_trace(rates):
    d = CircleKernelDiscretization.build(1, 1.5, rates, 0.6, nodes=128)
    assert det_i_minus_lambda_k(0.0, d) == pytest.approx(1.0, abs=1e-15)
    # derivative at 0 from a Cauchy sum on a small lam circle
    r, n = 1e-2, 16
    w = np.exp(2j * np.pi * np.arange(n) / n)
    deriv = np.mean(det_i_minus_lambda_k(r * w, d) * w**-1) / r
    assert deriv == pytest.approx(-np.trace(d.matrix), abs=1e-10)
    # first Fredholm coefficient: contour integral of the diagonal on a finer rule
    fine = CircleKernelDiscretization.build(1, 1.5, rates, 0.6, nodes=512)
    trace = np.sum(k_rho(fine.points, fine.points, 1, 1.5, rates, 0.6) * fine.weights)
    assert deriv == pytest.approx(-trace, abs=1e-10)


def test_second_coefficient(rates):
    d = CircleKernelDiscretization.build(0, 1.0, rates, 1.0, nodes=96)
    # lam^2 coefficient by a finite-difference Cauchy sum on a small circle
    r, n = 1e-2, 16
    w = np.exp(2j * np.pi * np.arange(n) / n)
    c2 = np.mean(det_i_minus_lambda_k(r * w, d) * w**-2) / r**2
    # brute force: (1/2) double integral of the 2x2 kernel determinant
    z, wt = d.points, d.weights
    K = k_rho(z[:, None], z[None, :], 0, 1.0, rates)
    dd = np.diag(K)
    brute = 0.5 * np.sum((dd[:, None] * dd[None, :] - K * K.T) * wt[:, None] * wt[None, :])
    assert c2 == pytest.approx(brute, abs=1e-8)


def test_saturation(rates):
    m, t = 1, 0.25
    assert marginal_cdf(m, m + int(20 * t), t, rates) == pytest.approx(1.0, abs=1e-6)


def test_far_tail_is_refused(rates):
    # |M| grows like R^x; deep in the right tail the lam sums stop settling
    with pytest.raises(ConvergenceError):
        marginal_cdf(2, 22, 1.0, rates)


def test_monotone_in_x(rates):
    vals = [marginal_cdf(2, x, 2.0, rates, 0.6, full_output=True) for x in range(-10, 11)]
    assert all(b.value >= a.value for a, b in zip(vals, vals[1:]))
    assert all(-1e-7 <= v.raw <= 1 + 1e-7 for v in vals)


def test_t0_is_initial_law(rates):
    # step: x_m(0) = m exactly
    assert marginal_cdf(2, 1, 0.0, rates) == pytest.approx(0.0, abs=1e-10)
    assert marginal_cdf(2, 2, 0.0, rates) == pytest.approx(1.0, abs=1e-10)
    # step-Bernoulli: x_1(0) is geometric with parameter rho
    assert marginal_cdf(1, 3, 0.0, rates, 0.6) == pytest.approx(1 - 0.4**3, abs=1e-10)


def test_rho_continuity(rates):
    a = marginal_cdf(1, -1, 0.7, rates, 1.0)
    b = marginal_cdf(1, -1, 0.7, rates, 1 - 1e-12)
    assert abs(a - b) < 1e-8


def test_series_coefficients(rates):
    assert series_coefficient(3, 2, rates) == 0.0
    tau = rates.tau
    c = series_coefficient(2, 4, rates)
    assert c == pytest.approx(rates.q**6 * tau * tau**-8 * tau_binomial(3, 1, tau))
    # the sign is (-1)^m for every k >= m
    assert all(np.sign(series_coefficient(3, k, rates)) == -1 for k in range(3, 7))


def test_series_matches_contour(rates):
    res = marginal_cdf_series(1, -1, 0.8, rates, 1.0, k_max=3, full_output=True)
    assert res.last_term < 1e-8
    assert res.value == pytest.approx(marginal_cdf(1, -1, 0.8, rates), abs=1e-6)


def test_series_zero_branch(rates):
    res = marginal_cdf_series(3, 0, 0.5, rates, 1.0, k_max=3, full_output=True)
    assert res.terms[1] == 0 and res.terms[0] == 0


def test_series_limits(rates):
    with pytest.raises(PreconditionError):
        marginal_cdf_series(1, 0, 1.0, rates, k_max=5)
    # at long times the k-sum has not started to decay by k = 3
    with pytest.raises(ConvergenceError):
        marginal_cdf_series(1, 5, 20.0, rates, k_max=3)


def test_airy_fredholm_tail_and_convergence():
    assert 0 <= 1 - airy_fredholm_f2(8.0) < 1e-6
    assert abs(airy_fredholm_f2(-4.0, 128) - airy_fredholm_f2(-4.0, 64)) < 1e-12
    with pytest.raises(PreconditionError):
        airy_fredholm_f2(0.0, 8)


def test_airy_fredholm_mean():
    grid = np.linspace(-10, 16, 2601)
    dist = TWDistribution(2, grid, airy_fredholm_f2(grid, 48))
    assert moments(dist)[0] == pytest.approx(-1.771086807411, abs=1e-6)


@pytest.mark.slow
def test_against_monte_carlo():
    rates = HoppingRates(0.05)
    obs = sample_observables(Step(), rates, 1.0, 100_000, 11, (1,))
    emp = np.mean(obs.positions[:, 0] <= 0)
    F = marginal_cdf(1, 0, 1.0, rates)
    assert abs(emp - F) <= 3 * np.sqrt(F * (1 - F) / 1e5)


@pytest.mark.slow
def test_duality_transfer(rates):
    m, x, t, rho, n = 1, -1, 2.0, 0.6, 50_000
    obs = sample_observables(StepBernoulli(rho), rates, t, n, 5, (m + 1,), (x,))
    emp = np.mean(obs.currents[:, 0] <= m)
    P = 1 - marginal_cdf(m + 1, x, t, rates, rho)
    assert abs(emp - P) <= 3 * np.sqrt(P * (1 - P) / n)
