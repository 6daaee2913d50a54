"""Fredholm determinants: the ASEP marginal via K_rho and the Airy-kernel F2.

The one-point law of ``x_m(t)`` under step / step-Bernoulli data is

    P(x_m(t) <= x) = (1 / 2 pi i) oint det(I - lam K) / prod_{j<m} (1 - lam tau^j) dlam / lam

with ``K(xi, xi') = q xi^x e^{t eps(xi)} / (p + q xi xi' - xi) * B(xi)`` acting
on the circle ``|xi| = R`` and ``B`` the step-Bernoulli factor.  ``K`` is
discretised by the trapezoid rule (Nystrom) and the lam integral is again a
trapezoid sum, both geometrically convergent for analytic integrands.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import airy

from .errors import ConvergenceError, PoleError, PreconditionError
from .identities import tau_binomial
from .rates import HoppingRates

POLE_MARGIN = 1e-3
XI_NODES_START = 64
XI_NODES_CAP = 512
LAMBDA_NODES_START = 64
LAMBDA_NODES_CAP = 2048
_LAMBDA_CHUNK = 64


def _check_rates(rates: HoppingRates) -> None:
    if not rates.q > rates.p:
        raise PreconditionError("the marginal formulas need q > p")


def _check_rho(rho: float) -> None:
    if not 0.0 < rho <= 1.0:
        raise PreconditionError("rho must lie in (0, 1]")


def _weight(xi, x: int, t: float, rates: HoppingRates):
    """``xi^x exp(t eps(xi))`` in one exponential, so neither factor overflows alone."""
    eps = rates.p / xi + rates.q * xi - 1.0
    return np.exp(x * np.log(xi) + t * eps)


def _bernoulli_factor(xi, rates: HoppingRates, rho: float):
    return rho * (xi - rates.tau) / (xi - 1.0 + rho * (1.0 - rates.tau))


def k_rho(xi, xip, x: int, t: float, rates: HoppingRates, rho: float = 1.0):
    """The kernel ``K_rho(xi, xi')``; broadcasts over array arguments.

    At ``rho == 1`` the step-Bernoulli factor is skipped rather than
    evaluated, so the step kernel carries no extra rounding.
    """
    _check_rho(rho)
    xi = np.asarray(xi, dtype=complex)
    xip = np.asarray(xip, dtype=complex)
    den = rates.p + rates.q * xi * xip - xi
    if np.any(np.abs(den) < 1e-14 * np.maximum(1.0, np.abs(xi * xip))):
        raise PoleError("p + q xi xi' - xi vanishes")
    out = rates.q * _weight(xi, x, t, rates) / den
    if rho != 1.0:
        out = out * _bernoulli_factor(xi, rates, rho)
    return out


def min_radius(rates: HoppingRates) -> float:
    """Smallest ``R`` with every zero of ``p + q xi xi' - xi`` (in ``xi'``) inside ``|xi'| < R``.

    For ``|xi| = R`` the zero sits at ``|xi'| <= (R + p) / (q R)``, which is
    below ``R`` once ``q R^2 - R - p > 0``.
    """
    return (1.0 + math.sqrt(1.0 + 4.0 * rates.p * rates.q)) / (2.0 * rates.q)


def default_xi_radius(rates: HoppingRates) -> float:
    # a radius much larger than needed lets |xi|^x e^{t eps} vary over many
    # orders of magnitude around the circle and the determinant cancels badly
    return 1.2 * min_radius(rates)


@dataclass(frozen=True)
class CircleKernelDiscretization:
    """Nystrom matrix ``M[j, k] = K(xi_j, xi_k) w_k`` on ``|xi| = radius``.

    ``w_k = xi_k / n`` is the trapezoid weight of ``dxi / (2 pi i)``.
    """

    radius: float
    nodes: int
    points: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    pole_margin: float

    @classmethod
    def build(
        cls,
        x: int,
        t: float,
        rates: HoppingRates,
        rho: float = 1.0,
        nodes: int = XI_NODES_START,
        radius: Optional[float] = None,
    ) -> "CircleKernelDiscretization":
        _check_rates(rates)
        _check_rho(rho)
        R = default_xi_radius(rates) if radius is None else float(radius)
        if R <= 1.0:
            raise PreconditionError("xi radius must exceed 1")
        xi = R * np.exp(2j * np.pi * np.arange(nodes) / nodes)
        w = xi / nodes
        den = rates.p + rates.q * xi[:, None] * xi[None, :] - xi[:, None]
        margin = float(np.min(np.abs(den)))
        if rho != 1.0:
            margin = min(margin, float(np.min(np.abs(xi - 1.0 + rho * (1.0 - rates.tau)))))
        if margin < POLE_MARGIN:
            raise PoleError(f"contour passes within {margin:.2e} of a pole")
        M = k_rho(xi[:, None], xi[None, :], x, t, rates, rho) * w[None, :]
        return cls(R, nodes, xi, w, M, margin)


def det_i_minus_lambda_k(lam, disc: CircleKernelDiscretization):
    """``det(I - lam M)`` for scalar or array ``lam``."""
    return np.exp(_log_det(np.atleast_1d(np.asarray(lam, dtype=complex)), disc.matrix)).reshape(
        np.shape(lam)
    )


def _log_det(lam: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Complex log of ``det(I - lam M)`` over a batch of ``lam``."""
    n = M.shape[0]
    eye = np.eye(n)
    out = np.empty(lam.shape, dtype=complex)
    for s in range(0, lam.size, _LAMBDA_CHUNK):
        chunk = lam[s : s + _LAMBDA_CHUNK]
        sign, logabs = np.linalg.slogdet(eye[None] - chunk[:, None, None] * M[None])
        out[s : s + _LAMBDA_CHUNK] = logabs + np.log(sign)
    return out


@dataclass(frozen=True)
class MarginalResult:
    value: float
    raw: float
    imag_residue: float
    n_xi: int
    n_lambda: int
    xi_radius: float
    lambda_radius: float


def lambda_radius(m: int, rates: HoppingRates) -> float:
    return 1.5 * rates.tau ** (-(m - 1))


def _lambda_integral(M: np.ndarray, m: int, rates: HoppingRates, tol: float):
    """Trapezoid rule on ``|lam| = lambda_radius``; node count doubles until converged.

    Doubling reuses the previous nodes (they are every other node of the
    finer rule), so each pass only evaluates the new half.
    """
    L = lambda_radius(m, rates)
    powers = rates.tau ** np.arange(m)

    def integrand(lam):
        log_prod = np.sum(np.log(1.0 - lam[:, None] * powers[None, :]), axis=1)
        return np.exp(_log_det(lam, M) - log_prod)

    n = LAMBDA_NODES_START
    vals = integrand(L * np.exp(2j * np.pi * np.arange(n) / n))
    prev = vals.mean()
    while n < LAMBDA_NODES_CAP:
        new = integrand(L * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n))
        vals = np.column_stack([vals, new]).ravel()
        n *= 2
        cur = vals.mean()
        if abs(cur - prev) < tol:
            return cur, n
        prev = cur
    raise ConvergenceError(f"lambda integral not converged with {n} nodes")


def marginal_cdf(
    m: int,
    x: int,
    t: float,
    rates: HoppingRates,
    rho: float = 1.0,
    tol: float = 1e-10,
    imag_tol: float = 1e-8,
    xi_radius: Optional[float] = None,
    full_output: bool = False,
):
    """``P(x_m(t) <= x)`` for step (``rho = 1``) or step-Bernoulli data.

    The xi node count doubles from 64 until the value moves by less than
    ``tol``.  The returned value is clamped to ``[0, 1]``; the unclamped real
    part and the discarded imaginary part are in the ``full_output`` record.

    The Nystrom matrix has entries of size ``R^x e^(t (qR + p/R))`` while its
    eigenvalues stay O(1), so rounding in the determinants grows with ``x``
    and ``t``.  Far in the right tail (around ``x > 10`` at ``t = 1``) the
    doubling cannot reach ``tol`` and :class:`ConvergenceError` is raised.
    """
    _check_rates(rates)
    _check_rho(rho)
    if m < 1:
        raise PreconditionError("m must be >= 1")
    if t < 0:
        raise PreconditionError("t must be >= 0")
    x = int(x)
    n = XI_NODES_START
    prev = None
    while True:
        disc = CircleKernelDiscretization.build(x, t, rates, rho, n, xi_radius)
        val, n_lam = _lambda_integral(disc.matrix, m, rates, tol)
        if prev is not None and abs(val - prev) < tol:
            break
        if n >= XI_NODES_CAP:
            raise ConvergenceError(f"xi discretisation not converged with {n} nodes")
        prev = val
        n *= 2
    if abs(val.imag) > imag_tol:
        raise ConvergenceError(f"imaginary residue {abs(val.imag):.2e} exceeds {imag_tol:g}")
    raw = float(val.real)
    res = MarginalResult(
        min(max(raw, 0.0), 1.0), raw, abs(val.imag), n, n_lam, disc.radius, lambda_radius(m, rates)
    )
    return res if full_output else res.value


# --------------------------------------------------------------------------
# the k-fold series


def series_coefficient(m: int, k: int, rates: HoppingRates) -> float:
    """``c_{m,k} = (-1)^m q^{k(k-1)/2} tau^{m(m-1)/2} tau^{-km} [k-1 choose m-1]_tau``.

    Zero for ``m > k``.
    """
    if m > k:
        return 0.0
    tau = rates.tau
    return (
        (-1) ** m
        * rates.q ** (k * (k - 1) / 2)
        * tau ** (m * (m - 1) / 2)
        * tau ** (-k * m)
        * tau_binomial(k - 1, m - 1, tau)
    )


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: tuple
    last_term: float
    imag_residue: float
    nodes: int


def _kfold_integral(k: int, x: int, t: float, rates: HoppingRates, rho: float, nodes: int, R: float):
    """Trapezoid value of the k-fold contour integral of the series summand."""
    p, q, tau = rates.p, rates.q, rates.tau
    z = R * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    one = _weight(z, x, t, rates) / (1.0 - z) * (z / nodes) * rho / (z - 1.0 + rho * (1.0 - tau))
    # ordered pairs enter through sym[i, j] = g(z_i, z_j) g(z_j, z_i) with
    # g(a, b) = (b - a) / f(a, b), which vanishes when two variables share a node
    g = (z[None, :] - z[:, None]) / (p + q * z[:, None] * z[None, :] - z[:, None])
    sym = g * g.T
    if k == 1:
        return one.sum()

    def along(axes, arr):
        idx = [None] * (k - 1)
        for a in axes:
            idx[a] = slice(None)
        return arr[tuple(idx)]

    rest = np.ones((nodes,) * (k - 1), dtype=complex)
    for a, b in itertools.combinations(range(k - 1), 2):
        rest = rest * along((a, b), sym)
    total = 0.0 + 0.0j
    # fix the first variable and broadcast over the other k - 1
    for i0 in range(nodes):
        acc = rest * one[i0]
        for a in range(k - 1):
            acc = acc * along((a,), one * sym[i0])
        total += acc.sum()
    return total


def marginal_cdf_series(
    m: int,
    x: int,
    t: float,
    rates: HoppingRates,
    rho: float = 1.0,
    k_max: int = 3,
    nodes: int = 64,
    xi_radius: Optional[float] = None,
    full_output: bool = False,
):
    """Truncated k-sum for ``P(x_m(t) <= x)``, each term a k-fold trapezoid sum.

    The magnitude of the last included term is reported as a heuristic
    truncation error.

    Raises
    ------
    ConvergenceError
        The last term is not smaller than the one before it.
    """
    _check_rates(rates)
    _check_rho(rho)
    if not 1 <= k_max <= 4:
        raise PreconditionError("k_max must be in 1..4")
    if m < 1:
        raise PreconditionError("m must be >= 1")
    R = default_xi_radius(rates) if xi_radius is None else float(xi_radius)
    q, tau = rates.q, rates.tau
    terms = []
    for k in range(1, k_max + 1):
        c = series_coefficient(m, k, rates)
        if c == 0.0:
            terms.append(0.0 + 0.0j)
            continue
        pref = q ** (k * (k - 1) / 2) * tau ** (k * (k + 1) / 2) / math.factorial(k) * c
        terms.append(pref * _kfold_integral(k, int(x), t, rates, rho, nodes, R))
    val = sum(terms)
    last = abs(terms[-1])
    if k_max > 1 and terms[-2] != 0 and last >= abs(terms[-2]):
        raise ConvergenceError(f"series terms not decreasing at k_max = {k_max}")
    res = SeriesResult(float(val.real), tuple(terms), last, abs(val.imag), nodes)
    return res if full_output else res.value


# --------------------------------------------------------------------------
# Airy kernel


def airy_kernel_matrix(s: float, n_quad: int = 64, scale: float = 10.0):
    """Symmetrised Nystrom matrix of the Airy kernel on ``(s, inf)``.

    Gauss-Legendre nodes ``u`` on (-1, 1) are mapped by
    ``x = s + scale * tan(pi (u + 1) / 4)``.
    """
    if n_quad < 16:
        raise PreconditionError("n_quad must be >= 16")
    u, w = leggauss(n_quad)
    theta = np.pi * (u + 1) / 4
    xs = s + scale * np.tan(theta)
    ws = w * scale * np.pi / 4 / np.cos(theta) ** 2
    ai, aip, _, _ = airy(xs)
    dx = xs[:, None] - xs[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = (ai[:, None] * aip[None, :] - aip[:, None] * ai[None, :]) / dx
    K[np.diag_indices(n_quad)] = aip**2 - xs * ai**2
    sw = np.sqrt(ws)
    return sw[:, None] * K * sw[None, :]


def airy_fredholm_f2(s, n_quad: int = 64) -> float:
    """``F2(s) = det(I - K_Ai)`` on ``L^2(s, inf)``; vectorised over ``s``."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.array([np.linalg.det(np.eye(n_quad) - airy_kernel_matrix(v, n_quad)) for v in s_arr])
    return out if np.ndim(s) else float(out[0])
