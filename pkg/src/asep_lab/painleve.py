"""Hastings-McLeod solution of Painleve II and the Tracy-Widom laws F1, F2.

The ODE ``q'' = s q + 2 q^3`` is integrated leftward from ``s_max`` with
Airy initial data.  Three running integrals ride along with ``(q, q')``::

    u(s) = int_s^inf q(x)^2 dx
    v(s) = int_s^inf (x - s) q(x)^2 dx
    w(s) = int_s^inf q(x) dx

so that ``F2 = exp(-v)`` and ``F1 = exp(-w/2) * sqrt(F2)`` come out of the
integrator directly, and so do the densities ``F2' = u F2`` and
``F1' = (q + u) F1 / 2``.  Beyond ``s_max`` the solution is the Airy
function to within ``Ai^3`` and the three integrals have closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import airy

from .errors import ConvergenceError, PreconditionError

S_MIN = -10.0
S_MAX = 8.0


def airy_tail(s):
    """``(Ai, Ai', u, v, w)`` for the Airy function on ``[s, inf)``.

    Uses ``int_s^inf Ai^2 = Ai'^2 - s Ai^2`` and
    ``int_s^inf (x - s) Ai^2 = (2 s^2 Ai^2 - 2 s Ai'^2 - Ai Ai') / 3``.
    """
    s = np.asarray(s, dtype=float)
    ai, aip, _, _ = airy(s)
    u = aip**2 - s * ai**2
    v = (2 * s**2 * ai**2 - 2 * s * aip**2 - ai * aip) / 3.0
    w = np.vectorize(lambda x: quad(lambda y: airy(y)[0], x, np.inf, epsabs=0, epsrel=1e-13)[0])(s)
    return ai, aip, u, v, w


def _rhs(s, y):
    q, dq, u, v, w = y
    return [dq, s * q + 2.0 * q**3, -q * q, -u, -q]


@dataclass(frozen=True)
class HMSolution:
    """Hastings-McLeod solution sampled on a descending grid.

    ``state(s)`` evaluates ``(q, q', u, v, w)`` anywhere: the integrator's
    dense output on ``[s_min, s_max]`` and the Airy closed forms above it.
    """

    grid: np.ndarray
    q_values: np.ndarray
    q_prime: np.ndarray
    s_min: float
    s_max: float
    _dense: object = field(repr=False, compare=False)

    def state(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty((5, s.size))
        inside = s <= self.s_max
        if np.any(s[inside] < self.s_min):
            raise PreconditionError(f"s below s_min = {self.s_min}")
        if inside.any():
            out[:, inside] = self._dense(s[inside])
        if (~inside).any():
            out[:, ~inside] = np.array(airy_tail(s[~inside]))
        return out

    def q(self, s):
        return self.state(s)[0]


def solve_hastings_mcleod(
    s_min: float = S_MIN,
    s_max: float = S_MAX,
    rtol: float = 1e-13,
    grid_step: float = 0.01,
) -> HMSolution:
    """Integrate Painleve II leftward from ``s_max`` with ``q ~ Ai``.

    Uses the 8th-order Dormand-Prince scheme with dense output.  The
    deviation from the Hastings-McLeod solution of a nearby trajectory grows
    like ``exp((2 sqrt 2 / 3) |s|^(3/2))`` to the left, so below about -12
    double precision cannot hold the separatrix.

    Raises
    ------
    PreconditionError
        ``s_max < 6`` or ``s_min < -12``.
    ConvergenceError
        The step size collapses; the message carries the last good ``s``.
    """
    if s_max < 6:
        raise PreconditionError("s_max must be >= 6 for the Airy initial data")
    if s_min < -12:
        raise PreconditionError("s_min below -12 is beyond double precision")
    if s_min >= s_max:
        raise PreconditionError("need s_min < s_max")
    y0 = np.array(airy_tail(s_max), dtype=float).ravel()
    res = solve_ivp(
        _rhs, (s_max, s_min), y0, method="DOP853", rtol=rtol, atol=1e-30, dense_output=True
    )
    if res.status != 0:
        raise ConvergenceError(f"integration stopped at s = {res.t[-1]:.6g}: {res.message}")
    n = int(round((s_max - s_min) / grid_step))
    grid = np.linspace(s_max, s_min, n + 1)
    vals = res.sol(grid)
    return HMSolution(grid, vals[0], vals[1], s_min, s_max, res.sol)


_default: Optional[HMSolution] = None


def default_solution() -> HMSolution:
    """Module-wide cached solution on ``[S_MIN, S_MAX]``."""
    global _default
    if _default is None:
        _default = solve_hastings_mcleod()
    return _default


def ode_residual(sol: HMSolution, s, h: float = 1e-2) -> np.ndarray:
    """``|q''(s) - s q - 2 q^3|`` with ``q''`` from a five-point stencil on ``q'``."""
    s = np.asarray(s, dtype=float)
    dq = lambda x: sol.state(x)[1]
    d2 = (dq(s - 2 * h) - 8 * dq(s - h) + 8 * dq(s + h) - dq(s + 2 * h)) / (12 * h)
    q = sol.q(s)
    return np.abs(d2 - s * q - 2 * q**3)


def _extrapolate_left(sol: HMSolution, s: np.ndarray, beta: int) -> np.ndarray:
    """Linear-in-log continuation of ``F_beta`` below ``s_min``."""
    edge = np.array([sol.s_min])
    F0 = f2_cdf(edge, sol) if beta == 2 else f1_cdf(edge, sol)
    d0 = f2_density(edge, sol) if beta == 2 else f1_density(edge, sol)
    return F0 * np.exp(d0 / F0 * (s - sol.s_min))


def f2_cdf(s, sol: Optional[HMSolution] = None):
    """GUE Tracy-Widom CDF ``exp(-int_s^inf (x - s) q(x)^2 dx)``."""
    sol = sol or default_solution()
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s_arr)
    low = s_arr < sol.s_min
    out[~low] = np.exp(-sol.state(s_arr[~low])[3])
    if low.any():
        out[low] = _extrapolate_left(sol, s_arr[low], 2)
    return out if np.ndim(s) else float(out[0])


def f1_cdf(s, sol: Optional[HMSolution] = None):
    """GOE Tracy-Widom CDF ``exp(-int_s^inf q / 2) * sqrt(F2(s))``."""
    sol = sol or default_solution()
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s_arr)
    low = s_arr < sol.s_min
    st = sol.state(s_arr[~low])
    out[~low] = np.exp(-0.5 * st[4] - 0.5 * st[3])
    if low.any():
        out[low] = _extrapolate_left(sol, s_arr[low], 1)
    return out if np.ndim(s) else float(out[0])


def f2_density(s, sol: Optional[HMSolution] = None):
    sol = sol or default_solution()
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    st = sol.state(np.maximum(s_arr, sol.s_min))
    out = st[2] * np.exp(-st[3])
    return out if np.ndim(s) else float(out[0])


def f1_density(s, sol: Optional[HMSolution] = None):
    sol = sol or default_solution()
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    st = sol.state(np.maximum(s_arr, sol.s_min))
    out = 0.5 * (st[0] + st[2]) * np.exp(-0.5 * st[4] - 0.5 * st[3])
    return out if np.ndim(s) else float(out[0])


# --------------------------------------------------------------------------
# tabulated distributions


@dataclass
class TWDistribution:
    """Tabulated CDF on an ascending grid with Hermite or spline interpolation.

    Outside the grid the CDF continues linearly in ``log F`` (left) and in
    ``log(1 - F)`` (right).
    """

    beta: int
    s_grid: np.ndarray
    cdf_values: np.ndarray
    density_values: Optional[np.ndarray] = None
    order: int = 3

    def __post_init__(self):
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.cdf_values = np.asarray(self.cdf_values, dtype=float)
        if np.any(np.diff(self.s_grid) <= 0):
            raise PreconditionError("s_grid must be strictly ascending")
        if self.density_values is not None:
            self._interp = CubicHermiteSpline(self.s_grid, self.cdf_values, self.density_values)
        else:
            self._interp = CubicSpline(self.s_grid, self.cdf_values)

    def __call__(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s_arr)
        a, b = self.s_grid[0], self.s_grid[-1]
        mid = (s_arr >= a) & (s_arr <= b)
        out[mid] = self._interp(s_arr[mid])
        lo, hi = s_arr < a, s_arr > b
        if lo.any():
            F0, d0 = self.cdf_values[0], self._interp(a, 1)
            out[lo] = F0 * np.exp(d0 / F0 * (s_arr[lo] - a)) if F0 > 0 else 0.0
        if hi.any():
            G1, d1 = 1.0 - self.cdf_values[-1], self._interp(b, 1)
            out[hi] = 1.0 - (G1 * np.exp(-d1 / G1 * (s_arr[hi] - b)) if G1 > 0 else 0.0)
        out = np.clip(out, 0.0, 1.0)
        return out if np.ndim(s) else float(out[0])

    def density(self, s):
        return self._interp(np.asarray(s, dtype=float), 1)


def tw_distribution(
    beta: int,
    sol: Optional[HMSolution] = None,
    s_lo: float = S_MIN,
    s_hi: float = 16.0,
    step: float = 0.005,
) -> TWDistribution:
    """Tabulate ``F_beta`` (beta = 1 or 2) with exact densities for Hermite interpolation."""
    if beta not in (1, 2):
        raise PreconditionError("beta must be 1 or 2")
    sol = sol or default_solution()
    grid = np.linspace(s_lo, s_hi, int(round((s_hi - s_lo) / step)) + 1)
    if beta == 2:
        return TWDistribution(2, grid, f2_cdf(grid, sol), f2_density(grid, sol))
    return TWDistribution(1, grid, f1_cdf(grid, sol), f1_density(grid, sol))


def moments(dist: TWDistribution, tail_tol: float = 1e-9) -> Tuple[float, float, float, float]:
    """Mean, variance, skewness and excess kurtosis of a tabulated CDF.

    Each moment is ``E g(X) = g(b) - int_a^b g'(s) F(s) ds`` on the grid
    ``[a, b]`` (integration by parts), integrated with Simpson's rule.
    """
    s, F = dist.s_grid, dist.cdf_values
    if F[0] > tail_tol or 1.0 - F[-1] > tail_tol:
        raise PreconditionError(
            f"grid misses mass: F(a) = {F[0]:.3g}, 1 - F(b) = {1 - F[-1]:.3g}"
        )
    a, b = s[0], s[-1]

    def expect(g, dg):
        return g(b) * F[-1] - g(a) * F[0] - simpson(dg(s) * F, x=s)

    mean = expect(lambda x: x, lambda x: np.ones_like(x))
    c = [expect(lambda x, k=k: (x - mean) ** k, lambda x, k=k: k * (x - mean) ** (k - 1)) for k in (2, 3, 4)]
    var = c[0]
    return mean, var, c[1] / var**1.5, c[2] / var**2 - 3.0
