"""Numerical checks of the permutation/subset identities behind the ASEP formulas.

Each ``check_*`` function evaluates both sides of an identity at a point
``xi`` (a complex vector) and returns the relative residual
``|lhs - rhs| / max(1, |rhs|)``.  Points on a singular set raise
:class:`DegenerateInputError` instead of returning garbage.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import DegenerateInputError, PreconditionError
from .rates import HoppingRates

_DEGENERATE_TOL = 1e-10

# Permutation and subset sums cancel badly when points nearly collide; they
# are accumulated with a 64-bit mantissa.
WORK_DTYPE = np.clongdouble


def f_bilinear(xi_i, xi_j, rates: HoppingRates):
    """p + q*xi_i*xi_j - xi_i (broadcasts over arrays)."""
    return rates.p + rates.q * xi_i * xi_j - xi_i


# --------------------------------------------------------------------------
# tau-binomials


def tau_binomial(n: int, m: int, tau):
    """Standard Gaussian binomial ``[n choose m]_tau``.

    Zero for ``m < 0`` or ``m > n``.  Pure arithmetic on ``tau`` so that
    :class:`fractions.Fraction` inputs give exact results.
    """
    if m < 0 or m > n:
        return tau * 0
    m = min(m, n - m)
    num = tau * 0 + 1
    den = tau * 0 + 1
    for i in range(1, m + 1):
        num *= 1 - tau ** (n - m + i)
        den *= 1 - tau**i
    return num / den


def log_tau_binomial(n: int, m: int, tau: float) -> float:
    """log of ``[n choose m]_tau`` for 0 <= tau < 1, safe for large n."""
    if m < 0 or m > n:
        return -math.inf
    m = min(m, n - m)
    return sum(
        math.log1p(-(tau ** (n - m + i))) - math.log1p(-(tau**i)) for i in range(1, m + 1)
    )


@dataclass
class TauBinomial:
    """Bracket arithmetic for a fixed pair ``(p, q)``.

    ``bracket(N) = (p**N - q**N) / (p - q)`` with ``bracket(0) = 1``;
    ``modified(N, m) = [N]! / ([m]! [N-m]!) = q**(m(N-m)) * standard(N, m)``.
    Works with floats or Fractions (pass ``p`` and ``q`` of the same type).
    """

    p: object
    q: object
    _brackets: Dict[int, object] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.p == self.q:
            raise PreconditionError("bracket formula needs p != q")

    @classmethod
    def from_rates(cls, rates: HoppingRates) -> "TauBinomial":
        return cls(rates.p, rates.q)

    @property
    def tau(self):
        return self.p / self.q

    def bracket(self, n: int):
        if n == 0:
            return self.p * 0 + 1
        if n not in self._brackets:
            self._brackets[n] = (self.p**n - self.q**n) / (self.p - self.q)
        return self._brackets[n]

    def factorial(self, n: int):
        out = self.p * 0 + 1
        for i in range(1, n + 1):
            out *= self.bracket(i)
        return out

    def standard(self, n: int, m: int):
        return tau_binomial(n, m, self.tau)

    def modified(self, n: int, m: int):
        if m < 0 or m > n:
            return self.p * 0
        return self.q ** (m * (n - m)) * self.standard(n, m)

    def modified_from_brackets(self, n: int, m: int):
        """Same as :meth:`modified` but via the factorial quotient."""
        if m < 0 or m > n:
            return self.p * 0
        # pair the largest numerator factors with the largest denominator ones
        lo, hi = sorted((m, n - m))
        out = self.p * 0 + 1
        for i in range(1, lo + 1):
            out *= self.bracket(hi + i) / self.bracket(i)
        return out


# --------------------------------------------------------------------------
# the identities


def _relative(lhs, rhs) -> float:
    return float(abs(lhs - rhs) / max(1.0, float(abs(rhs))))


def _require_distinct(xi: np.ndarray) -> None:
    n = len(xi)
    scale = max(1.0, float(np.max(np.abs(xi)))) if n else 1.0
    for i in range(n):
        for j in range(i + 1, n):
            if abs(xi[i] - xi[j]) < _DEGENERATE_TOL * scale:
                raise DegenerateInputError(f"xi[{i}] and xi[{j}] coincide")


def _as_points(xi) -> np.ndarray:
    return np.atleast_1d(np.asarray(xi, dtype=complex))


def _inversions(perm: Sequence[int]) -> int:
    return sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])


def identity1_sides(xi, rates: HoppingRates):
    """Both sides of the signed permutation sum with nested partial products."""
    xi = _as_points(xi)
    n = len(xi)
    _require_distinct(xi)
    if np.any(np.abs(xi - 1) < _DEGENERATE_TOL):
        raise DegenerateInputError("some xi equals 1")
    p, q = rates.p, rates.q
    xw = xi.astype(WORK_DTYPE)
    lhs = WORK_DTYPE(0)
    for perm in itertools.permutations(range(n)):
        z = xw[list(perm)]
        partial = np.cumprod(z)
        den = partial - 1
        if np.any(np.abs(den) < _DEGENERATE_TOL):
            raise DegenerateInputError(f"partial product equals 1 for permutation {perm}")
        num = WORK_DTYPE(1)
        for i in range(n):
            num *= np.prod(p + q * z[i] * z[i + 1 :] - z[i])
        lhs += (-1) ** _inversions(perm) * num / np.prod(den)
    vdm = np.prod([xi[j] - xi[i] for i in range(n) for j in range(i + 1, n)])
    rhs = q ** (n * (n - 1) / 2) * vdm / np.prod(xi - 1)
    return lhs, complex(rhs)


def _subset_products(xi: np.ndarray, m: int, rates: HoppingRates) -> Iterator[Tuple[List[int], np.ndarray]]:
    """Yield ``(complement, prod_{i in S, j in S^c} f(i,j)/(xi_j - xi_i))``."""
    n = len(xi)
    xw = xi.astype(WORK_DTYPE)
    idx = range(n)
    for subset in itertools.combinations(idx, m):
        comp = [j for j in idx if j not in subset]
        s = xw[list(subset)][:, None]
        c = xw[comp][None, :]
        yield comp, np.prod(f_bilinear(s, c, rates) / (c - s))


def identity2_sides(xi, m: int, rates: HoppingRates):
    xi = _as_points(xi)
    n = len(xi)
    if not 0 <= m <= n - 1:
        raise PreconditionError(f"identity #2 needs N >= m + 1 (N={n}, m={m})")
    _require_distinct(xi)
    lhs = WORK_DTYPE(0)
    for comp, prod in _subset_products(xi, m, rates):
        lhs += prod * (1 - np.prod(xi[comp].astype(WORK_DTYPE)))
    tb = TauBinomial.from_rates(rates)
    rhs = rates.q**m * tb.modified(n - 1, m) * (1 - np.prod(xi))
    return lhs, complex(rhs)


def identity3_sides(xi, m: int, rates: HoppingRates):
    xi = _as_points(xi)
    n = len(xi)
    if not 0 <= m <= n:
        raise PreconditionError(f"identity #3 needs 0 <= m <= N (N={n}, m={m})")
    _require_distinct(xi)
    lhs = sum((prod for _, prod in _subset_products(xi, m, rates)), WORK_DTYPE(0))
    rhs = TauBinomial.from_rates(rates).modified(n, m)
    return lhs, complex(rhs)


def det_identity_sides(xi, rates: HoppingRates) -> Tuple[complex, complex]:
    """det(1/f(i,j)) by LU versus the closed product form."""
    xi = _as_points(xi)
    k = len(xi)
    _require_distinct(xi)
    p, q = rates.p, rates.q
    if np.any(np.abs(xi - 1) < _DEGENERATE_TOL) or np.any(np.abs(q * xi - p) < _DEGENERATE_TOL):
        raise DegenerateInputError("xi hits 1 or p/q")
    fmat = f_bilinear(xi[:, None], xi[None, :], rates)
    if np.any(np.abs(fmat) < _DEGENERATE_TOL):
        raise DegenerateInputError("f(i, j) vanishes")
    lhs = np.linalg.det(1.0 / fmat)
    off = ~np.eye(k, dtype=bool)
    ratio = (xi[None, :] - xi[:, None]) / fmat
    rhs = (
        (-1) ** k
        * (p * q) ** (k * (k - 1) / 2)
        * np.prod(ratio[off])
        * np.prod(1.0 / ((1 - xi) * (q * xi - p)))
    )
    return complex(lhs), complex(rhs)


def check_identity1(xi, rates: HoppingRates) -> float:
    return _relative(*identity1_sides(xi, rates))


def check_identity2(xi, m: int, rates: HoppingRates) -> float:
    return _relative(*identity2_sides(xi, m, rates))


def check_identity3(xi, m: int, rates: HoppingRates) -> float:
    return _relative(*identity3_sides(xi, m, rates))


def check_det_identity(xi, rates: HoppingRates) -> float:
    return _relative(*det_identity_sides(xi, rates))


# --------------------------------------------------------------------------
# random test points


def random_points(
    n: int,
    rng: np.random.Generator,
    rates: HoppingRates,
    r_min: float = 0.3,
    r_max: float = 1.7,
    puncture: float = 1e-2,
) -> np.ndarray:
    """``n`` complex points in the annulus ``r_min <= |xi| <= r_max``.

    Rejection keeps every point at least ``puncture`` away from 1, from
    ``tau`` and from the other points.
    """
    bad = [1.0]
    if rates.q > 0:
        bad.append(rates.tau)
    pts: List[complex] = []
    while len(pts) < n:
        # uniform in area
        r = math.sqrt(rng.uniform(r_min**2, r_max**2))
        z = r * np.exp(1j * rng.uniform(0.0, 2 * math.pi))
        if all(abs(z - b) >= puncture for b in bad) and all(abs(z - w) >= puncture for w in pts):
            pts.append(complex(z))
    return np.array(pts)


@dataclass
class SuiteRow:
    identity: str
    n: int
    m: int
    max_residual: float
    points: int


def run_suite(
    rates: HoppingRates,
    n_values: Sequence[int] = range(1, 7),
    det_k_values: Sequence[int] = range(1, 9),
    points: int = 100,
    seed: int = 0,
) -> List[SuiteRow]:
    """Evaluate every identity over random points; one row per (identity, N, m)."""
    rows: List[SuiteRow] = []
    root = np.random.SeedSequence(seed)

    def worst(label, n, m, fn):
        rng = np.random.default_rng(root.spawn(1)[0])
        res = max(fn(random_points(n, rng, rates)) for _ in range(points))
        rows.append(SuiteRow(label, n, m, res, points))

    for n in n_values:
        worst("identity1", n, -1, lambda z: check_identity1(z, rates))
        for m in range(0, n):
            worst("identity2", n, m, lambda z, m=m: check_identity2(z, m, rates))
        for m in range(0, n + 1):
            worst("identity3", n, m, lambda z, m=m: check_identity3(z, m, rates))
    for k in det_k_values:
        worst("det", k, -1, lambda z: check_det_identity(z, rates))
    return rows
