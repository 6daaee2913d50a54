"""Exact N-particle transition probabilities from the permutation/contour formula.

``P_Y(X; t)`` is a sum over permutations ``sigma`` of ``N``-fold contour
integrals over a small circle ``|xi| = r``::

    sum_sigma  oint ... oint  A_sigma(xi) prod_i xi_{sigma(i)}^(x_i - y_{sigma(i)} - 1)
               * exp(t * sum_i eps(xi_i))  dxi_1 ... dxi_N

where every ``dxi`` carries the factor ``1/(2 pi i)``.  The integrals are
evaluated with the trapezoid rule on equispaced nodes, which converges
geometrically for these periodic analytic integrands.

The integrand grows like ``r**D`` with ``D = sum(x_i - y_i)`` the net
displacement, so configurations with ``D < 0`` lose every digit to
cancellation on the small circle.  They are evaluated in the mirror image
``x -> -x`` (which swaps ``p`` and ``q``), where the displacement is
positive.

:func:`generator_oracle` computes the same probabilities independently by
exponentiating the generator of the exclusion process on a finite window.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConvergenceError, PoleError, PreconditionError
from .rates import HoppingRates

N_MAX = 6
NODE_CAP = 512
# largest node tuple count evaluated in one vectorised block
_BLOCK = 1 << 21


def s_factor(xi_a, xi_b, rates: HoppingRates, tol: float = 1e-12):
    """Two-body scattering factor ``-(p + q xi_a xi_b - xi_a) / (p + q xi_a xi_b - xi_b)``."""
    p, q = rates.p, rates.q
    num = p + q * xi_a * xi_b - xi_a
    den = p + q * xi_a * xi_b - xi_b
    scale = 1.0 + np.abs(xi_a * xi_b) + np.abs(xi_b)
    if np.any(np.abs(den) < tol * scale):
        raise PoleError("S-factor evaluated at a pole")
    return -num / den


def epsilon(xi, rates: HoppingRates):
    """Single-particle dispersion ``p/xi + q*xi - 1``."""
    if np.any(np.asarray(xi) == 0):
        raise PreconditionError("epsilon is singular at xi = 0")
    return rates.p / xi + rates.q * xi - 1.0


def critical_radius(rates: HoppingRates) -> float:
    """Largest ``r`` keeping the S-factor poles outside ``|xi| = r``.

    With ``|xi_a| = r`` the pole in ``xi_b`` sits at ``p / (1 - q xi_a)``,
    whose modulus is at least ``p / (1 + q r)``; requiring that to exceed
    ``r`` gives ``q r^2 + r - p < 0``.
    """
    p, q = rates.p, rates.q
    if q == 0.0:
        return 1.0
    return (-1.0 + math.sqrt(1.0 + 4.0 * p * q)) / (2.0 * q)


def default_radius(rates: HoppingRates) -> float:
    p, q = rates.p, rates.q
    if p == 0.0:
        raise PreconditionError("the contour formula needs p != 0")
    cands = [0.5, 0.8 * critical_radius(rates)]
    if q > 0:
        cands.append(p / (2.0 * q))
    return min(cands)


@dataclass(frozen=True)
class ContourQuadrature:
    """Trapezoid rule on the circle ``|xi| = radius`` with ``nodes`` points.

    ``weights`` already include the ``1/(2 pi i)`` of the contour measure,
    so ``sum(weights * g(points))`` approximates ``oint g(xi) dxi/(2 pi i)``.
    """

    radius: float
    nodes: int

    def __post_init__(self):
        if self.nodes < 16 or self.nodes % 2:
            raise PreconditionError(f"nodes must be even and >= 16, got {self.nodes}")
        if not self.radius > 0:
            raise PreconditionError("radius must be positive")

    @property
    def points(self) -> np.ndarray:
        return self.radius * np.exp(2j * np.pi * np.arange(self.nodes) / self.nodes)

    @property
    def weights(self) -> np.ndarray:
        return self.points / self.nodes

    def doubled(self) -> "ContourQuadrature":
        return ContourQuadrature(self.radius, 2 * self.nodes)

    def check_small(self, rates: HoppingRates, margin: float = 1e-3) -> None:
        """Reject radii that let an S-factor pole onto or inside the circle."""
        if self.radius >= critical_radius(rates) * (1.0 - margin):
            raise PoleError(
                f"radius {self.radius} is not below the pole radius {critical_radius(rates):.6g}"
            )
        z = self.points
        den = rates.p + rates.q * z[:, None] * z[None, :] - z[None, :]
        if np.min(np.abs(den)) < margin * rates.p:
            raise PoleError("S-factor denominator nearly vanishes on the node grid")


def inversions(perm: Sequence[int]) -> List[Tuple[int, int]]:
    """Pairs ``(perm[i], perm[j])`` with ``i < j`` and ``perm[i] > perm[j]``."""
    n = len(perm)
    return [(perm[i], perm[j]) for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j]]


def amplitude(perm: Sequence[int], xi: Sequence[complex], rates: HoppingRates) -> complex:
    """``A_sigma``: product of ``S(xi_a, xi_b)`` over the inversions ``(a, b)``."""
    out = 1.0 + 0j
    for a, b in inversions(perm):
        out *= s_factor(xi[a], xi[b], rates)
    return out


def _validate(Y, X, rates: HoppingRates, n_max: int, ordered: bool = True):
    Y = tuple(int(y) for y in Y)
    if any(b <= a for a, b in zip(Y, Y[1:])):
        raise PreconditionError("Y must be strictly increasing")
    if X is not None:
        X = tuple(int(x) for x in X)
        if len(X) != len(Y):
            raise PreconditionError("X and Y must have the same length")
        if ordered and any(b <= a for a, b in zip(X, X[1:])):
            raise PreconditionError("X must be strictly increasing")
    if len(Y) > n_max:
        raise PreconditionError(f"N = {len(Y)} exceeds N_max = {n_max}")
    if rates.p == 0.0:
        raise PreconditionError("the contour formula needs p != 0")
    return Y, X


def _grid_axes(z: np.ndarray, ndim: int) -> List[np.ndarray]:
    axes = []
    for k in range(ndim):
        shape = [1] * ndim
        shape[k] = z.shape[0]
        axes.append(z.reshape(shape))
    return axes


def permutation_terms(
    Y: Sequence[int],
    X: Sequence[int],
    t: float,
    rates: HoppingRates,
    quad: ContourQuadrature,
    n_max: int = N_MAX,
    ordered: bool = True,
) -> Dict[Tuple[int, ...], complex]:
    """Trapezoid value of each permutation's contour integral, keyed by ``sigma``.

    ``ordered=False`` admits any integer vector ``X``, which evaluates the
    free-space solution ``u(X; t)`` off the physical region.
    """
    Y, X = _validate(Y, X, rates, n_max, ordered)
    quad.check_small(rates)
    n_part = len(Y)
    shift = Y[0]
    Y = tuple(y - shift for y in Y)
    X = tuple(x - shift for x in X)
    z = quad.points
    base = np.exp(t * epsilon(z, rates)) * quad.weights
    perms = list(itertools.permutations(range(n_part)))
    out = {perm: 0j for perm in perms}
    n = quad.nodes
    # chunk along the first axis so a block holds at most _BLOCK node tuples
    step = max(1, _BLOCK // n ** (n_part - 1)) if n_part > 1 else n
    for start in range(0, n, step):
        z0 = z[start : start + step]
        axes = [z0.reshape([-1] + [1] * (n_part - 1))] + _grid_axes(z, n_part)[1:]
        bases = [base[start : start + step].reshape(axes[0].shape)] + [
            base.reshape(a.shape) for a in axes[1:]
        ]
        smat = {}
        for a in range(n_part):
            for b in range(n_part):
                if a != b:
                    smat[a, b] = s_factor(axes[a], axes[b], rates)
        for perm in perms:
            inv_perm = np.argsort(perm)
            term = 1.0 + 0j
            for a, b in inversions(perm):
                term = term * smat[a, b]
            for k in range(n_part):
                expo = X[inv_perm[k]] - Y[k] - 1
                term = term * (axes[k] ** expo * bases[k])
            out[perm] += complex(np.sum(term))
    return out


@dataclass
class BetheResult:
    probability: float
    imag: float
    nodes: int
    radius: float
    change: float
    identity_term: float
    other_terms: complex


def mirror(config: Sequence[int]) -> Tuple[int, ...]:
    return tuple(sorted(-x for x in config))


def _frame(Y, X, rates: HoppingRates):
    """Mirror the problem when the net displacement is negative."""
    if sum(X) - sum(Y) < 0 and rates.q > 0:
        return mirror(Y), mirror(X), HoppingRates(rates.q)
    return Y, X, rates


def _evaluate(Y, X, t, rates, radius, nodes, n_max) -> BetheResult:
    Y, X, rates = _frame(Y, X, rates)
    if radius is None:
        radius = default_radius(rates)
    quad = ContourQuadrature(radius, nodes)
    terms = permutation_terms(Y, X, t, rates, quad, n_max)
    ident = tuple(range(len(Y)))
    total = sum(terms.values())
    return BetheResult(
        probability=total.real,
        imag=total.imag,
        nodes=quad.nodes,
        radius=quad.radius,
        change=math.nan,
        identity_term=terms[ident].real,
        other_terms=total - terms[ident],
    )


def transition_probability(
    Y: Sequence[int],
    X: Sequence[int],
    t: float,
    rates: HoppingRates,
    quad: Optional[ContourQuadrature] = None,
    n_max: int = N_MAX,
    tol: float = 1e-12,
    imag_tol: float = 1e-9,
    full_output: bool = False,
):
    """``P_Y(X; t)`` for ASEP on Z from the permutation/contour formula.

    With ``quad=None`` the radius defaults to :func:`default_radius` (in the
    evaluation frame) and the node count doubles from 32 until two
    successive values agree to ``tol`` (at most :data:`NODE_CAP` nodes).
    A fixed ``quad`` is used as given, in the original frame.

    Raises
    ------
    PreconditionError
        ``p == 0``, unordered configurations, or ``N > n_max``.
    PoleError
        The radius lets an S-factor pole onto or inside the contour.
    ConvergenceError
        The imaginary part exceeds ``imag_tol`` or the doubling does not settle.
    """
    if t < 0:
        raise PreconditionError("t must be non-negative")
    Y, X = _validate(Y, X, rates, n_max)
    if quad is not None:
        terms = permutation_terms(Y, X, t, rates, quad, n_max)
        total = sum(terms.values())
        ident = terms[tuple(range(len(Y)))]
        res = BetheResult(total.real, total.imag, quad.nodes, quad.radius, math.nan,
                          ident.real, total - ident)
    else:
        nodes = 32
        res = _evaluate(Y, X, t, rates, None, nodes, n_max)
        while True:
            if 2 * nodes > NODE_CAP or (2 * nodes) ** len(Y) > 1 << 27:
                raise ConvergenceError(
                    f"node doubling did not settle (last change {res.change:.3g} at {nodes} nodes)"
                )
            nodes *= 2
            nxt = _evaluate(Y, X, t, rates, None, nodes, n_max)
            nxt.change = abs(nxt.probability - res.probability)
            res = nxt
            if res.change < tol:
                break
    if abs(res.imag) > imag_tol:
        raise ConvergenceError(f"imaginary residue {res.imag:.3g} exceeds {imag_tol:g}")
    return res if full_output else res.probability


def u_value(
    Y: Sequence[int],
    X: Sequence[int],
    t: float,
    rates: HoppingRates,
    quad: Optional[ContourQuadrature] = None,
) -> complex:
    """The contour sum ``u(X; t)`` at an arbitrary integer vector ``X``.

    Equals ``P_Y(X; t)`` when ``X`` is strictly increasing; elsewhere it is
    the analytic continuation that satisfies the boundary conditions.
    """
    if quad is None:
        quad = ContourQuadrature(default_radius(rates), 64)
    return sum(permutation_terms(Y, X, t, rates, quad, ordered=False).values())


def transition_table(
    Y: Sequence[int],
    t: float,
    rates: HoppingRates,
    window: Tuple[int, int],
    nodes: Optional[int] = None,
    imag_tol: float = 1e-9,
) -> Dict[Tuple[int, ...], float]:
    """``P_Y(X; t)`` for every ordered ``X`` inside ``window`` at once.

    Same trapezoid sums as :func:`transition_probability`, organised as one
    N-dimensional inverse FFT per permutation: with ``xi_k = r w^j_k`` the
    monomial ``prod xi_k^a_k`` is ``r^(sum a) w^(j.a)``, so the node sum for
    every exponent vector is a DFT of the ``X``-independent part.  Each
    ``X`` is read from the frame (direct or mirrored) matching the sign of
    its net displacement.
    """
    Y, _ = _validate(Y, None, rates, 4)
    lo, hi = window
    width = hi - lo + 1
    if nodes is None:
        nodes = 128
        while nodes < 2 * width:
            nodes *= 2
    direct = _fft_table(Y, t, rates, window, nodes, imag_tol)
    if rates.q == 0:
        return direct
    mirrored = _fft_table(mirror(Y), t, HoppingRates(rates.q), (-hi, -lo), nodes, imag_tol)
    out = {}
    for X, val in direct.items():
        if sum(X) - sum(Y) < 0:
            val = mirrored[mirror(X)]
        if abs(val.imag) > imag_tol:
            raise ConvergenceError(f"imaginary residue {val.imag:.3g} at X={X}")
        out[X] = float(val.real)
    return out


def _fft_table(Y, t, rates, window, nodes, imag_tol):
    lo, hi = window
    width = hi - lo + 1
    quad = ContourQuadrature(default_radius(rates), nodes)
    if quad.nodes < width:
        raise PreconditionError("node count must exceed the window width")
    quad.check_small(rates)
    n_part = len(Y)
    n = quad.nodes
    r = quad.radius
    z = quad.points
    base = np.exp(t * epsilon(z, rates)) * quad.weights
    # shift coordinates so that exponents stay small
    shift = Y[0]
    Y = tuple(y - shift for y in Y)
    axes = _grid_axes(z, n_part)
    fixed = 1.0 + 0j
    for k in range(n_part):
        fixed = fixed * (axes[k] ** (-Y[k] - 1) * base.reshape(axes[k].shape))
    smat = {}
    for a in range(n_part):
        for b in range(n_part):
            if a != b:
                smat[a, b] = s_factor(axes[a], axes[b], rates)
    acc = np.zeros((n,) * n_part, dtype=complex)
    for perm in itertools.permutations(range(n_part)):
        h = fixed
        for a, b in inversions(perm):
            h = h * smat[a, b]
        h = np.broadcast_to(h, (n,) * n_part)
        acc += np.transpose(np.fft.ifftn(h), axes=perm)
    acc *= float(n) ** n_part
    out = {}
    for X in itertools.combinations(range(lo - shift, hi - shift + 1), n_part):
        out[tuple(x + shift for x in X)] = complex(acc[tuple(x % n for x in X)] * r ** sum(X))
    return out


# --------------------------------------------------------------------------
# independent oracle


def generator_oracle(
    Y: Sequence[int],
    t: float,
    rates: HoppingRates,
    window: Tuple[int, int],
    max_states: int = 20000,
    leak_tol: float = 1e-10,
    full_output: bool = False,
):
    """Distribution at time ``t`` by exponentiating the exclusion-process generator.

    The state space is every ordered ``N``-subset of ``window`` plus one
    absorbing state collecting paths that attempt to leave the window; its
    final mass is the leakage.  Raises :class:`PreconditionError` if the
    leakage exceeds ``leak_tol`` or the state space exceeds ``max_states``.
    """
    Y = tuple(int(y) for y in Y)
    lo, hi = window
    if not (lo <= Y[0] and Y[-1] <= hi):
        raise PreconditionError("Y must lie inside the window")
    n_part = len(Y)
    n_states = math.comb(hi - lo + 1, n_part)
    if n_states > max_states:
        raise PreconditionError(f"{n_states} states exceed the cap {max_states}")
    states = list(itertools.combinations(range(lo, hi + 1), n_part))
    index = {s: i for i, s in enumerate(states)}
    sink = len(states)
    rows, cols, vals = [], [], []
    p, q = rates.p, rates.q
    for i, s in enumerate(states):
        occupied = set(s)
        out_rate = 0.0
        for k, x in enumerate(s):
            for dest, rate in ((x + 1, p), (x - 1, q)):
                if rate == 0.0 or dest in occupied:
                    continue
                out_rate += rate
                if lo <= dest <= hi:
                    nxt = s[:k] + (dest,) + s[k + 1 :]
                    rows.append(index[nxt])
                else:
                    rows.append(sink)
                cols.append(i)
                vals.append(rate)
        rows.append(i)
        cols.append(i)
        vals.append(-out_rate)
    size = len(states) + 1
    # column-stochastic form: d/dt v = Q v
    Q = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(size, size))
    v0 = np.zeros(size)
    v0[index[Y]] = 1.0
    if t == 0:
        v = v0
    elif size <= 2500:
        v = scipy.linalg.expm(Q.toarray() * t) @ v0
    else:
        v = scipy.sparse.linalg.expm_multiply(Q * t, v0)
    leak = float(v[sink])
    if leak > leak_tol:
        raise PreconditionError(f"window leakage {leak:.3g} exceeds {leak_tol:g}")
    dist = {s: float(v[i]) for i, s in enumerate(states)}
    return (dist, leak) if full_output else dist


def oracle_window(Y: Sequence[int], t: float, leak_tol: float = 1e-10) -> Tuple[int, int]:
    """Smallest symmetric padding around ``Y`` whose leakage bound is below ``leak_tol``.

    Leaving the window needs at least ``d`` jumps by one particle within
    time ``t``; each particle jumps at rate at most 1, so the leakage is at
    most ``2 * P(Poisson(t) >= d)``.
    """
    from scipy.stats import poisson

    d = 1
    while 2 * poisson.sf(d - 1, t) > leak_tol:
        d += 1
    return min(Y) - d, max(Y) + d
