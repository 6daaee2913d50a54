"""KPZ-scaling convergence studies: Monte Carlo ASEP against F1 / F2.

Particle side::

    P((x_m(t / gamma) - c1 t) / (c2 t^(1/3)) <= s) -> F2(s)        0 < sigma < rho^2
                                                   -> F1(s)^2      sigma = rho^2 < 1

Current side, ``T(x, t)`` the number of particles at or left of ``x``::

    P((T(v t, t / gamma) - a1 t) / (a2 t^(1/3)) <= s) -> 1 - F2(-s)     -1 < v < 2 rho - 1
                                                       -> 1 - F1(-s)^2  v = 2 rho - 1, rho < 1

The simulator always runs in raw process time; :func:`process_time` is the
single place the ``1 / gamma`` dilation is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from . import painleve
from .errors import PreconditionError
from .rates import HoppingRates, InitialCondition, Step, StepBernoulli
from .simulation import EmpiricalCDF, sample_observables

BOUNDARY_TOL = 1e-12


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def scaling_constants(sigma: float) -> Tuple[float, float]:
    """``c1 = -1 + 2 sqrt(sigma)``, ``c2 = sigma^(-1/6) (1 - sqrt(sigma))^(2/3)``."""
    if not 0.0 < sigma < 1.0:
        raise PreconditionError(f"sigma must lie in (0, 1), got {sigma}")
    r = math.sqrt(sigma)
    return -1.0 + 2.0 * r, sigma ** (-1.0 / 6.0) * (1.0 - r) ** (2.0 / 3.0)


def current_constants(v: float) -> Tuple[float, float]:
    """``a1 = (1 + v)^2 / 4``, ``a2 = 2^(-4/3) (1 - v^2)^(2/3)``."""
    if not -1.0 < v < 1.0:
        raise PreconditionError(f"v must lie in (-1, 1), got {v}")
    return (1.0 + v) ** 2 / 4.0, 2.0 ** (-4.0 / 3.0) * (1.0 - v * v) ** (2.0 / 3.0)


def classify_particle(sigma: float, rho: float) -> str:
    """Limit law of the scaled ``x_m`` for density ``rho``: ``"F2"`` or ``"F1-squared"``."""
    if not 0.0 < rho <= 1.0:
        raise PreconditionError("rho must lie in (0, 1]")
    if not 0.0 < sigma <= 1.0:
        raise PreconditionError("sigma must lie in (0, 1]")
    edge = rho * rho
    if abs(sigma - edge) <= BOUNDARY_TOL:
        if rho >= 1.0:
            raise PreconditionError("sigma = rho^2 = 1 has no stated limit law")
        return "F1-squared"
    if sigma < edge:
        return "F2"
    raise PreconditionError("sigma > rho^2 is the Gaussian regime, not covered")


def classify_current(v: float, rho: float) -> str:
    """Limit law of the scaled current: ``"F2-current"`` or ``"F1-squared-current"``."""
    if not 0.0 < rho <= 1.0:
        raise PreconditionError("rho must lie in (0, 1]")
    if not -1.0 < v < 1.0:
        raise PreconditionError("v must lie in (-1, 1)")
    edge = 2.0 * rho - 1.0
    if abs(v - edge) <= BOUNDARY_TOL:
        if rho >= 1.0:
            raise PreconditionError("v = 2 rho - 1 = 1 has no stated limit law")
        return "F1-squared-current"
    if v < edge:
        return "F2-current"
    raise PreconditionError("v > 2 rho - 1 is the Gaussian regime, not covered")


def target_law(regime: str) -> Callable:
    """CDF of the limit law for a regime label."""
    if regime in ("F2", "F2-current"):
        base = painleve.tw_distribution(2)
    else:
        f1 = painleve.tw_distribution(1)
        base = lambda s: f1(s) ** 2
    if regime.endswith("current"):
        return lambda s: 1.0 - base(-np.asarray(s, dtype=float))
    return base


def process_time(t: float, rates: HoppingRates) -> float:
    """Raw process time ``t / gamma`` for scaled time ``t``."""
    rates.require_left_drift()
    return t / rates.gamma


def ks_distance(ecdf: EmpiricalCDF, target: Callable) -> float:
    """Supremum distance over the real line (both sides of every jump)."""
    return ecdf.ks_distance(target)


@dataclass
class ConvergenceReport:
    """KS distance to the limit law along a ladder of scaled times."""

    regime: str
    t_ladder: Tuple[float, ...]
    ks: Tuple[float, ...]
    lattice_ks: Tuple[float, ...]
    trials: int
    seed: int
    params: Dict = field(default_factory=dict)
    rungs: List[Dict] = field(default_factory=list)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.t_ladder, self.t_ladder[1:])):
            raise PreconditionError("t ladder must be strictly increasing")

    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.ks, self.ks[1:]))


def _init(rho: float) -> InitialCondition:
    return Step() if rho == 1.0 else StepBernoulli(rho)


def _ladder(t_ladder: Sequence[float]) -> Tuple[float, ...]:
    ts = tuple(float(t) for t in t_ladder)
    if not ts:
        raise PreconditionError("empty t ladder")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise PreconditionError("t ladder must be strictly increasing")
    return ts


def _shared_paths(rates, rho, t, m, x, trials, seed, safety, workers):
    """One batch of paths recording both ``x_m`` and ``T(x)``.

    Particle and current studies at matched parameters request the same
    ``(m, x)`` and therefore see identical paths.
    """
    return sample_observables(
        _init(rho), rates, process_time(t, rates), trials, seed, (m,), (x,), safety, workers
    )


def particle_limit_study(
    rates: HoppingRates,
    rho: float,
    sigma: float,
    t_ladder: Sequence[float],
    trials: int,
    seed: int,
    safety: float = 3.0,
    workers: int = 1,
) -> ConvergenceReport:
    """KS distance of the scaled ``x_m(t / gamma)`` to F2 or F1^2 for each ``t``.

    ``m = round_half_up(sigma t)`` and the constants ``c1, c2`` use the
    realised ratio ``m / t``.
    """
    rates.require_left_drift()
    regime = classify_particle(sigma, rho)
    ts = _ladder(t_ladder)
    target = target_law(regime)
    ks, lks, rungs = [], [], []
    for t in ts:
        m = round_half_up(sigma * t)
        if m < 1:
            raise PreconditionError(f"m = round(sigma t) is 0 at t = {t}")
        s_eff = m / t
        c1, c2 = scaling_constants(s_eff)
        x_ref = round_half_up(c1 * t)
        obs = _shared_paths(rates, rho, t, m, x_ref, trials, seed, safety, workers)
        scaled = (obs.positions[:, 0] - c1 * t) / (c2 * t ** (1.0 / 3.0))
        e = EmpiricalCDF(scaled, seed, trials)
        ks.append(e.ks_distance(target))
        lks.append(e.lattice_ks_distance(target))
        rungs.append(
            dict(t=t, m=m, sigma_eff=s_eff, c1=c1, c2=c2, process_time=obs.meta["t"],
                 mean=float(scaled.mean()), window=obs.meta["window"], bias_bound=obs.meta["bias_bound"])
        )
    params = dict(p=rates.p, rho=rho, sigma=sigma, safety=safety, time_dilation=1.0 / rates.gamma)
    return ConvergenceReport(regime, ts, tuple(ks), tuple(lks), trials, seed, params, rungs)


def current_limit_study(
    rates: HoppingRates,
    rho: float,
    v: float,
    t_ladder: Sequence[float],
    trials: int,
    seed: int,
    safety: float = 3.0,
    workers: int = 1,
) -> ConvergenceReport:
    """KS distance of the scaled ``T(v t, t / gamma)`` to ``1 - F2(-s)`` or ``1 - F1(-s)^2``.

    The probe site is ``x = round_half_up(v t)`` and ``a1, a2`` use ``x / t``.
    """
    rates.require_left_drift()
    regime = classify_current(v, rho)
    ts = _ladder(t_ladder)
    target = target_law(regime)
    ks, lks, rungs = [], [], []
    for t in ts:
        x = round_half_up(v * t)
        v_eff = x / t
        a1, a2 = current_constants(v_eff)
        m_ref = max(1, round_half_up(a1 * t))
        obs = _shared_paths(rates, rho, t, m_ref, x, trials, seed, safety, workers)
        scaled = (obs.currents[:, 0] - a1 * t) / (a2 * t ** (1.0 / 3.0))
        e = EmpiricalCDF(scaled, seed, trials)
        ks.append(e.ks_distance(target))
        lks.append(e.lattice_ks_distance(target))
        rungs.append(
            dict(t=t, x=x, v_eff=v_eff, a1=a1, a2=a2, process_time=obs.meta["t"],
                 mean=float(scaled.mean()), window=obs.meta["window"], bias_bound=obs.meta["bias_bound"])
        )
    params = dict(p=rates.p, rho=rho, v=v, safety=safety, time_dilation=1.0 / rates.gamma)
    return ConvergenceReport(regime, ts, tuple(ks), tuple(lks), trials, seed, params, rungs)
