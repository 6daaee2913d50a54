"""Monte Carlo ASEP on a finite window.

The infinite step / step-Bernoulli systems are cut to a window around the
particles of interest (:func:`truncate_initial`); jumps out of the window are
suppressed.  Trial ``k`` of a sample draws its initial condition and its
dynamics from two streams spawned off ``SeedSequence(seed, spawn_key=(k,))``,
so every trial is a pure function of ``(seed, k)`` and results do not depend
on the number of worker threads.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import poisson

from ._kernels import evolve
from .errors import PreconditionError, TruncationWarning
from .rates import Finite, HoppingRates, InitialCondition, Step, StepBernoulli

# Floor on the light-cone margin; at small t the bias bound of ceil(safety t)
# alone is loose.
MIN_PAD = 10
CHUNK = 256


@dataclass(frozen=True)
class LatticeState:
    """Occupied sites (sorted, distinct) inside the window ``[lo, hi]``."""

    lo: int
    hi: int
    positions: np.ndarray
    time: float = 0.0
    meta: Dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        if pos.size and (np.any(np.diff(pos) <= 0) or pos[0] < self.lo or pos[-1] > self.hi):
            raise PreconditionError("positions must be distinct, sorted and inside the window")
        object.__setattr__(self, "positions", pos)

    @property
    def occupied(self) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.positions)

    @property
    def count(self) -> int:
        return int(self.positions.size)


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int
    margin: int
    bias_bound: float


def light_cone_window(
    init: InitialCondition,
    t: float,
    m: int,
    safety: float = 3.0,
    x_values: Sequence[int] = (),
    pad: int = MIN_PAD,
) -> Window:
    """Window ``[-D - m, m + D]`` with ``D = max(ceil(safety t), pad)``.

    The window is widened to keep ``D`` sites of margin around a finite
    configuration, around every probed current site, and (step-Bernoulli)
    beyond the expected position ``m / rho`` of particle ``m``.  Influence
    from beyond the margin needs at least ``D`` successive unit-rate clock
    rings, so each side contributes at most ``P(Poisson(t) >= D)`` to the
    total-variation error; ``bias_bound`` is twice that.
    """
    if t < 0:
        raise PreconditionError("t must be >= 0")
    if m < 1:
        raise PreconditionError("m must be >= 1")
    if safety < 1:
        raise PreconditionError("safety factor below 1 leaves the light cone uncovered")
    D = max(int(math.ceil(safety * t)), int(pad))
    lo, hi = -D - m, m + D
    if isinstance(init, Finite):
        if init.positions:
            lo = min(lo, init.positions[0] - D)
            hi = max(hi, init.positions[-1] + D)
    elif isinstance(init, StepBernoulli):
        hi = max(hi, int(math.ceil(m / init.rho)) + D)
    for x in x_values:
        lo = min(lo, int(x) - D)
        hi = max(hi, int(x) + D)
    bias = 0.0 if t == 0 else float(min(1.0, 2.0 * poisson.sf(D - 1, t)))
    return Window(lo, hi, D, bias)


def _realize(init: InitialCondition, win: Window, m: int, rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, int]:
    """Initial positions and (possibly widened) right edge for one trial."""
    if isinstance(init, Finite):
        return np.array(init.positions, dtype=np.int64), win.hi
    if isinstance(init, Step):
        return np.arange(1, win.hi + 1, dtype=np.int64), win.hi
    if rng is None:
        raise PreconditionError("step-Bernoulli data needs an rng")
    occ = rng.random(win.hi) < init.rho
    hi = win.hi
    # keep D sites of margin beyond the realised m-th particle
    while True:
        sites = np.flatnonzero(occ) + 1
        if sites.size >= m and sites[m - 1] + win.margin <= hi:
            return sites.astype(np.int64), hi
        extra = rng.random(win.margin) < init.rho
        occ = np.concatenate([occ, extra])
        hi += win.margin


def truncate_initial(
    init: InitialCondition,
    rates: HoppingRates,
    t: float,
    m: int,
    safety: float = 3.0,
    rng: Optional[np.random.Generator] = None,
    x_values: Sequence[int] = (),
) -> LatticeState:
    """Finite-window version of ``init`` adequate for ``x_m`` up to time ``t``.

    The returned state's ``meta`` records the margin ``D`` and the
    total-variation bias bound of the truncation.
    """
    win = light_cone_window(init, t, m, safety, x_values)
    pos, hi = _realize(init, win, m, rng)
    meta = {"margin": win.margin, "bias_bound": win.bias_bound, "safety": safety}
    return LatticeState(win.lo, hi, pos, 0.0, meta)


def run_to_time(
    state: LatticeState,
    rates: HoppingRates,
    t_end: float,
    rng: np.random.Generator,
    check: bool = False,
) -> LatticeState:
    """Exact continuous-time dynamics from ``state.time`` to ``t_end``."""
    if t_end < state.time:
        raise PreconditionError("t_end precedes the current time")
    pos = state.positions.copy()
    events = 0
    if t_end > state.time and pos.size:
        events = int(evolve(pos, state.lo, state.hi, rates.p, state.time, t_end, rng, check))
    meta = dict(state.meta, events=state.meta.get("events", 0) + events)
    return replace(state, positions=pos, time=float(t_end), meta=meta)


def mth_position(state: LatticeState, m: int) -> int:
    """Site of the m-th particle from the left."""
    if not 1 <= m <= state.count:
        raise PreconditionError(f"m = {m} outside 1..{state.count}")
    return int(state.positions[m - 1])


def current(state: LatticeState, x: int) -> int:
    """Number of particles at or left of ``x``."""
    if not state.lo <= x <= state.hi:
        warnings.warn(f"site {x} outside window [{state.lo}, {state.hi}]", TruncationWarning)
    return int(np.searchsorted(state.positions, x, side="right"))


# --------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class EmpiricalCDF:
    """Sorted sample with its provenance; ``F(x)`` is right-continuous."""

    samples: np.ndarray
    seed: int
    trials: int
    meta: Dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.sort(np.asarray(self.samples, dtype=float)))

    def __call__(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.trials

    def left_limit(self, x):
        return np.searchsorted(self.samples, x, side="left") / self.trials

    def ks_distance(self, target: Callable) -> float:
        """``sup_x |F_n(x) - G(x)|`` over the real line for a continuous ``G``.

        Between jumps ``F_n`` is flat, so the supremum is attained at a
        sample point from one side or the other.
        """
        u = np.unique(self.samples)
        g = np.asarray(target(u), dtype=float)
        return float(max(np.max(np.abs(self(u) - g)), np.max(np.abs(self.left_limit(u) - g))))

    def lattice_ks_distance(self, target: Callable) -> float:
        """``max |F_n(x) - G(x)|`` over the sample points only."""
        u = np.unique(self.samples)
        return float(np.max(np.abs(self(u) - np.asarray(target(u), dtype=float))))

    def stderr(self, x):
        F = self(x)
        return np.sqrt(F * (1 - F) / self.trials)


@dataclass(frozen=True)
class Observables:
    """Per-trial ``x_m(t)`` for each requested ``m`` and ``T(x, t)`` for each ``x``."""

    m_values: Tuple[int, ...]
    x_values: Tuple[int, ...]
    positions: np.ndarray
    currents: np.ndarray
    seed: int
    window: Window
    meta: Dict = field(default_factory=dict, compare=False)


def trial_streams(seed: int, k: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Initial-condition and dynamics generators of trial ``k``."""
    # same streams as SeedSequence(seed, spawn_key=(k,)).spawn(2), built directly
    ic = np.random.SeedSequence(seed, spawn_key=(k, 0))
    dyn = np.random.SeedSequence(seed, spawn_key=(k, 1))
    return np.random.Generator(np.random.PCG64(ic)), np.random.Generator(np.random.PCG64(dyn))


def sample_observables(
    init: InitialCondition,
    rates: HoppingRates,
    t: float,
    trials: int,
    seed: int,
    m_values: Sequence[int] = (1,),
    x_values: Sequence[int] = (),
    safety: float = 3.0,
    workers: int = 1,
    check: bool = False,
) -> Observables:
    """Run ``trials`` independent paths and record particle positions and currents.

    Trials are split into fixed chunks and farmed out to ``workers`` threads;
    each trial writes only its own row, so the output is independent of the
    schedule.
    """
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    if workers < 1:
        raise PreconditionError("workers must be >= 1")
    m_values = tuple(int(m) for m in m_values)
    x_values = tuple(int(x) for x in x_values)
    m_top = max(m_values) if m_values else 1
    win = light_cone_window(init, t, m_top, safety, x_values)
    if isinstance(init, Finite) and m_top > len(init.positions):
        raise PreconditionError("m exceeds the number of particles")
    positions = np.empty((trials, len(m_values)), dtype=np.int64)
    currents = np.empty((trials, len(x_values)), dtype=np.int64)
    events = np.zeros(trials, dtype=np.int64)
    hi_used = np.empty(trials, dtype=np.int64)
    xs = np.array(x_values, dtype=np.int64)
    idx = np.array(m_values, dtype=np.int64) - 1

    def chunk(k0: int, k1: int) -> None:
        for k in range(k0, k1):
            ic_rng, dyn_rng = trial_streams(seed, k)
            pos, hi = _realize(init, win, m_top, ic_rng)
            if t > 0 and pos.size:
                events[k] = evolve(pos, win.lo, hi, rates.p, 0.0, t, dyn_rng, check)
            positions[k] = pos[idx]
            currents[k] = np.searchsorted(pos, xs, side="right")
            hi_used[k] = hi

    bounds = [(k, min(k + CHUNK, trials)) for k in range(0, trials, CHUNK)]
    if workers == 1:
        for b in bounds:
            chunk(*b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(chunk, *b) for b in bounds]:
                f.result()
    meta = {
        "t": t,
        "p": rates.p,
        "window": [win.lo, int(hi_used.max())],
        "margin": win.margin,
        "bias_bound": win.bias_bound,
        "mean_events": float(events.mean()),
    }
    return Observables(m_values, x_values, positions, currents, seed, win, meta)


def sample_marginal(
    init: InitialCondition,
    rates: HoppingRates,
    m: int,
    t: float,
    trials: int,
    seed: int,
    safety: float = 3.0,
    workers: int = 1,
) -> EmpiricalCDF:
    """Empirical law of ``x_m(t)``."""
    rates.require_left_drift()
    obs = sample_observables(init, rates, t, trials, seed, (m,), (), safety, workers)
    return EmpiricalCDF(obs.positions[:, 0], seed, trials, dict(obs.meta, m=m))
