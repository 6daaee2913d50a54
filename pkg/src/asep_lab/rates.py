"""Hopping rates and initial conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

from .errors import PreconditionError


@dataclass(frozen=True)
class HoppingRates:
    """Right/left jump probabilities ``(p, q)`` with ``q = 1 - p``.

    Only ``p`` is stored so that ``p + q == 1`` holds exactly.
    """

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise PreconditionError(f"p must lie in [0, 1], got {self.p}")

    @classmethod
    def from_pq(cls, p: float, q: float) -> "HoppingRates":
        if abs(p + q - 1.0) > 1e-12:
            raise PreconditionError(f"p + q must equal 1, got {p} + {q}")
        return cls(p)

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def tau(self) -> float:
        """Ratio p/q; lies in [0, 1) when the drift is to the left."""
        if self.q == 0.0:
            raise PreconditionError("tau undefined for q = 0")
        return self.p / self.q

    @property
    def gamma(self) -> float:
        return self.q - self.p

    @property
    def delta(self) -> float:
        """XXZ anisotropy 1 / (2 sqrt(pq))."""
        pq = self.p * self.q
        return math.inf if pq == 0.0 else 1.0 / (2.0 * math.sqrt(pq))

    @property
    def left_drift(self) -> bool:
        return self.q > self.p

    def require_left_drift(self) -> None:
        if not self.left_drift:
            raise PreconditionError(f"requires q > p, got p={self.p}")


@dataclass(frozen=True)
class Finite:
    """Finitely many particles at the strictly increasing sites ``Y``."""

    positions: Tuple[int, ...]

    def __post_init__(self):
        ys = tuple(int(y) for y in self.positions)
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise PreconditionError(f"positions must be strictly increasing: {ys}")
        object.__setattr__(self, "positions", ys)


@dataclass(frozen=True)
class Step:
    """Every site of {1, 2, ...} occupied."""


@dataclass(frozen=True)
class StepBernoulli:
    """Sites of {1, 2, ...} occupied independently with probability ``rho``."""

    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise PreconditionError(f"rho must lie in (0, 1], got {self.rho}")


InitialCondition = Union[Finite, Step, StepBernoulli]


def density(init: InitialCondition) -> float:
    """Density on the positive half-line (1 for Step and Finite)."""
    return init.rho if isinstance(init, StepBernoulli) else 1.0
