"""Piecewise-constant control policies over a time horizon."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .model import ALPHA_MIN, ControlTriple


@dataclass(frozen=True)
class ControlBounds:
    """Per-channel box ``lower <= (c_A, c_m, alpha) <= upper``."""

    lower: tuple[float, float, float] = (0.0, 0.0, ALPHA_MIN)
    upper: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ParameterError("bounds must have one entry per control channel")
        if np.any(lo > hi):
            raise ParameterError(f"empty control box: lower={self.lower}, upper={self.upper}")
        if lo[0] < 0 or lo[1] < 0 or hi[0] > 1 or hi[1] > 1:
            raise ParameterError("insecticide bounds must stay inside [0, 1]")
        if lo[2] <= 0 or hi[2] > 1:
            raise ParameterError("alpha bounds must stay inside (0, 1]")

    @classmethod
    def default(cls, alpha_min: float = ALPHA_MIN) -> ControlBounds:
        return cls((0.0, 0.0, alpha_min), (1.0, 1.0, 1.0))

    def frozen(self, channel: int, value: float) -> ControlBounds:
        """Copy with one channel pinned to ``value``."""
        lo, hi = list(self.lower), list(self.upper)
        lo[channel] = hi[channel] = float(value)
        return ControlBounds(tuple(lo), tuple(hi))

    def contains(self, values, atol: float = 0.0) -> bool:
        values = np.asarray(values, dtype=float)
        return bool(
            np.all(values >= np.asarray(self.lower) - atol)
            and np.all(values <= np.asarray(self.upper) + atol)
        )


@dataclass(frozen=True)
class ControlPolicy:
    """Controls held constant on each interval ``[breakpoints[j], breakpoints[j+1])``.

    ``values`` has shape ``(N, 3)`` with columns ``(c_A, c_m, alpha)``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    bounds: ControlBounds = field(default_factory=ControlBounds)

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        vals = np.array(self.values, dtype=float).reshape(-1, 3)
        if bp.ndim != 1 or bp.size < 2:
            raise ParameterError("a policy needs at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ParameterError("breakpoints must be strictly increasing")
        if vals.shape[0] != bp.size - 1:
            raise ParameterError(
                f"{bp.size - 1} intervals but {vals.shape[0]} control values"
            )
        if not self.bounds.contains(vals, atol=1e-12):
            raise ParameterError("control values outside their box")
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(
        cls,
        u: ControlTriple | tuple = (0.0, 0.0, 1.0),
        t_f: float = 84.0,
        n_intervals: int = 1,
        bounds: ControlBounds | None = None,
    ) -> ControlPolicy:
        bp = np.linspace(0.0, t_f, n_intervals + 1)
        vals = np.tile(np.asarray(u, dtype=float), (n_intervals, 1))
        return cls(bp, vals, bounds or ControlBounds())

    @classmethod
    def uniform(cls, values, t_f: float, bounds: ControlBounds | None = None) -> ControlPolicy:
        """Equal-length intervals spanning ``[0, t_f]``."""
        vals = np.asarray(values, dtype=float).reshape(-1, 3)
        return cls(np.linspace(0.0, t_f, vals.shape[0] + 1), vals, bounds or ControlBounds())

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0]

    @property
    def t_f(self) -> float:
        return float(self.breakpoints[-1])

    def value_at(self, t: float) -> ControlTriple:
        """Right-continuous lookup; the last interval is closed at ``t_f``."""
        j = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        j = min(max(j, 0), self.n_intervals - 1)
        return ControlTriple(*self.values[j])

    def as_vector(self) -> np.ndarray:
        return self.values.reshape(-1).copy()

    def with_vector(self, v) -> ControlPolicy:
        return ControlPolicy(self.breakpoints, np.asarray(v, dtype=float).reshape(-1, 3), self.bounds)

    def vector_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_intervals
        return np.tile(self.bounds.lower, n), np.tile(self.bounds.upper, n)
