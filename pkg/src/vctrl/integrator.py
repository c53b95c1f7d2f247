"""Explicit Runge-Kutta integration under piecewise-constant controls.

Two schemes are available: classical fixed-step RK4 and the adaptive
Dormand-Prince 5(4) pair. Both never step across a control breakpoint or an
output time; the horizon is cut into segments at the union of those instants
and each segment is integrated with a single control value. The adaptive
scheme re-estimates its initial step wherever the control jumps, so a
run over ``[0, t_f]`` reproduces two runs over ``[0, t*]`` and ``[t*, t_f]``.

The core routine, :func:`integrate_batch`, advances a whole batch of initial
states and control schedules at once with one shared step sequence. Finite
difference gradients rely on that: every perturbed member sees exactly the
same discretization, so differences between members are smooth in the
controls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from . import model
from .errors import IntegrationDivergedError, ParameterError
from .model import EpiParams
from .policy import ControlPolicy

DEFAULT_SAMPLE_SPACING = 0.25

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration scheme and output sampling.

    ``step`` applies to ``rk4``; ``rel_tol``/``abs_tol`` to ``adaptive``.
    ``output_points=None`` samples every 0.25 day.
    """

    method: Literal["adaptive", "rk4"] = "adaptive"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    step: float = 0.01
    output_points: int | None = None

    def __post_init__(self):
        if self.method not in ("adaptive", "rk4"):
            raise ParameterError(f"unknown integration method {self.method!r}")
        if not (self.step > 0 and self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("step and tolerances must be > 0")
        if self.output_points is not None and self.output_points < 2:
            raise ParameterError("output_points must be >= 2")

    def n_points(self, t_f: float) -> int:
        if self.output_points is not None:
            return self.output_points
        return max(2, int(round(t_f / DEFAULT_SAMPLE_SPACING)) + 1)


@dataclass(frozen=True)
class Trajectory:
    """States sampled on a uniform grid from 0 to ``t_f``."""

    times: np.ndarray
    states: np.ndarray
    scale: Literal["full", "normalized", "other"] = "normalized"

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.shape[0] != self.times.size:
            raise ParameterError("states must have one row per sample time")
        if self.times.size < 2 or np.any(np.diff(self.times) <= 0):
            raise ParameterError("sample times must be strictly increasing")

    @property
    def t_f(self) -> float:
        return float(self.times[-1])

    def column(self, name: str) -> np.ndarray:
        names = model.STATE_NAMES if self.scale == "normalized" else model.FullState._fields
        return self.states[:, names.index(name)]


def _segment_times(breakpoints: np.ndarray, t_f: float, samples: np.ndarray | None) -> np.ndarray:
    pts = [np.asarray(breakpoints, dtype=float), np.array([0.0, t_f])]
    if samples is not None:
        pts.append(samples)
    t = np.unique(np.concatenate(pts))
    t = t[(t >= 0.0) & (t <= t_f)]
    # merge instants closer than round-off so no zero-length segment survives
    keep = np.concatenate([[True], np.diff(t) > 1e-12 * max(1.0, t_f)])
    t = t[keep]
    t[-1] = t_f
    return t


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


def _initial_step(f, t0, y0, f0, seg, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    d2 = np.max(np.abs(f(t0 + h0, y1) - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, seg)


def integrate_batch(
    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    x0,
    breakpoints,
    values,
    cfg: IntegratorConfig,
    t_f: float,
    sample_times=None,
):
    """Integrate a batch of systems with piecewise-constant controls.

    ``f(t, x, u)`` maps ``x`` of shape ``(b, n)`` and ``u`` of shape ``(b, 3)``
    to derivatives of shape ``(b, n)``. ``values`` has shape ``(N, 3)`` (shared)
    or ``(b, N, 3)``. Returns ``(samples, x_final)`` where ``samples`` has shape
    ``(len(sample_times), b, n)`` or is None.
    """
    if not t_f > 0:
        raise ParameterError("t_f must be > 0")
    x = np.array(x0, dtype=float, ndmin=2)
    b = x.shape[0]
    breakpoints = np.asarray(breakpoints, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = np.broadcast_to(values, (b,) + values.shape)
    if breakpoints[0] > 1e-12 or breakpoints[-1] < t_f * (1 - 1e-12):
        raise ParameterError("policy does not cover [0, t_f]")
    if values.shape[1] != breakpoints.size - 1:
        raise ParameterError("values do not match breakpoints")

    samples = None
    if sample_times is not None:
        sample_times = np.asarray(sample_times, dtype=float)
        samples = np.empty((sample_times.size, b, x.shape[1]))
    seg = _segment_times(breakpoints, t_f, sample_times)

    next_sample = 0
    h = None
    j_prev = -1
    for a, z in zip(seg[:-1], seg[1:]):
        if samples is not None:
            while next_sample < sample_times.size and sample_times[next_sample] <= a + 1e-12 * max(1.0, t_f):
                samples[next_sample] = x
                next_sample += 1
        j = min(int(np.searchsorted(breakpoints, a, side="right")) - 1, values.shape[1] - 1)
        u = values[:, j, :]
        if j != j_prev:
            # restart step selection at a control discontinuity
            if j_prev < 0 or not np.array_equal(u, values[:, j_prev, :]):
                h = None
            j_prev = j

        def g(t, y, u=u):
            return f(t, y, u)

        # overflow is detected explicitly and reported as divergence
        with np.errstate(over="ignore", invalid="ignore"):
            if cfg.method == "rk4":
                x = _rk4_segment(g, x, a, z, cfg.step)
            else:
                x, h = _dopri_segment(g, x, a, z, h, cfg.rel_tol, cfg.abs_tol)
    if samples is not None:
        while next_sample < sample_times.size:
            samples[next_sample] = x
            next_sample += 1
    return samples, x


def _rk4_segment(g, x, a, z, step):
    n = max(1, int(np.ceil((z - a) / step - 1e-9)))
    h = (z - a) / n
    t = a
    for i in range(n):
        k1 = g(t, x)
        k2 = g(t + h / 2, x + h / 2 * k1)
        k3 = g(t + h / 2, x + h / 2 * k2)
        k4 = g(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = a + (i + 1) * h
        if not np.all(np.isfinite(x)):
            raise IntegrationDivergedError(t)
    return x


def _dopri_segment(g, x, a, z, h, rtol, atol):
    t = a
    k1 = g(t, x)
    if h is None:
        h = _initial_step(g, t, x, k1, z - a, rtol, atol)
    h_min = 1e-13 * max(1.0, abs(z))
    while t < z:
        last = h >= z - t
        step = z - t if last else h
        ks = [k1]
        for i in range(1, 7):
            yi = x + step * sum(aij * kj for aij, kj in zip(_A[i], ks) if aij != 0.0)
            ks.append(g(t + _C[i] * step, yi))
        x_new = x + step * sum(bi * ki for bi, ki in zip(_B5, ks) if bi != 0.0)
        err_vec = step * sum(ei * ki for ei, ki in zip(_E, ks) if ei != 0.0)
        err = _error_norm(err_vec, x, x_new, rtol, atol)
        if not np.isfinite(err) or not np.all(np.isfinite(x_new)):
            h = step * 0.2
            if h < h_min:
                raise IntegrationDivergedError(t)
            continue
        if err <= 1.0:
            t = z if last else t + step
            x = x_new
            k1 = ks[6]
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err**-0.2))
            # a step shortened to land on z says nothing about the natural size
            h_next = step * factor
            h = max(h, h_next) if last else h_next
        else:
            h = step * max(0.2, 0.9 * err**-0.2)
            if h < h_min:
                raise IntegrationDivergedError(t)
    return x, h


SystemName = Literal["full", "normalized"]


def _resolve_system(rhs, p: EpiParams | None):
    if rhs == "full":
        return (lambda t, x, u: model.rhs_full(t, x, u, p)), "full", True
    if rhs == "normalized":
        return (lambda t, x, u: model.rhs_norm(t, x, u, p)), "normalized", True
    if callable(rhs):
        return (lambda t, x, u: rhs(t, x, u, p)), "other", False
    raise ParameterError(f"unknown system {rhs!r}")


def integrate(
    rhs: SystemName | Callable,
    x0,
    policy: ControlPolicy | tuple,
    p: EpiParams | None,
    cfg: IntegratorConfig | None = None,
    t_f: float | None = None,
) -> Trajectory:
    """Integrate one system and sample it on a uniform grid over ``[0, t_f]``.

    ``rhs`` is ``"full"``, ``"normalized"`` or a callable ``rhs(t, x, u, p)``.
    ``policy`` may be a plain control triple, held constant. Model states are
    clamped at zero when sampled; internal states are not.
    """
    cfg = cfg or IntegratorConfig()
    if not isinstance(policy, ControlPolicy):
        policy = ControlPolicy.constant(tuple(policy), t_f if t_f is not None else 84.0)
    if t_f is None:
        t_f = policy.t_f
    if not t_f > 0:
        raise ParameterError("t_f must be > 0")
    f, scale, clamp = _resolve_system(rhs, p)
    times = np.linspace(0.0, t_f, cfg.n_points(t_f))
    samples, _ = integrate_batch(f, x0, policy.breakpoints, policy.values, cfg, t_f, times)
    states = samples[:, 0, :]
    if clamp:
        states = np.maximum(states, 0.0)
    return Trajectory(times, states, scale)


def sample_at(traj: Trajectory, t: float) -> np.ndarray:
    """Linear interpolation of the stored samples."""
    times = traj.times
    span = 1e-12 * max(1.0, abs(times[-1]))
    if not (times[0] - span <= t <= times[-1] + span):
        raise ParameterError(f"t={t!r} outside [{times[0]}, {times[-1]}]")
    t = min(max(t, times[0]), times[-1])
    j = int(np.searchsorted(times, t, side="right")) - 1
    if j >= times.size - 1:
        return traj.states[-1].copy()
    w = (t - times[j]) / (times[j + 1] - times[j])
    return (1 - w) * traj.states[j] + w * traj.states[j + 1]
