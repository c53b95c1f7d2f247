"""Optimal vector control by direct single shooting.

The controls ``(c_A, c_m, alpha)`` are piecewise constant on ``n_intervals``
equal pieces of ``[0, t_f]``. For a given policy the normalized model is
integrated together with the running cost

    z' = gamma_D i_h^2 + gamma_S c_m^2 + gamma_L c_A^2 + gamma_E (1 - alpha)^2,

and ``z(t_f)`` is the objective. Gradients come from finite differences of
the shooting map; all perturbed policies are integrated as one batch so they
share a step sequence. The box-constrained problem is solved with a
projected BFGS method (Bertsekas-style active set with an Armijo search along
the projection arc).
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from . import model
from .errors import ParameterError
from .integrator import IntegratorConfig, Trajectory, integrate, integrate_batch
from .model import EpiParams, NormState
from .policy import ControlBounds, ControlPolicy

log = logging.getLogger(__name__)

Channel = Literal["adulticide", "larvicide", "mechanical"]

# channel -> (column in the control vector, weight field, no-control value)
CHANNELS = {
    "larvicide": (0, "gamma_L", 0.0),
    "adulticide": (1, "gamma_S", 0.0),
    "mechanical": (2, "gamma_E", 1.0),
}


@dataclass(frozen=True)
class CostWeights:
    """Weights of infection, adulticide, larvicide and mechanical-control costs."""

    gamma_D: float = 0.25
    gamma_S: float = 0.25
    gamma_L: float = 0.25
    gamma_E: float = 0.25

    def __post_init__(self):
        w = self.as_array()
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ParameterError(f"weights must be finite and >= 0, got {tuple(w)}")
        if not np.any(w > 0):
            raise ParameterError("at least one weight must be > 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma_D, self.gamma_S, self.gamma_L, self.gamma_E], dtype=float)


_CASES = {
    "A": CostWeights(0.25, 0.25, 0.25, 0.25),
    "B": CostWeights(0.55, 0.15, 0.15, 0.15),
    "C": CostWeights(0.10, 0.30, 0.30, 0.30),
}


def scenario_weights(case: str) -> CostWeights:
    """Weights of the three bioeconomic cases A, B and C."""
    try:
        return _CASES[case.upper()]
    except KeyError:
        raise ParameterError(f"unknown weight case {case!r}; expected A, B or C") from None


@dataclass(frozen=True)
class OcpProblem:
    params: EpiParams = field(default_factory=model.default_params)
    weights: CostWeights = field(default_factory=CostWeights)
    t_f: float = 84.0
    n_intervals: int | None = None  # None: one interval per day
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    x0: NormState = model.NORM_INITIAL
    bounds: ControlBounds = field(default_factory=ControlBounds)

    def __post_init__(self):
        if not self.t_f > 0:
            raise ParameterError("t_f must be > 0")
        if self.n_intervals is None:
            object.__setattr__(self, "n_intervals", max(1, int(round(self.t_f))))
        if self.n_intervals < 1:
            raise ParameterError("n_intervals must be >= 1")

    @property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, self.t_f, self.n_intervals + 1)

    def policy(self, values) -> ControlPolicy:
        return ControlPolicy(self.breakpoints, np.asarray(values, dtype=float).reshape(-1, 3), self.bounds)

    def constant_policy(self, u) -> ControlPolicy:
        u = np.clip(np.asarray(u, dtype=float), self.bounds.lower, self.bounds.upper)
        return self.policy(np.tile(u, (self.n_intervals, 1)))

    def initial_policy(self) -> ControlPolicy:
        """Mid-box guess ``(0.5, 0.5, 0.5)``, pinned channels at their fixed value."""
        return self.constant_policy((0.5, 0.5, 0.5))

    def no_control_policy(self) -> ControlPolicy:
        return self.constant_policy(model.NO_CONTROL)


@dataclass
class OcpSolution:
    policy: ControlPolicy
    objective: float
    trajectory: Trajectory
    iterations: int
    projected_gradient_norm: float
    converged: bool
    message: str = ""
    history: list[float] = field(default_factory=list)

    @property
    def peak_infected(self) -> float:
        return float(self.trajectory.column("i_h").max())

    @property
    def peak_time(self) -> float:
        return float(self.trajectory.times[np.argmax(self.trajectory.column("i_h"))])


def _augmented_rhs(prob: OcpProblem):
    p = prob.params
    gD, gS, gL, gE = prob.weights.as_array()

    def f(t, x, u):
        dx = model.rhs_norm(t, x[:, :6], u, p)
        i_h = x[:, 1]
        dz = gD * i_h**2 + gS * u[:, 1] ** 2 + gL * u[:, 0] ** 2 + gE * (1.0 - u[:, 2]) ** 2
        return np.concatenate([dx, dz[:, None]], axis=1)

    return f


def batch_objectives(prob: OcpProblem, values) -> np.ndarray:
    """Objective of each policy in ``values`` (shape ``(b, N, 3)``), one shared integration."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None]
    b = values.shape[0]
    x0 = np.tile(np.append(np.asarray(prob.x0, dtype=float), 0.0), (b, 1))
    _, xf = integrate_batch(
        _augmented_rhs(prob), x0, prob.breakpoints, values, prob.integrator, prob.t_f
    )
    return xf[:, 6]


def evaluate_cost(policy: ControlPolicy, prob: OcpProblem) -> tuple[float, Trajectory]:
    """Objective of ``policy`` and the normalized state trajectory it produces."""
    _check_policy(policy, prob)
    objective = float(batch_objectives(prob, policy.values)[0])
    traj = integrate("normalized", prob.x0, policy, prob.params, prob.integrator, prob.t_f)
    return objective, traj


def _check_policy(policy: ControlPolicy, prob: OcpProblem):
    if policy.n_intervals != prob.n_intervals or not np.allclose(policy.breakpoints, prob.breakpoints):
        raise ParameterError("policy breakpoints do not match the problem discretization")
    if not prob.bounds.contains(policy.values, atol=1e-12):
        raise ParameterError("policy violates the problem's control bounds")


def _fd_gradient_vector(prob: OcpProblem, v: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Finite-difference gradient; returns ``(f(v), grad)``."""
    n = v.size
    h = 1e-6 * np.maximum(1.0, np.abs(v))
    members = [v]
    # per coordinate: (coefficient of f(v), [(member index, coefficient)]), all over h
    stencils: list[tuple[float, list[tuple[int, float]]]] = []
    for i in range(n):
        if hi[i] - lo[i] < 2 * h[i]:
            stencils.append((0.0, []))
            continue
        if v[i] - h[i] >= lo[i] and v[i] + h[i] <= hi[i]:
            c0, taps = 0.0, ((1.0, 0.5), (-1.0, -0.5))
        elif v[i] - h[i] < lo[i]:
            c0, taps = -1.5, ((1.0, 2.0), (2.0, -0.5))
        else:
            c0, taps = 1.5, ((-1.0, -2.0), (-2.0, 0.5))
        st = []
        for off, c in taps:
            w = v.copy()
            w[i] += off * h[i]
            st.append((len(members), c))
            members.append(w)
        stencils.append((c0, st))
    J = batch_objectives(prob, np.stack(members).reshape(len(members), -1, 3))
    grad = np.array([(c0 * J[0] + sum(c * J[k] for k, c in st)) for c0, st in stencils]) / h
    return float(J[0]), grad


def fd_gradient(policy: ControlPolicy, prob: OcpProblem) -> np.ndarray:
    """Gradient of the objective with respect to every interval value.

    Central differences with step ``1e-6 * max(1, |v|)``; second-order
    one-sided differences where a central stencil would leave the box.
    Channels pinned by the bounds get a zero entry. The result has shape
    ``(N, 3)``.
    """
    _check_policy(policy, prob)
    lo, hi = policy.vector_bounds()
    _, g = _fd_gradient_vector(prob, policy.as_vector(), lo, hi)
    return g.reshape(-1, 3)


def projected_gradient(v, g, lo, hi) -> np.ndarray:
    return v - np.clip(v - g, lo, hi)


def _solve_vector(prob, v0, lo, hi, max_iter, gtol, ftol, stall_window, sigma=1e-4, max_backtracks=40):
    n = v0.size
    v = np.clip(v0, lo, hi)
    pinned = hi - lo <= 0
    f, g = _fd_gradient_vector(prob, v, lo, hi)
    H = np.eye(n)
    fresh_H = True
    history = [f]
    converged, message = False, "maximum iterations reached"
    it = 0
    pg_norm = float(np.max(np.abs(projected_gradient(v, g, lo, hi)), initial=0.0))
    while it < max_iter:
        if pg_norm <= gtol:
            converged, message = True, "projected gradient below tolerance"
            break
        if len(history) > stall_window and history[-stall_window - 1] - history[-1] <= ftol:
            converged, message = True, "objective stalled"
            break

        eps = min(1e-3, pg_norm)
        active = pinned | ((v - lo <= eps) & (g > 0)) | ((hi - v <= eps) & (g < 0))
        free = ~active

        accepted = False
        for attempt in range(2):
            d = -g.copy()
            if not fresh_H and np.any(free):
                d[free] = -H[np.ix_(free, free)] @ g[free]
                if g[free] @ d[free] >= 0:
                    d[free] = -g[free]
            d[pinned] = 0.0
            t = 1.0
            for _ in range(max_backtracks):
                v_new = np.clip(v + t * d, lo, hi)
                step = v_new - v
                decrease = g @ step
                if decrease < 0:
                    f_new = float(batch_objectives(prob, v_new.reshape(-1, 3))[0])
                    if f_new <= f + sigma * decrease:
                        accepted = True
                        break
                t *= 0.5
            if accepted or fresh_H:
                break
            # quasi-Newton direction failed; retry along the projected gradient
            H, fresh_H = np.eye(n), True
        if not accepted:
            message = "line search failed to find a descent step"
            break

        f_new, g_new = _fd_gradient_vector(prob, v_new, lo, hi)
        s, y = v_new - v, g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if fresh_H:
                H = np.eye(n) * (sy / (y @ y))
                fresh_H = False
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
        v, f, g = v_new, f_new, g_new
        history.append(f)
        it += 1
        pg_norm = float(np.max(np.abs(projected_gradient(v, g, lo, hi)), initial=0.0))
        log.debug("iter %d  J=%.10g  |pg|=%.3e", it, f, pg_norm)
    else:
        if pg_norm <= gtol:
            converged, message = True, "projected gradient below tolerance"
    return v, f, it, pg_norm, converged, message, history


def solve(
    prob: OcpProblem,
    init: ControlPolicy | None = None,
    *,
    max_iter: int = 500,
    gtol: float = 1e-6,
    ftol: float = 1e-12,
    stall_window: int = 5,
) -> OcpSolution:
    """Minimize the cost functional over piecewise-constant controls.

    Accepted iterates never increase the objective, so the last iterate is
    also the best one. ``converged`` is False when the iteration cap is hit
    or no descent step can be found.
    """
    init = init or prob.initial_policy()
    _check_policy(init, prob)
    lo, hi = init.vector_bounds()
    v, f, it, pg, converged, message, history = _solve_vector(
        prob, init.as_vector(), lo, hi, max_iter, gtol, ftol, stall_window
    )
    policy = init.with_vector(v)
    traj = integrate("normalized", prob.x0, policy, prob.params, prob.integrator, prob.t_f)
    return OcpSolution(policy, f, traj, it, pg, converged, message, history)


def random_policies(prob: OcpProblem, count: int, seed: int) -> list[ControlPolicy]:
    """Uniform random feasible piecewise-constant policies."""
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(prob.bounds.lower), np.asarray(prob.bounds.upper)
    return [prob.policy(rng.uniform(lo, hi, size=(prob.n_intervals, 3))) for _ in range(count)]


def thread_count() -> int:
    env = os.environ.get("VCTRL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"VCTRL_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def multistart(prob: OcpProblem, n_random: int = 4, seed: int = 0, include_default: bool = True, **options):
    """Solve from the default guess plus ``n_random`` seeded random starts.

    Returns ``(best, all_solutions)``; ties go to the earliest start so the
    result does not depend on thread scheduling.
    """
    starts = [prob.initial_policy()] if include_default else []
    starts += random_policies(prob, n_random, seed)
    if not starts:
        raise ParameterError("multistart needs at least one start")
    workers = min(thread_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(lambda s: solve(prob, s, **options), starts))
    else:
        sols = [solve(prob, s, **options) for s in starts]
    best = min(range(len(sols)), key=lambda i: (sols[i].objective, i))
    return sols[best], sols


def single_control_problem(channel: Channel, prob: OcpProblem) -> OcpProblem:
    """Problem with one active control and the infection cost, both weighted 0.5.

    The other two channels are pinned at their no-control values.
    """
    if channel not in CHANNELS:
        raise ParameterError(f"unknown channel {channel!r}; expected one of {sorted(CHANNELS)}")
    weights = {"gamma_D": 0.5, "gamma_S": 0.0, "gamma_L": 0.0, "gamma_E": 0.0}
    col, wname, _ = CHANNELS[channel]
    weights[wname] = 0.5
    bounds = prob.bounds
    for other, (ocol, _, off_value) in CHANNELS.items():
        if other != channel:
            bounds = bounds.frozen(ocol, off_value)
    return replace(prob, weights=CostWeights(**weights), bounds=bounds)
