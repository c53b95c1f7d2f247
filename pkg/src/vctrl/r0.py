"""Basic reproduction number of the controlled SIR+ASI model.

The closed form is

    R0 = sqrt(alpha k B^2 beta_hm beta_mh M / (phi (eta_h + mu_h) (c_m + mu_m)^2))

with the vector viability factor

    M = eta_A phi - (eta_A + mu_A + c_A)(mu_m + c_m).

``r0_ngm`` recomputes the same quantity from the next-generation matrix at the
disease-free equilibrium and serves as an independent check of the formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import ALPHA_MIN, CONTROL_NAMES, ControlTriple, EpiParams, default_params

PAIRS = (("c_m", "c_A"), ("c_m", "alpha"), ("c_A", "alpha"))


def mosquito_factor_M(u: ControlTriple, p: EpiParams) -> float:
    """Vector viability factor; nonpositive means the mosquito population dies out."""
    c_A, c_m, _ = u
    return p.eta_A * p.phi - (p.eta_A + p.mu_A + c_A) * (p.mu_m + c_m)


def r0_closed_form(u: ControlTriple, p: EpiParams) -> float:
    c_A, c_m, alpha = u
    M = mosquito_factor_M(u, p)
    if M <= 0:
        return 0.0
    num = alpha * p.k * p.B**2 * p.beta_hm * p.beta_mh * M
    den = p.phi * (p.eta_h + p.mu_h) * (c_m + p.mu_m) ** 2
    return float(np.sqrt(num / den))


def disease_free_equilibrium(u: ControlTriple, p: EpiParams) -> np.ndarray:
    """Normalized DFE ``(s_h, i_h, r_h, a_m, s_m, i_m)``."""
    c_A, c_m, alpha = u
    a_m = alpha * (1.0 - (p.eta_A + p.mu_A + c_A) * (p.mu_m + c_m) / (p.phi * p.eta_A))
    a_m = max(a_m, 0.0)
    s_m = (p.k / p.m) * p.eta_A * a_m / (p.mu_m + c_m)
    return np.array([1.0, 0.0, 0.0, a_m, s_m, 0.0])


def next_generation_matrices(u: ControlTriple, p: EpiParams) -> tuple[np.ndarray, np.ndarray]:
    """New-infection matrix F and transition matrix V for ``(i_h, i_m)``."""
    c_A, c_m, alpha = u
    s_h, _, _, _, s_m, _ = disease_free_equilibrium(u, p)
    F = np.array(
        [
            [0.0, p.B * p.beta_mh * p.m * s_h],
            [p.B * p.beta_hm * s_m, 0.0],
        ]
    )
    V = np.diag([p.eta_h + p.mu_h, p.mu_m + c_m])
    return F, V


def r0_ngm(u: ControlTriple, p: EpiParams) -> float:
    """Spectral radius of F V^-1 at the disease-free equilibrium."""
    F, V = next_generation_matrices(u, p)
    try:
        K = F @ np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise ParameterError("transition matrix is singular") from exc
    return float(np.max(np.abs(np.linalg.eigvals(K))))


def _control_axis(name: str, resolution: int, alpha_min: float) -> np.ndarray:
    lo = alpha_min if name == "alpha" else 0.0
    return np.linspace(lo, 1.0, resolution)


def _third(pair) -> str:
    (rest,) = [c for c in CONTROL_NAMES if c not in pair]
    return rest


def _triple(values: dict) -> ControlTriple:
    return ControlTriple(values["c_A"], values["c_m"], values["alpha"])


def _check_pair(pair):
    pair = tuple(pair)
    if pair not in PAIRS:
        raise ParameterError(f"unsupported control pair {pair!r}; choose from {PAIRS}")
    return pair


def default_fixed_value(pair) -> float:
    """No-control value of the control left out of ``pair``."""
    return 1.0 if _third(_check_pair(pair)) == "alpha" else 0.0


@dataclass(frozen=True)
class R0Grid:
    """R0 on a rectangular grid; ``values[i, j]`` is at ``(x[j], y[i])``."""

    x_name: str
    x: np.ndarray
    y_name: str
    y: np.ndarray
    fixed_name: str
    fixed_value: float
    values: np.ndarray


def sweep(
    pair=("c_m", "c_A"),
    fixed_value: float | None = None,
    resolution: int = 101,
    p: EpiParams | None = None,
    alpha_min: float = ALPHA_MIN,
) -> R0Grid:
    """Evaluate the closed form over the unit box of two controls."""
    pair = _check_pair(pair)
    if resolution < 2:
        raise ParameterError("resolution must be >= 2")
    p = p or default_params()
    fixed_name = _third(pair)
    if fixed_value is None:
        fixed_value = default_fixed_value(pair)
    lo = alpha_min if fixed_name == "alpha" else 0.0
    if not lo <= fixed_value <= 1.0:
        raise ParameterError(f"{fixed_name}={fixed_value!r} outside its box")

    xs = _control_axis(pair[0], resolution, alpha_min)
    ys = _control_axis(pair[1], resolution, alpha_min)
    values = np.empty((ys.size, xs.size))
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            u = _triple({pair[0]: xv, pair[1]: yv, fixed_name: fixed_value})
            values[i, j] = r0_closed_form(u, p)
    return R0Grid(pair[0], xs, pair[1], ys, fixed_name, float(fixed_value), values)


def threshold_curve(
    pair=("c_m", "c_A"),
    fixed_value: float | None = None,
    resolution: int = 101,
    p: EpiParams | None = None,
    alpha_min: float = ALPHA_MIN,
    tol: float = 1e-10,
) -> list[tuple[float, float]]:
    """Points where R0 = 1.

    The second control of ``pair`` is sampled on the grid and, for each value
    ``x``, the first control is bisected for R0 = 1 giving ``y``. When R0 stays
    on one side of 1 over the whole box, ``y`` is NaN.
    """
    pair = _check_pair(pair)
    p = p or default_params()
    fixed_name = _third(pair)
    if fixed_value is None:
        fixed_value = default_fixed_value(pair)
    solve_name, drive_name = pair

    def r0_at(solve_val, drive_val):
        u = _triple({solve_name: solve_val, drive_name: drive_val, fixed_name: fixed_value})
        return r0_closed_form(u, p)

    points = []
    for xv in _control_axis(drive_name, resolution, alpha_min):
        lo, hi = 0.0, 1.0
        f_lo, f_hi = r0_at(lo, xv) - 1.0, r0_at(hi, xv) - 1.0
        if f_lo < 0 or f_hi > 0:
            points.append((float(xv), float("nan")))
            continue
        # R0 is non-increasing in c_m and c_A
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if r0_at(mid, xv) > 1.0:
                lo = mid
            else:
                hi = mid
        points.append((float(xv), 0.5 * (lo + hi)))
    return points
