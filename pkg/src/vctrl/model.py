"""SIR+ASI dengue model with larvicide, adulticide and mechanical control.

Humans are split into susceptible/infected/recovered (S_h, I_h, R_h) and
female mosquitoes into aquatic/susceptible/infected (A_m, S_m, I_m). The
three controls act on the vector only:

    c_A    larvicide, extra mortality of the aquatic phase
    c_m    adulticide, extra mortality of adult mosquitoes
    alpha  mechanical control, scales the larval carrying capacity alpha*k*N_h

Two equivalent right-hand sides are provided: ``rhs_full`` on head counts and
``rhs_norm`` on the dimensionless fractions

    s_h = S_h/N_h, i_h = I_h/N_h, r_h = R_h/N_h,
    a_m = A_m/(k N_h), s_m = S_m/(m N_h), i_m = I_m/(m N_h).

Both right-hand sides are vectorized over leading axes: ``x`` has shape
``(..., 6)`` and ``u`` shape ``(..., 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from .errors import ParameterError

STATE_NAMES = ("s_h", "i_h", "r_h", "a_m", "s_m", "i_m")
CONTROL_NAMES = ("c_A", "c_m", "alpha")

ALPHA_MIN = 0.01


@dataclass(frozen=True)
class EpiParams:
    """Biological and demographic rates (time unit: days)."""

    N_h: float  # total human population
    B: float  # bites per mosquito per day
    beta_mh: float  # transmission probability mosquito -> human, per bite
    beta_hm: float  # transmission probability human -> mosquito, per bite
    mu_h: float  # human death rate (1/lifespan)
    eta_h: float  # human recovery rate (1/viremic period)
    mu_m: float  # adult mosquito death rate
    phi: float  # eggs per mosquito per day
    mu_A: float  # aquatic-phase mortality
    eta_A: float  # maturation rate aquatic -> adult
    m: float  # female mosquitoes per human
    k: float  # larvae per human

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v <= 0:
                raise ParameterError(f"{f.name} must be finite and > 0, got {v!r}")
        for name in ("beta_mh", "beta_hm"):
            if getattr(self, name) > 1:
                raise ParameterError(f"{name} must lie in [0, 1], got {getattr(self, name)!r}")

    def replace(self, **changes) -> EpiParams:
        return replace(self, **changes)


def default_params() -> EpiParams:
    """Cape Verde 2009 outbreak values."""
    return EpiParams(
        N_h=480000.0,
        B=0.8,
        beta_mh=0.375,
        beta_hm=0.375,
        mu_h=1.0 / (71 * 365),
        eta_h=1.0 / 3,
        mu_m=1.0 / 10,
        phi=6.0,
        mu_A=1.0 / 4,
        eta_A=0.08,
        m=3.0,
        k=3.0,
    )


class ControlTriple(NamedTuple):
    c_A: float = 0.0
    c_m: float = 0.0
    alpha: float = 1.0

    def validate(self) -> ControlTriple:
        if not 0.0 <= self.c_A <= 1.0:
            raise ParameterError(f"c_A must lie in [0, 1], got {self.c_A!r}")
        if not 0.0 <= self.c_m <= 1.0:
            raise ParameterError(f"c_m must lie in [0, 1], got {self.c_m!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        return self


NO_CONTROL = ControlTriple(0.0, 0.0, 1.0)


class FullState(NamedTuple):
    S_h: float
    I_h: float
    R_h: float
    A_m: float
    S_m: float
    I_m: float


class NormState(NamedTuple):
    s_h: float
    i_h: float
    r_h: float
    a_m: float
    s_m: float
    i_m: float


NORM_INITIAL = NormState(0.9999, 0.0001, 0.0, 1.0, 1.0, 0.0)


def _split_controls(u):
    u = np.asarray(u, dtype=float)
    c_A, c_m, alpha = u[..., 0], u[..., 1], u[..., 2]
    if np.any(alpha <= 0):
        raise ParameterError("alpha must be > 0 (it divides the larval carrying capacity)")
    return c_A, c_m, alpha


def rhs_full(t, x, u, p: EpiParams) -> np.ndarray:
    """Time derivative of the head-count system."""
    x = np.asarray(x, dtype=float)
    c_A, c_m, alpha = _split_controls(u)
    S_h, I_h, R_h, A_m, S_m, I_m = (x[..., i] for i in range(6))

    force_h = p.B * p.beta_mh * I_m / p.N_h
    force_m = p.B * p.beta_hm * I_h / p.N_h
    return np.stack(
        [
            p.mu_h * p.N_h - (force_h + p.mu_h) * S_h,
            force_h * S_h - (p.eta_h + p.mu_h) * I_h,
            p.eta_h * I_h - p.mu_h * R_h,
            p.phi * (1.0 - A_m / (alpha * p.k * p.N_h)) * (S_m + I_m)
            - (p.eta_A + p.mu_A + c_A) * A_m,
            p.eta_A * A_m - (force_m + p.mu_m + c_m) * S_m,
            force_m * S_m - (p.mu_m + c_m) * I_m,
        ],
        axis=-1,
    )


def rhs_norm(t, x, u, p: EpiParams) -> np.ndarray:
    """Time derivative of the normalized system."""
    x = np.asarray(x, dtype=float)
    c_A, c_m, alpha = _split_controls(u)
    s_h, i_h, r_h, a_m, s_m, i_m = (x[..., i] for i in range(6))

    force_h = p.B * p.beta_mh * p.m * i_m
    force_m = p.B * p.beta_hm * i_h
    return np.stack(
        [
            p.mu_h - (force_h + p.mu_h) * s_h,
            force_h * s_h - (p.eta_h + p.mu_h) * i_h,
            p.eta_h * i_h - p.mu_h * r_h,
            p.phi * (p.m / p.k) * (1.0 - a_m / alpha) * (s_m + i_m)
            - (p.eta_A + p.mu_A + c_A) * a_m,
            p.eta_A * (p.k / p.m) * a_m - (force_m + p.mu_m + c_m) * s_m,
            force_m * s_m - (p.mu_m + c_m) * i_m,
        ],
        axis=-1,
    )


def scale_vector(p: EpiParams) -> np.ndarray:
    """Head counts per unit of each normalized state component."""
    return np.array([p.N_h, p.N_h, p.N_h, p.k * p.N_h, p.m * p.N_h, p.m * p.N_h])


def normalize(x, p: EpiParams) -> np.ndarray:
    """Map head counts to fractions. Works on ``(..., 6)`` arrays."""
    return np.asarray(x, dtype=float) / scale_vector(p)


def denormalize(x, p: EpiParams) -> np.ndarray:
    """Map fractions back to head counts."""
    return np.asarray(x, dtype=float) * scale_vector(p)
