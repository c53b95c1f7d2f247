import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vctrl.errors import ParameterError
from vctrl.integrator import IntegratorConfig, integrate
from vctrl.model import (
    NORM_INITIAL,
    ControlTriple,
    EpiParams,
    FullState,
    NormState,
    default_params,
    denormalize,
    normalize,
    rhs_full,
    rhs_norm,
)

P = default_params()

fractions = st.floats(0.0, 1.0, allow_nan=False)
controls = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.01, 1.0))


def test_default_params_values():
    p = default_params()
    assert p.N_h == 480000
    assert p.phi == 6
    assert (p.B, p.beta_mh, p.beta_hm) == (0.8, 0.375, 0.375)
    assert p.mu_h == pytest.approx(1 / 25915, rel=1e-15)
    assert p.mu_h == pytest.approx(3.8588e-5, rel=1e-4)
    assert p.eta_h == pytest.approx(1 / 3)
    assert (p.mu_m, p.mu_A, p.eta_A, p.m, p.k) == (0.1, 0.25, 0.08, 3, 3)


@pytest.mark.parametrize("field,value", [("B", 0.0), ("mu_h", -1.0), ("beta_mh", 1.5), ("k", float("nan"))])
def test_params_reject_invalid(field, value):
    with pytest.raises(ParameterError):
        P.replace(**{field: value})


def test_control_triple_validation():
    ControlTriple(0, 0, 1).validate()
    with pytest.raises(ParameterError):
        ControlTriple(0, 0, 0).validate()
    with pytest.raises(ParameterError):
        ControlTriple(1.2, 0, 1).validate()


def test_rhs_full_disease_free_human_block():
    x = FullState(P.N_h, 0, 0, 0, 0, 0)
    d = rhs_full(0, x, (0, 0, 1), P)
    assert d[0] == 0 and d[1] == 0


def test_rhs_full_infection_inflow():
    # dI_h/dt = B*beta_mh*(I_m/N_h)*S_h with I_m = m*N_h and I_h = 0
    x = FullState(P.N_h, 0, 0, 0, 0, P.m * P.N_h)
    d = rhs_full(0, x, (0, 0, 1), P)
    assert d[1] == pytest.approx(432000.0, rel=1e-12)


def test_rhs_norm_initial_point():
    d = rhs_norm(0, NORM_INITIAL, (0, 0, 1), P)
    assert d[1] == pytest.approx(-(P.eta_h + P.mu_h) * 1e-4, rel=1e-12)


def test_rhs_rejects_nonpositive_alpha():
    with pytest.raises(ParameterError):
        rhs_norm(0, NORM_INITIAL, (0, 0, 0), P)
    with pytest.raises(ParameterError):
        rhs_full(0, denormalize(NORM_INITIAL, P), (0, 0, -0.1), P)


@settings(max_examples=200, deadline=None)
@given(st.tuples(fractions, fractions), st.tuples(fractions, fractions, fractions), controls)
def test_human_population_conserved(human, vector, u):
    a, b = sorted(human)
    x = np.array([a, b - a, 1 - b, *vector])
    dn = rhs_norm(0, x, u, P)
    assert abs(dn[:3].sum()) <= 1e-15
    dfull = rhs_full(0, denormalize(x, P), u, P)
    assert abs(dfull[:3].sum()) <= 1e-9 * P.N_h * P.mu_h + 1e-6


@settings(max_examples=200, deadline=None)
@given(st.tuples(fractions, fractions), st.tuples(fractions, fractions, fractions), controls)
def test_rhs_scale_consistency(human, vector, u):
    a, b = sorted(human)
    xn = np.array([a, b - a, 1 - b, *vector])
    expected = normalize(rhs_full(0, denormalize(xn, P), u, P), P)
    got = rhs_norm(0, xn, u, P)
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-13)


def test_boundary_forward_invariance():
    rng = np.random.default_rng(3)
    for _ in range(2000):
        x = rng.uniform(0, 1, 6)
        zero = rng.integers(0, 6)
        x[zero] = 0.0
        u = (rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.01, 1))
        assert rhs_norm(0, x, u, P)[zero] >= 0
        assert rhs_full(0, denormalize(x, P), u, P)[zero] >= 0


def test_normalize_examples():
    np.testing.assert_array_equal(normalize(FullState(P.N_h, 0, 0, 0, 0, 0), P), [1, 0, 0, 0, 0, 0])
    full = denormalize(NormState(0, 0, 0, 1, 0, 0), P)
    assert full[3] == 1_440_000


def test_normalize_round_trip():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 2e6, size=(100, 6))
    np.testing.assert_allclose(denormalize(normalize(x, P), P), x, rtol=1e-12)


def test_vectorized_rhs_matches_rowwise():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, size=(7, 6))
    u = np.column_stack([rng.uniform(0, 1, 7), rng.uniform(0, 1, 7), rng.uniform(0.1, 1, 7)])
    batch = rhs_norm(0, x, u, P)
    for i in range(7):
        np.testing.assert_array_equal(batch[i], rhs_norm(0, x[i], u[i], P))


@pytest.mark.parametrize("alpha", [1.0, 0.6, 0.2])
def test_aquatic_stays_below_alpha(alpha):
    x0 = NormState(0.9999, 0.0001, 0, alpha, 1, 0)
    traj = integrate("normalized", x0, (0.1, 0.05, alpha), P, IntegratorConfig(), 84)
    assert traj.column("a_m").max() <= alpha * (1 + 1e-9)


def test_params_are_immutable():
    with pytest.raises(Exception):
        P.N_h = 1
