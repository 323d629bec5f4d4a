"""Scale-function machinery: closed forms, defining relations, inverses.

Derived expectations are computed by independent routes (finite differences
for the index relation, quadrature for the exponential representation,
antiderivatives for the measure integrals) before being asserted.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from critlab import (
    DomainError,
    Family,
    ModelParams,
    ParameterError,
    SolverError,
    invariant_measure_M,
    make_scale_function,
    level_at_time,
    time_to_level,
    perturbation_ratio,
    remainder_rho,
    solve_normalizer,
    survival_q,
)

CONST = make_scale_function(ModelParams(0.5, 1.0, Family.CONSTANT))
COUPLED = make_scale_function(ModelParams(0.5, 1.0, Family.COUPLED_DRIFT))
BINARY = make_scale_function(ModelParams(1.0, 1.0, Family.BINARY_SPLIT))
Y_GRID = np.logspace(-8, 0, 25)


def test_params_validation():
    with pytest.raises(ParameterError):
        ModelParams(1.2, 1.0, Family.CONSTANT)
    with pytest.raises(ParameterError):
        ModelParams(0.0, 1.0, Family.COUPLED_DRIFT)
    with pytest.raises(ParameterError):
        ModelParams(0.5, -1.0, Family.CONSTANT)
    assert ModelParams(0.3, 1.0, Family.BINARY_SPLIT).nu == 1.0


@pytest.mark.parametrize("sf", [CONST, COUPLED, BINARY], ids=lambda s: s.family.value)
def test_decay_rate_is_rescaled_sv(sf):
    for y in Y_GRID:
        lhs = sf.decay_rate(y)
        rhs = y**sf.nu * sf.sv(1.0 / y)
        assert abs(lhs - rhs) <= 1e-14 * lhs


@pytest.mark.parametrize("sf", [CONST, COUPLED, BINARY], ids=lambda s: s.family.value)
def test_value_at_one_is_a0(sf):
    assert sf.decay_rate(1.0) == pytest.approx(sf.a0, rel=1e-15)
    assert sf.sv(1.0) == pytest.approx(sf.a0, rel=1e-15)


@pytest.mark.parametrize("sf", [CONST, COUPLED], ids=lambda s: s.family.value)
def test_index_relation_by_finite_difference(sf):
    # y * D'(y)/D(y) = nu + drift(y), central difference with h = 1e-6 * y
    for y in np.logspace(-6, -0.1, 12):
        h = y * 1e-6
        d = (sf.decay_rate(y + h) - sf.decay_rate(y - h)) / (2 * h)
        assert abs(y * d / sf.decay_rate(y) - sf.nu - sf.index_drift(y)) <= 1e-6


def test_coupled_closed_form_solves_bernoulli_ode():
    # independent check of the closed form: substitute into the index ODE
    # rewritten as y * D' - (nu + D) * D = 0
    for y in [0.9, 0.5, 0.2, 0.05, 1e-3]:
        h = y * 1e-7
        d = (COUPLED.decay_rate(y + h) - COUPLED.decay_rate(y - h)) / (2 * h)
        D = COUPLED.decay_rate(y)
        assert abs(y * d - (0.5 + D) * D) <= 1e-8 * max(D, 1e-12)


def test_drift_vanishes_at_zero():
    drifts = [abs(COUPLED.index_drift(y)) for y in np.logspace(-1, -8, 8)]
    assert all(a > b for a, b in zip(drifts, drifts[1:]))
    assert drifts[-1] < 1e-3


@pytest.mark.parametrize("sf", [CONST, COUPLED], ids=lambda s: s.family.value)
def test_exponential_representation_of_sv(sf):
    # sv(x) = a0 * exp(int_1^x elasticity(u)/u du), checked by quadrature
    for x in (10.0, 1e3, 1e6):
        val, _ = quad(lambda v: float(sf.sv_elasticity(math.exp(v))), 0.0, math.log(x),
                      epsabs=1e-13, epsrel=1e-11, limit=200)
        assert sf.a0 * math.exp(val) == pytest.approx(float(sf.sv(x)), rel=1e-8)


def test_elasticity_bounded_by_remainder():
    # |elasticity(x)| <= C |rho(x)| with lam = 2; C frozen from the dev grid
    C = 2.0
    for x in np.logspace(1, 6, 11):
        assert abs(float(COUPLED.sv_elasticity(x))) <= C * abs(remainder_rho(COUPLED, 2.0, x))


def test_remainder_rho_constant_family_is_zero():
    for x in (1.0, 7.0, 1e5):
        assert remainder_rho(CONST, 3.0, x) == 0.0


def test_remainder_rho_coupled_bound_and_decay():
    # |rho(x)| <= C * sv(x)/x^nu on [10, 1e6]; C frozen from the dev grid
    C = 0.65
    xs = np.logspace(1, 6, 11)
    vals = [abs(remainder_rho(COUPLED, 2.0, x)) for x in xs]
    for x, v in zip(xs, vals):
        assert v <= C * float(COUPLED.sv(x)) / x**0.5
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_remainder_rho_domain():
    with pytest.raises(DomainError):
        remainder_rho(CONST, 2.0, 0.5)
    with pytest.raises(DomainError):
        remainder_rho(CONST, 0.0, 2.0)


def test_normalizer_constant_family_exact():
    assert solve_normalizer(CONST, 17.0).value == pytest.approx(1.0, rel=1e-15)
    sf4 = make_scale_function(ModelParams(0.5, 4.0, Family.CONSTANT))
    assert solve_normalizer(sf4, 3.0).value == pytest.approx(1.0 / 16.0, rel=1e-15)


def test_normalizer_coupled_satisfies_defining_equation():
    for t in (10.0, 1e3, 1e6, 1e8):
        N = solve_normalizer(COUPLED, t).value
        resid = N**0.5 * float(COUPLED.sv((0.5 * t) ** 2 / N)) - 1.0
        assert abs(resid) <= 1e-12


def test_normalizer_errors():
    with pytest.raises(DomainError):
        solve_normalizer(COUPLED, 0.0)
    with pytest.raises(SolverError):
        solve_normalizer(COUPLED, 0.5)  # below 1/(nu*a0)


def test_invariant_measure_at_zero():
    for sf in (CONST, COUPLED, BINARY):
        assert invariant_measure_M(sf, 0.0) == 0.0


def test_invariant_measure_constant_closed_form():
    # antiderivative x^nu/nu for constant sv gives ((1-s)^-nu - 1)/(nu a0)
    assert invariant_measure_M(CONST, 0.75) == pytest.approx(2.0, rel=1e-10)
    for s in (0.1, 0.5, 0.9, 0.99):
        expect = ((1.0 - s) ** -0.5 - 1.0) / 0.5
        assert invariant_measure_M(CONST, s) == pytest.approx(expect, rel=1e-10)


def test_invariant_measure_coupled_closed_form():
    # (nu + a0)((1-s)^-nu - 1)/(nu^2 a0) + log(1-s)/nu, derived by splitting
    # 1/f into binomial terms and integrating
    for s in (0.1, 0.5, 0.9, 0.99):
        expect = 1.5 * ((1.0 - s) ** -0.5 - 1.0) / 0.25 + math.log1p(-s) / 0.5
        assert invariant_measure_M(COUPLED, s) == pytest.approx(expect, rel=1e-10)
        assert invariant_measure_M(COUPLED, s) == pytest.approx(
            COUPLED.invariant_measure_closed(s), rel=1e-10
        )


def test_invariant_measure_increasing():
    grid = np.linspace(0.0, 0.99, 12)
    vals = [invariant_measure_M(COUPLED, s) for s in grid]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        invariant_measure_M(COUPLED, 1.0)


def test_time_change_pair_inverse_identity():
    assert time_to_level(CONST, 1.0) == 0.0
    for x in (2.0, 10.0, 100.0):
        y = time_to_level(CONST, x)
        assert level_at_time(CONST, y) == pytest.approx(x, rel=1e-9)
    with pytest.raises(DomainError):
        level_at_time(CONST, -0.1)
    with pytest.raises(DomainError):
        time_to_level(CONST, 0.5)


def test_time_change_gives_survival_probability():
    # 1/U(t) equals the closed-form survival probability for constant sv
    for t in (1.0, 10.0, 1e3):
        q = 1.0 / level_at_time(CONST, t)
        assert q == pytest.approx((1.0 + t / 2.0) ** -2, rel=1e-8)


def test_time_change_monotone():
    xs = (1.5, 4.0, 30.0, 500.0)
    vs = [time_to_level(COUPLED, x) for x in xs]
    assert all(a < b for a, b in zip(vs, vs[1:]))
    us = [level_at_time(COUPLED, v) for v in vs]
    assert all(a < b for a, b in zip(us, us[1:]))


def test_perturbation_ratio_zero_cases():
    assert perturbation_ratio(COUPLED, 0.3, lambda y: 0.0) == 0.0
    for y in (0.5, 1e-3, 1e-6):
        assert perturbation_ratio(CONST, y, lambda y: y / 2.0) == 0.0


def test_perturbation_ratio_bounded():
    # sup over the dev grid measured at 0.0503; bounded well below 0.1
    vals = [abs(perturbation_ratio(COUPLED, 10.0**-k, lambda y: y / 2.0)) for k in range(1, 9)]
    assert max(vals) < 0.1
    with pytest.raises(DomainError):
        perturbation_ratio(COUPLED, 0.5, lambda y: 1.5)
    with pytest.raises(DomainError):
        perturbation_ratio(COUPLED, 1.5, lambda y: 0.0)


@given(
    nu=st.floats(0.05, 0.95),
    a0=st.floats(0.05, 5.0),
    y=st.floats(1e-9, 1.0, exclude_min=True),
)
@settings(max_examples=60, deadline=None)
def test_decay_identity_property(nu, a0, y):
    for fam in (Family.CONSTANT, Family.COUPLED_DRIFT):
        sf = make_scale_function(ModelParams(nu, a0, fam))
        lhs = sf.decay_rate(y)
        assert abs(lhs - y**nu * sf.sv(1.0 / y)) <= 1e-13 * max(lhs, 1e-300)


@given(t=st.floats(1.0, 1e6))
@settings(max_examples=30, deadline=None)
def test_survival_decreasing_property(t):
    assert survival_q(COUPLED, 1.02 * t) < survival_q(COUPLED, t) <= 1.0
