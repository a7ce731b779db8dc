import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from spfiber import formulas as fm
from spfiber.errors import DomainError, InvalidInputError, NumericalFailure, PreconditionError
from spfiber.families import TrialFamily
from spfiber.fiber import (
    CASES_BY_REGIME,
    FiberCoefficients,
    PohozaevInput,
    classify_fiber,
    extremal_pair,
    fiber_eval,
    nehari_membership,
    pohozaev_residual,
    regime,
    solve_closed_system,
)
from spfiber.radial import Integrals, RadialFunction, integrals

T_MINUS_P4 = (2.0 + math.sqrt(7.0)) / 3.0
TAXONOMY_EXPONENTS = [2.3, fm.EIGHT_THIRDS, 2.9, 3.2, fm.TEN_THIRDS, 4.0, 5.0]
FAMILY = TrialFamily()


def random_coefficients(rng: np.random.Generator, p: float) -> FiberCoefficients:
    a, b, c, r, q, lam = np.exp(rng.uniform(-3.0, 3.0, 6))
    return FiberCoefficients(a, b, c, r, q, lam, p)


def unit_integrals(seed: int, p: float) -> Integrals:
    theta = FAMILY.sample(np.random.default_rng(seed), 1)[0]
    return FAMILY.reference(theta, p)[0]


def derivative_residual(fc: FiberCoefficients, t: float) -> float:
    """``|phi'(t)|`` relative to the size of its positive terms ``t r A + r^2 q B / 4``.

    Equals ``|phi'(t)| / (r A)`` up to O(1) for t near 1; for the very large
    critical times that occur near p = 3 no double-precision t does better.
    """
    return abs(fiber_eval(fc, t).first_deriv) / (t * fc.kinetic + fc.hartree_term)


def assert_valid_classification(fc: FiberCoefficients) -> None:
    result = classify_fiber(fc)
    assert result.case_tag in CASES_BY_REGIME[regime(fc.p)]
    ts = [cp.t for cp in result.critical_points]
    assert ts == sorted(ts)
    for cp in result.critical_points:
        values = fiber_eval(fc, cp.t)
        assert derivative_residual(fc, cp.t) < 1e-9
        if cp.type == "plus":
            assert values.second_deriv > 0
        elif cp.type == "minus":
            assert values.second_deriv < 0


def test_fiber_eval_hand_value():
    fc = FiberCoefficients(1.0, 1.0, 1.0, p=4.0)
    assert fiber_eval(fc, 1.0).value == pytest.approx(0.5, abs=1e-15)


def test_fiber_eval_matches_formula_and_derivatives():
    fc = FiberCoefficients(1.3, 0.7, 2.1, r=1.7, q=0.9, lam=1.4, p=3.4)
    t, h = 0.83, 1e-5
    v = fiber_eval(fc, t)
    p, r = fc.p, fc.r
    direct = t**2 * r * fc.A / 2 + t * r**2 * fc.q * fc.B / 4 - t ** (1.5 * p - 3) * r ** (p / 2) * fc.lam * fc.C / p
    assert v.value == pytest.approx(direct, rel=1e-14)
    assert v.first_deriv == pytest.approx((fiber_eval(fc, t + h).value - fiber_eval(fc, t - h).value) / (2 * h), rel=1e-8)
    assert v.second_deriv == pytest.approx(
        (fiber_eval(fc, t + h).first_deriv - fiber_eval(fc, t - h).first_deriv) / (2 * h), rel=1e-8
    )


def test_fiber_eval_vectorized():
    fc = FiberCoefficients(1.0, 1.0, 1.0, p=4.0)
    ts = np.array([0.5, 1.0, 2.0])
    values = fiber_eval(fc, ts)
    assert values.value[1] == pytest.approx(0.5)
    assert values.first_deriv.shape == (3,)


def test_fiber_eval_linear_in_A():
    base = FiberCoefficients(1.0, 1.0, 1.0, p=4.0)
    doubled = FiberCoefficients(2.0, 1.0, 1.0, p=4.0)
    assert fiber_eval(doubled, 1.0).value - fiber_eval(base, 1.0).value == pytest.approx(0.5)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_fiber_eval_domain(t):
    with pytest.raises(DomainError):
        fiber_eval(FiberCoefficients(1.0, 1.0, 1.0), t)


def test_critical_point_p4_matches_quadratic_root():
    fc = FiberCoefficients(1.0, 1.0, 1.0, p=4.0)
    oracle = brentq(lambda t: 3 * t * t - 4 * t - 1, 1.0, 3.0, xtol=1e-15)
    result = classify_fiber(fc)
    assert result.case_tag == "V"
    assert [cp.type for cp in result.critical_points] == ["minus"]
    assert result.minus == pytest.approx(T_MINUS_P4, abs=1e-9)
    assert result.minus == pytest.approx(oracle, abs=1e-12)
    assert fiber_eval(fc, result.minus).second_deriv < 0


def test_eight_thirds_strictly_increasing_case():
    result = classify_fiber(FiberCoefficients(1.0, 4.0, 1.0, p=fm.EIGHT_THIRDS))
    assert result.case_tag == "II-2" and result.critical_points == ()


def test_eight_thirds_single_minimum():
    result = classify_fiber(FiberCoefficients(1.0, 0.1, 10.0, p=fm.EIGHT_THIRDS))
    assert result.case_tag == "II-1"
    assert [cp.type for cp in result.critical_points] == ["plus"]


def test_ten_thirds_cases():
    assert classify_fiber(FiberCoefficients(1.0, 1.0, 0.1, p=fm.TEN_THIRDS)).case_tag == "IV-2"
    strong = classify_fiber(FiberCoefficients(1.0, 1.0, 10.0, p=fm.TEN_THIRDS))
    assert strong.case_tag == "IV-1" and strong.critical_points[0].type == "minus"


def test_below_star_threshold_has_no_critical_point():
    unit = Integrals(1.0, 1.3, 0.8, 0.6, 3.2)
    r_star = extremal_pair(unit, 1.0, 1.0, "star").r_value
    below = classify_fiber(FiberCoefficients(1.3, 0.8, 0.6, 0.9 * r_star, 1.0, 1.0, 3.2))
    above = classify_fiber(FiberCoefficients(1.3, 0.8, 0.6, 1.1 * r_star, 1.0, 1.0, 3.2))
    assert below.case_tag == "III-3" and below.critical_points == ()
    assert above.case_tag == "III-1"
    assert [cp.type for cp in above.critical_points] == ["minus", "plus"]


def test_inflection_case_at_star_threshold():
    unit = Integrals(1.0, 1.3, 0.8, 0.6, 3.2)
    pair = extremal_pair(unit, 1.0, 1.0, "star")
    result = classify_fiber(FiberCoefficients(1.3, 0.8, 0.6, pair.r_value, 1.0, 1.0, 3.2))
    assert result.case_tag == "III-2"
    assert result.critical_points[0].t == pytest.approx(pair.t_value, rel=1e-6)


@pytest.mark.parametrize("p", TAXONOMY_EXPONENTS)
def test_taxonomy_on_random_coefficients(p):
    rng = np.random.default_rng(int(1000 * p))
    for _ in range(200):
        assert_valid_classification(random_coefficients(rng, p))


@given(
    p=st.sampled_from(TAXONOMY_EXPONENTS + [2.05, 3.0, 3.1, 5.9]),
    logs=st.lists(st.floats(-4.0, 4.0), min_size=6, max_size=6),
)
def test_taxonomy_property(p, logs):
    a, b, c, r, q, lam = np.exp(logs)
    assert_valid_classification(FiberCoefficients(a, b, c, r, q, lam, p))


@given(seed=st.integers(0, 5000), p=st.sampled_from([2.4, 2.9, 3.2, 4.5]), log_r=st.floats(-2.0, 3.0))
def test_membership_matches_fiber_type(seed, p, log_r):
    # r^{1/2} u^{t*} lies in N+ / N- exactly when t* is a fiber minimum / maximum.
    r = math.exp(log_r)
    theta = FAMILY.sample(np.random.default_rng(seed), 1)[0]
    unit = FAMILY.reference(theta, p)[0]
    fc = FiberCoefficients.from_integrals(unit, r, 1.0, 1.0)
    for cp in classify_fiber(fc).critical_points:
        member = FAMILY.member(theta, p, mass=r, t=cp.t)
        verdict = nehari_membership(member, r, 1.0, 1.0, p, tol_q=1e-5).verdict
        assert verdict == cp.type


def test_membership_not_member_for_tiny_lambda(unit_gaussian):
    assert nehari_membership(unit_gaussian, 1.0, 1.0, 1e-6, 3.0).verdict == "not_member"


def test_membership_rejects_wrong_mass(unit_gaussian):
    with pytest.raises(InvalidInputError):
        nehari_membership(unit_gaussian, 2.0, 1.0, 1.0, 3.0)


@pytest.mark.parametrize("p", [3.5, 4.0, 5.0])
def test_high_exponent_members_are_minus(p):
    for seed in range(5):
        theta = FAMILY.sample(np.random.default_rng(seed), 1)[0]
        unit = FAMILY.reference(theta, p)[0]
        t = classify_fiber(FiberCoefficients.from_integrals(unit, 2.0, 1.0, 1.0)).minus
        member = FAMILY.member(theta, p, mass=2.0, t=t)
        assert nehari_membership(member, 2.0, 1.0, 1.0, p, tol_q=1e-5).verdict == "minus"


def test_pohozaev_trivial_cases(grid, unit_gaussian):
    assert pohozaev_residual(RadialFunction.zeros(grid), PohozaevInput(1.0, 2.0, 3.0, 4.0), 3.0) == 0.0
    assert pohozaev_residual(unit_gaussian, PohozaevInput(0.0, 0.0, 0.0, 0.0), 3.0) == 0.0


def test_pohozaev_linear_combination(unit_gaussian):
    i = integrals(unit_gaussian, 4.0)
    value = pohozaev_residual(unit_gaussian, PohozaevInput(1.0, 2.0, 3.0, 4.0), 4.0)
    assert value == pytest.approx(0.5 * i.grad_sq + 3.0 * i.mass + 3.75 * i.hartree + 3.0 * i.lp, rel=1e-14)


def tilde_system(p: float, q: float = 1.0) -> tuple[float, ...]:
    """Coefficients of phi'(t) = 0 together with phi(t) - t phi'(t)/2 = 0, divided by r t."""
    return (1.0, q / 4.0, -1.5 * (p - 2.0) / p, 0.0, q / 2.0, -(p - 2.0) / p)


@pytest.mark.parametrize("p", [2.4, 2.9, 3.2, 3.5, 4.5])
def test_closed_system_reproduces_tilde(p):
    unit = Integrals(1.0, 1.2, 0.8, 1.1, p)
    r, t = solve_closed_system(*tilde_system(p), 1.2, 0.8, 1.1, p)
    pair = extremal_pair(unit, 1.0, 1.0, "tilde")
    assert r == pytest.approx(pair.r_value, rel=1e-9)
    assert t == pytest.approx(pair.t_value, rel=1e-9)


def test_closed_system_residuals():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = rng.uniform(2.1, 5.9)
        if abs(p - 3.0) < 1e-3:
            continue
        A, B, C = np.exp(rng.uniform(-2, 2, 3))
        a, b, c, d, e, f = tilde_system(p)
        r, t = solve_closed_system(a, b, c, d, e, f, A, B, C, p)
        for x, y, z in ((a, b, c), (d, e, f)):
            terms = (x * t * A, y * r * B, z * r ** (p / 2 - 1) * t ** (1.5 * p - 4) * C)
            assert abs(sum(terms)) <= 1e-9 * max(map(abs, terms))


def test_closed_system_degenerate_b():
    with pytest.raises(PreconditionError):
        solve_closed_system(1.0, 0.0, -1.0, 0.0, 1.0, -1.0, 1.0, 1.0, 1.0, 3.5)


def test_closed_system_rejects_p_three():
    with pytest.raises(DomainError):
        solve_closed_system(*tilde_system(3.0), 1.0, 1.0, 1.0, 3.0)


def test_tilde_at_eight_thirds():
    unit = unit_integrals(4, fm.EIGHT_THIRDS)
    rp = fm.rayleigh_value(unit.grad_sq, unit.hartree, unit.lp, 1.0, 1.0, fm.EIGHT_THIRDS)
    assert extremal_pair(unit, 1.0, 1.0, "tilde").r_value == pytest.approx(2**-1.5 * rp, rel=1e-12)


def test_tilde_prefactor_is_continuous_at_eight_thirds():
    for p in (fm.EIGHT_THIRDS - 1e-4, fm.EIGHT_THIRDS + 1e-4):
        assert abs(fm.tilde_prefactor(p) - 2**-1.5) < 1e-3


@pytest.mark.parametrize("p", [2.9, 3.2])
def test_zero_and_star_back_substitution(p):
    for seed in range(20):
        unit = unit_integrals(seed, p)
        fc_args = (unit.grad_sq, unit.hartree, unit.lp)
        zero = extremal_pair(unit, 1.0, 1.0, "zero")
        v = fiber_eval(FiberCoefficients(*fc_args, zero.r_value, 1.0, 1.0, p), zero.t_value)
        assert abs(v.value) < 1e-8 * zero.t_value**2 * zero.r_value * unit.grad_sq
        assert abs(v.first_deriv) < 1e-8 * zero.t_value * zero.r_value * unit.grad_sq
        star = extremal_pair(unit, 1.0, 1.0, "star")
        w = fiber_eval(FiberCoefficients(*fc_args, star.r_value, 1.0, 1.0, p), star.t_value)
        assert abs(w.first_deriv) < 1e-8 * star.t_value * star.r_value * unit.grad_sq
        assert abs(w.second_deriv) < 1e-8 * star.r_value * unit.grad_sq


def test_zero_threshold_is_where_fiber_minimum_vanishes():
    # Oracle: scan r for the sign change of min_t phi_r(t), independent of the closed form.
    unit = Integrals(1.0, 1.0, 1.0, 1.0, 3.2)

    def minimum_value(r: float) -> float:
        t = classify_fiber(FiberCoefficients(1.0, 1.0, 1.0, r, 1.0, 1.0, 3.2)).plus
        return fiber_eval(FiberCoefficients(1.0, 1.0, 1.0, r, 1.0, 1.0, 3.2), t).value

    root = brentq(minimum_value, 7.5, 20.0, xtol=1e-13)
    assert extremal_pair(unit, 1.0, 1.0, "zero").r_value == pytest.approx(root, rel=1e-9)


def test_bar_equals_star_threshold_at_ten_thirds():
    # At p = 10/3 the IV threshold is (r/2)A = r^{5/3} C * 3/10.
    unit = Integrals(1.0, 1.4, 0.7, 0.9, fm.TEN_THIRDS)
    iv_threshold = (5.0 * unit.grad_sq / (3.0 * unit.lp)) ** 1.5
    bar = extremal_pair(unit, 1.0, 1.0, "bar").r_value
    assert bar == pytest.approx(iv_threshold * (9.0 / 7.0) ** 1.5, rel=1e-9)


def test_variant_ranges():
    with pytest.raises(DomainError):
        extremal_pair(Integrals(1.0, 1.0, 1.0, 1.0, 3.0), 1.0, 1.0, "tilde")
    with pytest.raises(DomainError):
        extremal_pair(Integrals(1.0, 1.0, 1.0, 1.0, 3.2), 1.0, 1.0, "lambda_star")
    with pytest.raises(DomainError):
        extremal_pair(Integrals(1.0, 1.0, 1.0, 1.0, 3.2), 1.0, 1.0, "bar")
    with pytest.raises(DomainError):
        extremal_pair(Integrals(1.0, 1.0, 1.0, 1.0, 4.0), 1.0, 1.0, "zero")
    with pytest.raises(InvalidInputError):
        extremal_pair(Integrals(2.0, 1.0, 1.0, 1.0, 3.2), 1.0, 1.0, "tilde")


def test_lambda_variants_at_three():
    unit = Integrals(1.0, 1.2, 0.9, 0.8, 3.0)
    low = extremal_pair(unit, 1.0, 1.0, "lambda_star").lambda_value
    high = extremal_pair(unit, 1.0, 1.0, "lambda_zero").lambda_value
    assert low / high == pytest.approx(2.0 / math.sqrt(4.5), rel=1e-14)
    # lambda_zero is where the p = 3 fiber minimum value reaches zero.
    t = classify_fiber(FiberCoefficients(1.2, 0.9, 0.8, 1.0, 1.0, high, 3.0)).plus
    assert fiber_eval(FiberCoefficients(1.2, 0.9, 0.8, 1.0, 1.0, high, 3.0), t).value == pytest.approx(0.0, abs=1e-9)


def test_classification_dict_and_missing_root_failure():
    fc = FiberCoefficients(1.0, 1.0, 1.0, p=4.0)
    assert classify_fiber(fc).to_dict() == {"case": "V", "critical_points": [{"t": classify_fiber(fc).minus, "type": "minus"}]}
    with pytest.raises(NumericalFailure):
        from spfiber.fiber import _require_roots

        _require_roots(fc, [], 1, "V")
