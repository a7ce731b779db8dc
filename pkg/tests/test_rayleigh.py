import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spfiber import formulas as fm
from spfiber.errors import ConfigurationError, DomainError, InvalidInputError
from spfiber.families import TrialFamily
from spfiber.inequalities import INEQUALITIES
from spfiber.radial import Integrals, RadialGrid, dilate, gaussian, integrals
from spfiber.rayleigh import (
    catto_sequence,
    estimate_kgn,
    minimize_rayleigh,
    rayleigh,
    threshold_map,
    thresholds,
)

FAMILY = TrialFamily()
SINGLE = TrialFamily("single-gaussian")


def test_rayleigh_unity():
    assert rayleigh(Integrals(1.0, 1.0, 1.0, 1.0, 4.0), 1.0, 1.0).value == pytest.approx(1.0)


def test_rayleigh_requires_unit_mass():
    with pytest.raises(InvalidInputError):
        rayleigh(Integrals(2.0, 1.0, 1.0, 1.0, 4.0), 1.0, 1.0)


def test_rayleigh_singular_at_three():
    with pytest.raises(DomainError):
        rayleigh(Integrals(1.0, 1.0, 1.0, 1.0, 3.0), 1.0, 1.0)
    with pytest.raises(DomainError):
        minimize_rayleigh(1.0, 1.0, 3.0)


@given(logs=st.lists(st.floats(-3.0, 3.0), min_size=5, max_size=5))
def test_eight_thirds_closed_form(logs):
    a, b, c, q, lam = np.exp(logs)
    general = fm.rayleigh_value(a, b, c, q, lam, fm.EIGHT_THIRDS)
    special = fm.rayleigh_value_eight_thirds(b, c, q, lam)
    assert general == pytest.approx(special, rel=1e-12)


@pytest.mark.parametrize("p", [2.4, fm.EIGHT_THIRDS, 2.9, 3.2, fm.TEN_THIRDS - 1e-6])
def test_rayleigh_dilation_invariance(p):
    u = gaussian(RadialGrid(), 1.0)
    base = rayleigh(integrals(u, p), 1.0, 1.0).value
    for t in (0.3, 2.0, 7.0):
        assert rayleigh(integrals(dilate(u, t), p), 1.0, 1.0).value == pytest.approx(base, rel=1e-6)


@given(seed=st.integers(0, 10_000), p=st.sampled_from([2.4, 2.9, 3.2, 3.3]), t=st.floats(0.5, 3.0))
def test_rayleigh_dilation_invariance_on_mixtures(seed, p, t):
    theta = FAMILY.sample(np.random.default_rng(seed), 1)[0]
    unit = FAMILY.reference(theta, p)[0]
    a = rayleigh(unit, 1.0, 1.0).value
    b = rayleigh(unit.dilated(t), 1.0, 1.0).value
    assert a == pytest.approx(b, rel=1e-12)


def test_rayleigh_is_a_power_of_the_lower_interpolation_ratio():
    # For p < 3 and unit mass, R_p equals that ratio to the power 1/(2(3 - p)).
    p = 2.5
    ineq = INEQUALITIES["hartree_lp_lower"]
    for seed in range(5):
        theta = FAMILY.sample(np.random.default_rng(seed), 1)[0]
        unit = FAMILY.reference(theta, p)[0]
        assert rayleigh(unit, 1.3, 0.7).value == pytest.approx(ineq.ratio(unit, 1.3, 0.7) ** (1.0 / (2.0 * (3.0 - p))), rel=1e-12)


def test_minimize_rayleigh_trace_and_floor():
    p = 2.5
    estimate = minimize_rayleigh(1.0, 1.0, p, FAMILY, budget=1500, seed=5)
    trace = np.asarray(estimate.optimizer_trace)
    assert np.all(trace > 0.0)
    assert np.all(np.diff(trace) <= 0.0)
    assert estimate.bound_direction == "upper"
    assert estimate.value == pytest.approx(trace[-1])
    # Sampling oracle: 1000 random members bound the infimum from above, so
    # the optimized estimate must not be worse than their minimum.
    samples = FAMILY.sample(np.random.default_rng(99), 1000)
    values = [rayleigh(FAMILY.reference(theta, p)[0], 1.0, 1.0).value for theta in samples]
    assert 0.0 < estimate.value <= min(values) * (1.0 + 1e-9)


def test_rayleigh_positive_above_three():
    estimate = minimize_rayleigh(1.0, 1.0, 3.2, FAMILY, budget=800, seed=1)
    assert estimate.value > 0.0
    assert all(v > 0.0 for v in estimate.optimizer_trace)


@pytest.mark.parametrize("p", [2.5, 3.2])
def test_larger_family_never_worse(p):
    small = minimize_rayleigh(1.0, 1.0, p, SINGLE, budget=300, seed=2)
    large = minimize_rayleigh(1.0, 1.0, p, FAMILY, budget=800, seed=2)
    assert large.value <= small.value * (1.0 + 1e-9)


def test_kgn_larger_family_never_worse():
    small = estimate_kgn(3.5, SINGLE, budget=300, seed=2)
    large = estimate_kgn(3.5, FAMILY, budget=800, seed=2)
    assert large.bound_direction == "lower"
    assert large.value >= small.value * (1.0 - 1e-9)


def test_gn_quotient_homogeneity():
    for seed in range(5):
        theta = FAMILY.sample(np.random.default_rng(seed), 1)[0]
        u = FAMILY.canonical(theta)
        p = 3.7
        i = integrals(u, p)
        base = fm.gn_quotient(i.mass, i.grad_sq, i.lp, p)
        for other in (integrals(2.5 * u, p), integrals(dilate(u, 0.6), p)):
            assert fm.gn_quotient(other.mass, other.grad_sq, other.lp, p) == pytest.approx(base, rel=1e-6)


def test_kgn_nonexistence_bound_at_ten_thirds():
    k = estimate_kgn(fm.TEN_THIRDS, FAMILY, budget=400, seed=0, lam=2.0)
    assert k.extras["nonexistence_bound"] == pytest.approx(5.0 / (3.0 * k.value * 2.0))


def test_p0_is_larger_root():
    roots = np.roots([-27.0, 146.0, -192.0])
    assert fm.p_zero() == pytest.approx(max(roots.real), abs=1e-12)
    assert fm.p_zero() == pytest.approx(3.149689, abs=1e-6)
    assert -27 * fm.p_zero() ** 2 + 146 * fm.p_zero() - 192 == pytest.approx(0.0, abs=1e-11)


def test_star_to_zero_prefactor_ratio():
    p = 3.2
    expected = 2**-0.5 * (4.0 / (3.0 * (p - 2.0))) ** (1.0 / (2.0 * (p - 3.0)))
    assert fm.star_prefactor(p) / fm.zero_prefactor(p) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.9202, abs=1e-3)


def test_lambda_threshold_ratio_is_family_independent():
    for family in (SINGLE, FAMILY):
        found = threshold_map(thresholds(1.0, 1.0, 3.0, family, budget=300, seed=4))
        assert found["lambda_star"] / found["lambda0_star"] == pytest.approx(2.0 / math.sqrt(4.5), abs=1e-12)


def test_thresholds_by_regime():
    names = lambda p: {e.name for e in thresholds(1.0, 1.0, p, FAMILY, budget=200, seed=0)}  # noqa: E731
    assert names(2.5) == {"inf_tilde_r", "K_GN", "p0"}
    assert names(3.2) == {"inf_tilde_r", "r_star", "r0_star", "K_GN", "p0"}
    assert names(4.0) == {"inf_bar_r", "K_GN", "p0"}
    assert names(3.0) == {"lambda_star", "lambda0_star", "K_GN", "p0"}


def test_thresholds_deterministic():
    a = [e.to_dict() for e in thresholds(1.0, 1.0, 3.2, FAMILY, budget=300, seed=7)]
    b = [e.to_dict() for e in thresholds(1.0, 1.0, 3.2, FAMILY, budget=300, seed=7)]
    assert a == b


def test_threshold_estimates_are_prefactor_multiples():
    found = threshold_map(thresholds(1.0, 1.0, 3.2, FAMILY, budget=300, seed=3))
    assert found["r_star"] / found["r0_star"] == pytest.approx(fm.star_prefactor(3.2) / fm.zero_prefactor(3.2), rel=1e-12)
    assert found["r_star"] < found["r0_star"]


def test_catto_sequence_laws():
    report = catto_sequence(2.5, r=1.0, n_max=8)
    assert report.n_values == list(range(1, 9))
    assert report.lp_spread() < 0.05
    assert report.grad_growth_spread() < 0.05
    scaled = report.scaled_hartree()
    assert max(scaled) <= 1.1 * scaled[0]
    # The quotient grows without bound along the sequence for p < 3.
    assert np.all(np.diff(report.rayleigh_values(1.0, 1.0)) > 0.0)


def test_catto_rejects_overlap():
    with pytest.raises(ConfigurationError):
        catto_sequence(2.5, n_max=4, separation_growth=lambda n: 0.5)
    with pytest.raises(ConfigurationError):
        catto_sequence(2.5, n_max=1)
