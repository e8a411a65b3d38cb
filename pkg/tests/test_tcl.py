import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclgrid.tcl import (
    PopulationSpec,
    Scheme,
    TclError,
    TclParams,
    TclState,
    check_period_distinctness,
    conventional_jump_target,
    deterministic_jump_target,
    duty_cycle,
    next_thermostat_event,
    on_off_durations,
    period,
    randomized_rates,
    sample_initial_states,
    sample_population,
    switch_decision,
    temp_flow,
    with_threshold,
)

REFERENCE = TclParams(
    d_bar=0.01, t_lo=3.0, t_hi=6.0, k=5e-4, cop=3000.0, t_amb=20.0,
    omega1=0.1, eps=0.005,
)


def bisect_stroke(p: TclParams, sigma: int, lo: float, hi: float) -> float:
    """Stroke duration by bisection on the exact flow, no logarithms."""
    start = p.t_hi if sigma else p.t_lo
    threshold = p.t_lo if sigma else p.t_hi
    t_a, t_b = 0.0, hi
    # ensure the bracket contains the crossing
    while (temp_flow(p, start, sigma, t_b) - threshold) * (start - threshold) > 0:
        t_b *= 2.0
    for _ in range(200):
        mid = 0.5 * (t_a + t_b)
        reached = (temp_flow(p, start, sigma, mid) - threshold) * (start - threshold)
        if reached > 0:
            t_a = mid
        else:
            t_b = mid
    return 0.5 * (t_a + t_b)


class TestClosedForms:
    def test_reference_strokes(self):
        pi_on, pi_off = on_off_durations(REFERENCE)
        # ON target is 20 - 30 = -10: ln((6+10)/(3+10))/k ; OFF: ln(17/14)/k
        assert pi_on == pytest.approx(math.log(16 / 13) / 5e-4, rel=1e-14)
        assert pi_off == pytest.approx(math.log(17 / 14) / 5e-4, rel=1e-14)
        assert duty_cycle(REFERENCE) == pytest.approx(pi_on / (pi_on + pi_off))

    def test_strokes_match_bisection(self):
        pi_on, pi_off = on_off_durations(REFERENCE)
        assert pi_on == pytest.approx(bisect_stroke(REFERENCE, 1, 0, 1e4), rel=1e-9)
        assert pi_off == pytest.approx(bisect_stroke(REFERENCE, 0, 0, 1e4), rel=1e-9)

    def test_flow_lands_exactly_on_threshold(self):
        pi_on, pi_off = on_off_durations(REFERENCE)
        assert temp_flow(REFERENCE, REFERENCE.t_hi, 1, pi_on) == pytest.approx(
            REFERENCE.t_lo, abs=1e-12
        )
        assert temp_flow(REFERENCE, REFERENCE.t_lo, 0, pi_off) == pytest.approx(
            REFERENCE.t_hi, abs=1e-12
        )

    @settings(max_examples=50, deadline=None)
    @given(
        temp=st.floats(3.0, 6.0),
        sigma=st.sampled_from([0, 1]),
        dt1=st.floats(0.0, 2000.0),
        dt2=st.floats(0.0, 2000.0),
    )
    def test_flow_semigroup(self, temp, sigma, dt1, dt2):
        direct = temp_flow(REFERENCE, temp, sigma, dt1 + dt2)
        chained = temp_flow(REFERENCE, temp_flow(REFERENCE, temp, sigma, dt1), sigma, dt2)
        assert direct == pytest.approx(chained, rel=1e-12, abs=1e-12)

    def test_next_event_inverts_flow(self):
        for temp, sigma in [(5.2, 1), (4.1, 0), (6.0, 1), (3.0, 0)]:
            dt = next_thermostat_event(REFERENCE, temp, sigma)
            landed = temp_flow(REFERENCE, temp, sigma, dt)
            threshold = REFERENCE.t_lo if sigma else REFERENCE.t_hi
            assert landed == pytest.approx(threshold, abs=1e-12)

    def test_next_event_zero_at_or_past_threshold(self):
        assert next_thermostat_event(REFERENCE, 3.0, 1) == 0.0
        assert next_thermostat_event(REFERENCE, 2.5, 1) == 0.0
        assert next_thermostat_event(REFERENCE, 6.0, 0) == 0.0
        assert next_thermostat_event(REFERENCE, 6.5, 0) == 0.0


class TestValidation:
    def test_heating_configuration_rejected(self):
        with pytest.raises(TclError):
            TclParams(
                d_bar=0.01, t_lo=3.0, t_hi=6.0, k=5e-4, cop=3000.0, t_amb=5.0,
                omega1=0.1, eps=0.005,
            )

    def test_weak_cooling_rejected(self):
        # ON target above t_lo: ON stroke would never finish
        with pytest.raises(TclError):
            TclParams(
                d_bar=0.01, t_lo=3.0, t_hi=6.0, k=5e-4, cop=1500.0, t_amb=20.0,
                omega1=0.1, eps=0.005,
            )

    def test_eps_wider_than_half_band_rejected(self):
        with pytest.raises(TclError):
            TclParams(
                d_bar=0.01, t_lo=3.0, t_hi=6.0, k=5e-4, cop=3000.0, t_amb=20.0,
                omega1=0.1, eps=1.6,
            )

    def test_state_sigma_validated(self):
        with pytest.raises(TclError):
            TclState(temperature=4.0, sigma=2)

    def test_scheme_kind_validated(self):
        with pytest.raises(TclError):
            Scheme("thermostatic")


class TestSwitchingLogic:
    def test_thermostat_limits_dominate_frequency(self):
        p = REFERENCE
        # at the upper threshold the load turns ON even under high frequency
        assert deterministic_jump_target(p, p.t_hi, 0, omega=-0.5) == 1
        # at the lower threshold it turns OFF even under low frequency
        assert deterministic_jump_target(p, p.t_lo, 1, omega=0.5) == 0

    def test_frequency_branches(self):
        p = REFERENCE
        mid = 4.5
        assert deterministic_jump_target(p, mid, 0, omega=p.omega1) == 1
        assert deterministic_jump_target(p, mid, 1, omega=-p.omega1) == 0
        # below-threshold deviation leaves the state alone
        assert deterministic_jump_target(p, mid, 0, omega=p.omega1 / 2) == 0
        assert deterministic_jump_target(p, mid, 1, omega=-p.omega1 / 2) == 1

    def test_eps_guard_blocks_frequency_switch_near_thresholds(self):
        p = REFERENCE
        just_above_lo = p.t_lo + p.eps / 2
        just_below_hi = p.t_hi - p.eps / 2
        assert deterministic_jump_target(p, just_above_lo, 0, omega=0.5) == 0
        assert deterministic_jump_target(p, just_below_hi, 1, omega=-0.5) == 1

    def test_reduces_to_conventional_at_zero_frequency(self):
        p = REFERENCE
        for temp in np.linspace(2.5, 6.5, 41):
            for sigma in (0, 1):
                assert deterministic_jump_target(p, temp, sigma, 0.0) == (
                    conventional_jump_target(p, temp, sigma)
                )

    def test_randomized_rates_baseline_and_feedback(self):
        p = REFERENCE
        pi_on, pi_off = on_off_durations(p)
        r_on, r_off = randomized_rates(p, omega=0.0, k_pi=5.0, v_des=1.0)
        assert r_on == pytest.approx(1.0 / pi_off)
        assert r_off == pytest.approx(1.0 / pi_on)
        # under-frequency shuts the ON-rate down and boosts the OFF-rate
        r_on2, r_off2 = randomized_rates(p, omega=-p.omega1, k_pi=5.0, v_des=1.0)
        assert r_on2 == 0.0 or r_on2 < r_on
        assert r_off2 > r_off

    def test_randomized_rates_clamped(self):
        r_on, r_off = randomized_rates(REFERENCE, omega=10.0, k_pi=50.0, v_des=1.0)
        assert 0.0 <= r_on <= 1.0 and 0.0 <= r_off <= 1.0

    def test_switch_decision_randomized_needs_rng(self):
        with pytest.raises(TclError):
            switch_decision(
                REFERENCE, TclState(4.5, 0), 0.0, Scheme.randomized(), rng=None, dt=1.0
            )

    def test_switch_decision_randomized_hard_limits(self):
        rng = np.random.default_rng(0)
        out = switch_decision(
            REFERENCE, TclState(REFERENCE.t_hi, 0), 0.0, Scheme.randomized(), rng, dt=1.0
        )
        assert out == 1


class TestPopulationSampling:
    def test_deterministic_in_seed(self):
        spec = PopulationSpec(n_loads=20, gamma=0.1, seed=42)
        assert sample_population(spec) == sample_population(spec)

    def test_equal_magnitudes_and_valid_params(self):
        spec = PopulationSpec(n_loads=50, gamma=0.25, seed=3)
        pop = sample_population(spec)
        assert len(pop) == 50
        assert all(p.d_bar == pytest.approx(0.005) for p in pop)
        # every sampled load satisfies the invariants by construction
        assert all(p.target_on < p.t_lo < p.t_hi < p.t_amb for p in pop)

    def test_different_seeds_differ(self):
        a = sample_population(PopulationSpec(5, 0.1, seed=1))
        b = sample_population(PopulationSpec(5, 0.1, seed=2))
        assert a != b

    def test_infeasible_range_box_rejected(self):
        spec = PopulationSpec(
            n_loads=5, gamma=0.1, seed=1,
            param_ranges={"cop_scale": (1.0, 2.0)},
        )
        with pytest.raises(TclError):
            sample_population(spec)

    def test_initial_states_within_band(self):
        pop = sample_population(PopulationSpec(100, 0.5, seed=9))
        temps, sigmas = sample_initial_states(pop, seed=9)
        for p, temp, sig in zip(pop, temps, sigmas):
            assert p.t_lo <= temp <= p.t_hi
            assert sig in (0, 1)

    def test_period_distinctness_on_sampled_population(self):
        pop = sample_population(PopulationSpec(40, 0.2, seed=5))
        report = check_period_distinctness(pop)
        assert report.ok

    def test_distinctness_flags_identical_periods(self):
        p = REFERENCE
        report = check_period_distinctness([p, p])
        assert not report.ok
        (i, j, rho, frac) = report.flagged[0]
        assert (i, j) == (0, 1)
        assert rho == pytest.approx(1.0)
        assert frac == 1

    def test_with_threshold(self):
        q = with_threshold(REFERENCE, 0.2)
        assert q.omega1 == 0.2
        assert q.t_lo == REFERENCE.t_lo
        assert period(q) == period(REFERENCE)
