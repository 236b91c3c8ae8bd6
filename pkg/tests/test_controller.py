import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batchode import (
    ControllerState,
    PidCoefficients,
    Tolerances,
    adapt_step,
    error_norm,
    initial_step,
    integral_controller,
    pid_controller,
)
from batchode.controller import NORM_FLOOR, PID_PRESETS


def scalar_norm_oracle(err, y0, y1, atol, rtol):
    """Per-component loop implementation of the mixed-tolerance RMS norm."""
    out = []
    for i in range(err.shape[0]):
        acc = 0.0
        for j in range(err.shape[1]):
            scale = atol + rtol * max(abs(y0[i, j]), abs(y1[i, j]))
            acc += (err[i, j] / scale) ** 2
        out.append(np.sqrt(acc / err.shape[1]))
    return np.array(out)


class TestTolerances:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Tolerances(atol=-1.0, rtol=1e-6)

    def test_rejects_both_zero(self):
        with pytest.raises(ValueError):
            Tolerances(atol=0.0, rtol=0.0)


class TestPidCoefficients:
    def test_rejects_bad_safety(self):
        with pytest.raises(ValueError):
            PidCoefficients(safety=0.0)

    def test_rejects_bad_clamps(self):
        with pytest.raises(ValueError):
            PidCoefficients(factor_min=1.5)

    def test_presets_are_available(self):
        for name in ("PI42", "PI33", "PI34", "H211", "H312"):
            assert name in PID_PRESETS
            pid_controller(name)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            pid_controller("nope")


class TestErrorNorm:
    def test_zero_error(self):
        err = np.zeros((3, 2))
        y = np.ones((3, 2))
        norm = error_norm(err, y, y, Tolerances(1e-6, 1e-6))
        assert np.array_equal(norm, np.zeros(3))

    def test_scale_definition(self):
        # e = atol per component with rtol = 0 sits exactly at norm 1
        atol = 1e-5
        err = np.full((2, 4), atol)
        y = np.random.default_rng(0).normal(size=(2, 4))
        norm = error_norm(err, y, y, Tolerances(atol, 0.0))
        assert norm == pytest.approx([1.0, 1.0], rel=1e-14)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        err = rng.normal(scale=1e-6, size=(6, 3))
        y0 = rng.normal(size=(6, 3))
        y1 = y0 + rng.normal(scale=1e-4, size=(6, 3))
        norm = error_norm(err, y0, y1, Tolerances(1e-5, 1e-5))
        oracle = scalar_norm_oracle(err, y0, y1, 1e-5, 1e-5)
        assert norm == pytest.approx(oracle, rel=1e-14)

    def test_nonfinite_yields_inf(self):
        err = np.array([[1e-9, np.nan], [1e-9, 1e-9]])
        y = np.ones((2, 2))
        norm = error_norm(err, y, y, Tolerances(1e-6, 1e-6))
        assert norm[0] == np.inf
        assert np.isfinite(norm[1])

    def test_per_instance_tolerances(self):
        err = np.full((2, 1), 1e-5)
        y = np.zeros((2, 1))
        tol = Tolerances(atol=np.array([1e-5, 1e-3]), rtol=np.array([0.0, 0.0]))
        norm = error_norm(err, y, y, tol)
        assert norm[0] == pytest.approx(1.0)
        assert norm[1] == pytest.approx(1e-2)

    @given(
        data=st.lists(
            st.floats(-10, 10, allow_nan=False), min_size=12, max_size=12
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_oracle_property(self, data):
        arr = np.array(data).reshape(3, 4)
        err = arr * 1e-6
        norm = error_norm(err, arr, arr + 0.5, Tolerances(1e-5, 1e-5))
        oracle = scalar_norm_oracle(err, arr, arr + 0.5, 1e-5, 1e-5)
        assert norm == pytest.approx(oracle, rel=1e-14, abs=1e-300)


class TestInitialStep:
    def test_degenerate_dynamics(self):
        f = lambda t, y: np.zeros_like(y)
        dt, f0 = initial_step(f, np.zeros(1), np.ones((1, 1)), 5, Tolerances(1e-5, 1e-5))
        assert dt[0] > 0
        assert np.isfinite(dt[0])

    def test_exponential_magnitude(self):
        f = lambda t, y: y
        dt, _ = initial_step(f, np.zeros(1), np.ones((1, 1)), 5, Tolerances(1e-5, 1e-5))
        assert 1e-4 < dt[0] < 1e-1
        # hand-evaluated heuristic: d0 = d1 = 1/2e-5, h0 = 0.01,
        # d2 = (0.01/2e-5)/0.01, h1 = (0.01/d2)**(1/6)
        d1 = 1.0 / 2e-5
        h0 = 0.01
        d2 = (h0 / 2e-5) / h0
        expected = min(100 * h0, (0.01 / max(d1, d2)) ** (1 / 6))
        assert dt[0] == pytest.approx(expected, rel=1e-12)

    def test_batch_rows_match_single(self):
        f = lambda t, y: -2.0 * y
        y0 = np.array([[1.0], [10.0]])
        dt, _ = initial_step(f, np.zeros(2), y0, 5, Tolerances(1e-5, 1e-5))
        assert dt[0] != dt[1]
        for i in range(2):
            dti, _ = initial_step(
                f, np.zeros(1), y0[i : i + 1], 5, Tolerances(1e-5, 1e-5)
            )
            assert dt[i] == dti[0]

    def test_direction_sign(self):
        f = lambda t, y: y
        dt, _ = initial_step(
            f, np.zeros(1), np.ones((1, 1)), 5, Tolerances(1e-5, 1e-5), direction=-1.0
        )
        assert dt[0] < 0

    def test_nonfinite_dynamics_flagged(self):
        f = lambda t, y: np.full_like(y, np.inf)
        dt, f0 = initial_step(f, np.zeros(1), np.ones((1, 1)), 5, Tolerances(1e-5, 1e-5))
        assert np.isnan(dt[0])


class TestAdaptStep:
    def test_integral_reduction_at_norm_one(self):
        state = ControllerState.initial(np.array([0.1]))
        accept, dt_next = adapt_step(
            state, np.ones(1), 4, integral_controller(safety=0.9)
        )
        assert accept[0]
        assert dt_next[0] == pytest.approx(0.09, rel=1e-15)

    def test_zero_norm_gives_max_growth(self):
        coeffs = integral_controller()
        state = ControllerState.initial(np.array([0.1]))
        accept, dt_next = adapt_step(state, np.zeros(1), 4, coeffs)
        assert accept[0]
        assert dt_next[0] == pytest.approx(0.1 * coeffs.factor_max)

    def test_rejection_scaling_closed_form(self):
        # norm 4 with the I controller at k = 5: factor = 0.9 * 4**(-0.2)
        state = ControllerState.initial(np.array([0.1]))
        accept, dt_next = adapt_step(state, np.array([4.0]), 4, integral_controller())
        assert not accept[0]
        assert dt_next[0] == pytest.approx(0.1 * 0.9 * 4 ** (-0.2), rel=1e-15)

    def test_history_shifts_on_attempt(self):
        state = ControllerState.initial(np.array([0.1]))
        adapt_step(state, np.array([4.0]), 4, integral_controller())
        assert state.norm_prev[0] == 4.0
        assert state.norm_prev2[0] == 1.0

    def test_history_toggle_skips_rejections(self):
        coeffs = PidCoefficients(update_history_on_reject=False)
        state = ControllerState.initial(np.array([0.1]))
        adapt_step(state, np.array([4.0]), 4, coeffs)
        assert state.norm_prev[0] == 1.0

    def test_infinite_norm_shrinks_to_clamp(self):
        coeffs = integral_controller()
        state = ControllerState.initial(np.array([0.1]))
        accept, dt_next = adapt_step(state, np.array([np.inf]), 4, coeffs)
        assert not accept[0]
        assert dt_next[0] == pytest.approx(0.1 * coeffs.factor_min)

    @given(norm=st.floats(1e-12, 1e12), prev=st.floats(1e-8, 1e8))
    @settings(max_examples=200, deadline=None)
    def test_factor_stays_clamped(self, norm, prev):
        coeffs = pid_controller("H312")
        state = ControllerState(
            norm_prev=np.array([prev]),
            norm_prev2=np.array([prev]),
            dt=np.array([0.1]),
        )
        _, dt_next = adapt_step(state, np.array([norm]), 4, coeffs)
        ratio = dt_next[0] / 0.1
        assert coeffs.factor_min <= ratio <= coeffs.factor_max

    @given(
        norms=st.tuples(st.floats(1e-9, 1e3), st.floats(1e-9, 1e3)),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_current_norm(self, norms):
        lo, hi = sorted(norms)
        coeffs = pid_controller("PI42")
        factors = []
        for norm in (lo, hi):
            state = ControllerState.initial(np.array([0.1]))
            _, dt_next = adapt_step(state, np.array([norm]), 4, coeffs)
            factors.append(dt_next[0])
        assert factors[1] <= factors[0]

    def test_pid_100_reduces_to_integral_exactly(self):
        # the dt/accept trajectory matches a standalone I controller; the
        # oracle exponentiates through numpy so both sides use the same
        # libm pow (python's float ** can differ by one ulp)
        rng = np.random.default_rng(3)
        norms = rng.uniform(1e-8, 50.0, size=40)
        coeffs = PidCoefficients(beta1=1.0, beta2=0.0, beta3=0.0)
        state = ControllerState.initial(np.array([0.05]))
        dt = 0.05
        k = 5
        for norm in norms:
            accept, dt_next = adapt_step(state, np.array([norm]), 4, coeffs)
            pow_term = (np.array([max(norm, NORM_FLOOR)]) ** (-1.0 / k))[0]
            factor = coeffs.safety * pow_term
            factor = min(max(factor, coeffs.factor_min), coeffs.factor_max)
            assert accept[0] == (norm <= 1.0)
            assert dt_next[0] == dt * factor
            dt = dt * factor
