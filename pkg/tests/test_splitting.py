import math

import numpy as np
import pytest

from monoport.elements import LinearResistor, MonotonicityDescriptor as MD, RCAdmittance, ShockleyDiode
from monoport.errors import DomainError
from monoport.resolvent import ElementOperator
from monoport.signal import PeriodicSignal, Sine, sample_waveform
from monoport.splitting import (
    ZERO,
    LinearOperator,
    Offset,
    SplittingConfig,
    dr_step_range,
    douglas_rachford,
    fb_step_range,
    forward_backward,
    nested_forward_backward,
    write_trace_csv,
)


def drive(tau=64):
    return sample_waveform(Sine(), tau)


class TestConfig:
    def test_defaults(self):
        cfg = SplittingConfig()
        assert cfg.algorithm == "nested" and cfg.step_sizes == (1.0,)

    def test_broadcast(self):
        assert SplittingConfig("nested", (0.5,)).steps_for(3) == (0.5, 0.5, 0.5)
        with pytest.raises(ValueError):
            SplittingConfig("nested", (0.5, 0.2)).steps_for(3)

    @pytest.mark.parametrize("kw", [
        dict(algorithm="admm"),
        dict(step_sizes=()),
        dict(step_sizes=(0.0,)),
        dict(step_sizes=(math.inf,)),
        dict(algorithm="fb", step_sizes=(1.0, 2.0)),
        dict(tol=0.0),
        dict(max_iter=0),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SplittingConfig(**kw)


class TestForwardBackward:
    def test_folded_offset_converges_to_offset(self, rng):
        b = rng.standard_normal(8)
        r = forward_backward(Offset(ZERO, b), LinearOperator(np.eye(8)), np.zeros(8), 1.0, tol=1e-12, max_iter=200)
        # the solution of 0 = x - b
        assert r.converged
        np.testing.assert_allclose(r.solution.values, b, atol=1e-11)

    def test_zero_offset_goes_to_zero(self, rng):
        r = forward_backward(ZERO, LinearOperator(np.eye(8)), rng.standard_normal(8), 1.0, tol=1e-12, max_iter=200)
        np.testing.assert_allclose(r.solution.values, 0.0, atol=1e-11)

    def test_series_resistors(self):
        v = drive()
        op1 = ElementOperator(LinearResistor(1.0), v.tau)
        op2 = ElementOperator(LinearResistor(1.0), v.tau)
        r = forward_backward(Offset(op1, v.values), op2, v.like(np.zeros(v.tau)), 0.5, tol=1e-12, max_iter=1000)
        assert r.converged and r.algorithm == "fb"
        np.testing.assert_allclose(r.solution.values, 0.5 * v.values, atol=1e-10)

    def test_trace(self, tmp_path):
        v = drive()
        r = forward_backward(Offset(LinearOperator(np.eye(v.tau)), v.values), LinearOperator(np.eye(v.tau)),
                             v.like(np.zeros(v.tau)), 0.5, tol=1e-8, record_trace=True)
        assert len(r.trace) == r.iterations
        h = r.update_history()
        assert h[-1] == r.final_residual <= 1e-8
        path = tmp_path / "t.csv"
        write_trace_csv(path, r)
        lines = path.read_text().splitlines()
        assert lines[0] == "k,max_update,residual" and len(lines) == r.iterations + 1

    def test_history_needs_trace(self):
        r = forward_backward(ZERO, LinearOperator(np.eye(2)), np.ones(2), 1.0)
        with pytest.raises(ValueError):
            r.update_history()

    def test_non_convergence_reported(self):
        # a forward step far beyond the admissible range diverges
        A = 10 * np.eye(4)
        r = forward_backward(LinearOperator(A), ZERO, np.ones(4), 1.0, max_iter=50)
        assert not r.converged and r.iterations == 50
        assert "no convergence" in r.message

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_to_nan_stops(self):
        A = 10 * np.eye(4)
        r = forward_backward(LinearOperator(A), ZERO, np.ones(4), 10.0, max_iter=10_000)
        assert not r.converged and r.iterations < 10_000


class TestDouglasRachford:
    def test_zero_operators_fixed(self, rng):
        z0 = rng.standard_normal(6)
        r = douglas_rachford(ZERO, ZERO, z0, 1.0, tol=1e-12)
        assert r.converged and r.iterations == 1
        np.testing.assert_array_equal(r.solution.values, z0)
        np.testing.assert_array_equal(r.internal_signals[0].values, z0)

    def test_agrees_with_fb_on_linear_pair(self, rng):
        tau = 32
        v = drive(tau)
        G = RCAdmittance(1.0, 0.1)
        op_r = ElementOperator(LinearResistor(2.0), tau)
        op_g = ElementOperator(G, tau, invert=True)
        fb = forward_backward(Offset(op_g, v.values), op_r, v.like(np.zeros(tau)), 0.5, tol=1e-12, max_iter=100_000)
        dr = douglas_rachford(Offset(op_g, v.values), op_r, v.like(np.zeros(tau)), 1.0, tol=1e-12, max_iter=100_000)
        assert fb.converged and dr.converged
        assert np.max(np.abs(fb.solution.values - dr.solution.values)) < 1e-4


class TestNested:
    def test_single_position_is_fb(self, rng):
        tau = 16
        v = drive(tau)
        r0 = ElementOperator(LinearResistor(1.0), tau)
        e1 = ElementOperator(LinearResistor(3.0), tau)
        n = nested_forward_backward(r0, [e1], v, [0.3], tol=1e-13, max_iter=10_000)
        f = forward_backward(Offset(r0, v.values), e1, np.zeros(tau), 0.3, tol=1e-13, max_iter=10_000)
        np.testing.assert_allclose(n.solution.values, f.solution.values, atol=1e-12)
        np.testing.assert_allclose(n.solution.values, v.values / 4, atol=1e-11)

    def test_three_element_iteration(self):
        # series(R1, parallel(R2, R0)) with unit resistors: i = v / 1.5
        tau = 8
        v = drive(tau)
        r0 = ElementOperator(LinearResistor(1.0), tau, invert=True)
        e1 = ElementOperator(LinearResistor(1.0), tau, invert=True)
        e2 = ElementOperator(LinearResistor(1.0), tau)
        r = nested_forward_backward(r0, [e1, e2], v, [0.25, 0.25], tol=1e-13, max_iter=10_000)
        assert r.converged
        np.testing.assert_allclose(r.solution.values, v.values / 1.5, atol=1e-11)
        # the inner voltage is the drop across the parallel pair
        np.testing.assert_allclose(r.internal_signals[0].values, 0.5 * v.values / 1.5, atol=1e-11)

    def test_warm_start_from_solution(self):
        tau = 8
        v = drive(tau)
        r0 = ElementOperator(LinearResistor(1.0), tau)
        e1 = ElementOperator(LinearResistor(1.0), tau)
        cold = nested_forward_backward(r0, [e1], v, [0.5], tol=1e-12)
        warm = nested_forward_backward(r0, [e1], v, [0.5], tol=1e-12, warm_start=[cold.solution])
        assert warm.iterations == 1

    def test_argument_checks(self):
        v = drive(8)
        r0 = ElementOperator(LinearResistor(1.0), 8)
        with pytest.raises(ValueError):
            nested_forward_backward(r0, [], v, [])
        with pytest.raises(ValueError):
            nested_forward_backward(r0, [r0], v, [0.1, 0.2])
        with pytest.raises(ValueError):
            nested_forward_backward(r0, [r0], v, [0.1], warm_start=[])

    def test_domain_error_carries_position(self):
        tau = 8
        v = drive(tau) * 5.0
        # the forward diode law is evaluated on a negative current
        r0 = ElementOperator(ShockleyDiode(), tau)
        e1 = ElementOperator(LinearResistor(1.0), tau)
        with pytest.raises(DomainError) as info:
            nested_forward_backward(r0, [e1], v, [1.0], max_iter=5)
        assert info.value.position == 1


class TestStepRanges:
    def test_fb_unit(self):
        r = fb_step_range(MD(0.0, 1.0), MD(0.0, math.inf))
        assert (r.lo, r.hi) == (0.0, 2.0)
        assert 1.9 in r and 2.0 not in r

    def test_fb_scaled_identity(self):
        # a resistor forward step has no shifted part, so 2 / (0 + 2 mu)
        r = fb_step_range(MD(3.0, 3.0), MD(2.0, 2.0))
        assert r.case == "cocoercive-shifted" and r.hi == pytest.approx(1 / 3)
        assert fb_step_range(MD(0.0, 0.0), MD(0.0, 1.0)).hi == math.inf

    def test_fb_both_hypomonotone(self):
        r = fb_step_range(MD(-1.0, 2.0), MD(-1.0, 2.0))
        assert r.empty and r.diagnostic

    def test_fb_lipschitz_violated(self):
        r = fb_step_range(MD(-2.0, 2.0), MD(1.0, 1.0))
        assert r.empty
        assert "case 3" in r.diagnostic

    def test_fb_hypomonotone_forward(self):
        # potassium-like forward law with a 500 ohm conductance behind it
        r = fb_step_range(MD(-0.002, 22.7), MD(1 / 500, 1 / 500))
        assert r.case == "hypomonotone-forward"
        assert r.hi == pytest.approx(2 / (22.7 + 0.002 + 2 / 500))
        assert fb_step_range(MD(-0.002, 22.7), MD(1 / 400, 1 / 400)).case == "hypomonotone-forward"
        # 600 ohm leaves too little coercivity
        assert fb_step_range(MD(-0.002, 22.7), MD(1 / 600, 1 / 600)).empty

    def test_dr_formula(self):
        r = dr_step_range(MD(-1.0, 3.0), MD(2.0, 5.0))
        assert (r.lo, r.hi) == (0.0, 0.25)

    def test_dr_unbounded(self):
        r = dr_step_range(MD(0.0, math.inf), MD(1.0, 1.0))
        assert math.isinf(r.hi)

    def test_dr_needs_gap(self):
        r = dr_step_range(MD(-1.0, 1.0), MD(1.0, 1.0))
        assert r.empty and "mu=1 > omega=1" in r.diagnostic

    def test_linear_fb_within_range_converges(self, rng):
        for _ in range(20):
            tau = 6
            X = rng.standard_normal((tau, tau))
            A1 = X @ X.T / tau + 0.1 * np.eye(tau)
            A2 = np.diag(rng.uniform(0.1, 2, tau))
            op1, op2 = LinearOperator(A1), LinearOperator(A2)
            r = fb_step_range(op1.descriptor(), op2.descriptor())
            alpha = 0.9 * min(r.hi, 10.0)
            b = rng.standard_normal(tau)
            res = forward_backward(Offset(op1, b), op2, np.zeros(tau), alpha, tol=1e-10, max_iter=200_000)
            assert res.converged
            np.testing.assert_allclose((A1 + A2) @ res.solution.values, b, atol=1e-6)
