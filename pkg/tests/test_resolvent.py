import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monoport.elements import (
    Capacitor,
    Direction,
    Inductor,
    LinearResistor,
    Memristive,
    RCAdmittance,
    ShockleyDiode,
    element_forward,
    element_matrix,
    monotonicity_of,
    static_graph_distance,
)
from monoport.errors import BracketError, NumericalError, UnsupportedElementError
from monoport.memristive import PotassiumConductance
from monoport.resolvent import (
    ElementOperator,
    FactorizedResolvent,
    element_resolvent,
    guarded_newton_resolvent,
    inverse_linear_resolvent,
    linear_resolvent,
)
from monoport.signal import PeriodicSignal

DIODE = ShockleyDiode(1e-14, 1.0, 0.02585)
# root of x + 0.01 * 0.02585 * ln(x / 1e-14 + 1) = 0.8, from a 40-digit findroot
DIODE_ROOT = 0.7917273141852326551


def sig(v, T=1.0):
    return PeriodicSignal(np.asarray(v, dtype=float), T)


class TestLinear:
    def test_zero_matrix_is_identity(self, rng):
        z = rng.standard_normal(5)
        np.testing.assert_array_equal(linear_resolvent(np.zeros((5, 5)), 0.7)(z), z)

    def test_halving(self):
        np.testing.assert_allclose(linear_resolvent(np.eye(3), 1.0)(np.array([2.0, 4, 6])), [1, 2, 3])

    def test_inverse_halving(self):
        np.testing.assert_allclose(inverse_linear_resolvent(np.eye(3), 1.0)(np.array([2.0, 4, 6])), [1, 2, 3])

    def test_inverse_scalar(self):
        # A = 2I, alpha = 2: (1 + 2/2)^-1 = 1/2
        np.testing.assert_allclose(inverse_linear_resolvent(2 * np.eye(4), 2.0)(np.ones(4)), 0.5)

    def test_rc_residual(self, rng):
        A = element_matrix(RCAdmittance(1, 1), 500)
        res = linear_resolvent(A, 0.01)
        for _ in range(5):
            z = rng.standard_normal(500)
            x = res(z)
            assert np.linalg.norm(x + 0.01 * A @ x - z) <= 1e-10 * np.linalg.norm(z)

    def test_inverse_matches_explicit(self, rng):
        A = element_matrix(RCAdmittance(1, 1), 32)
        z = rng.standard_normal(32)
        explicit = linear_resolvent(np.linalg.inv(A), 0.01)(z)
        np.testing.assert_allclose(inverse_linear_resolvent(A, 0.01)(z), explicit, atol=1e-8)

    def test_accepts_signal(self):
        out = linear_resolvent(np.eye(2), 1.0)(sig([2, 4]))
        assert isinstance(out, PeriodicSignal)
        np.testing.assert_allclose(out.values, [1, 2])

    def test_singular_reports_condition(self):
        with pytest.raises(NumericalError, match="condition"):
            inverse_linear_resolvent(np.diag([1.0, 0.0]) - 1e-300, 1e-300)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            linear_resolvent(np.ones((2, 3)), 1.0)
        with pytest.raises(ValueError):
            linear_resolvent(np.eye(2), 0.0)
        with pytest.raises(ValueError):
            FactorizedResolvent(np.eye(2), 1.0, kind="sideways")


class TestScalar:
    def test_identity(self):
        assert guarded_newton_resolvent(lambda x: x, 1.0, 4.0) == pytest.approx(2.0, abs=1e-12)

    def test_diode_through_origin(self):
        f = lambda x: DIODE.nvt * math.log1p(x / DIODE.I_s)
        assert guarded_newton_resolvent(f, 1.0, 0.0, lower=-DIODE.I_s) == pytest.approx(0.0, abs=1e-20)

    def test_diode_frozen_root(self):
        f = lambda x: DIODE.nvt * math.log1p(x / DIODE.I_s)
        x = guarded_newton_resolvent(f, 0.01, 0.8, lower=-DIODE.I_s)
        assert x == pytest.approx(DIODE_ROOT, rel=1e-14)
        assert abs(x + 0.01 * f(x) - 0.8) < 1e-12

    def test_far_root_needs_expansion(self):
        x = guarded_newton_resolvent(lambda x: 1e-3 * x, 1.0, 1e9)
        assert x == pytest.approx(1e9 / 1.001, rel=1e-12)

    def test_bracket_failure(self):
        with pytest.raises(BracketError):
            guarded_newton_resolvent(lambda x: -2.0 * x, 1.0, 1.0)


class TestElementResolvent:
    def test_resistor(self):
        np.testing.assert_allclose(element_resolvent(LinearResistor(1), 1.0, sig([2, 4])).values, [1, 2])

    def test_diode_vectorized_root(self):
        x = element_resolvent(DIODE, 0.01, sig([0.8, 0.8])).values
        np.testing.assert_allclose(x, DIODE_ROOT, rtol=1e-14)

    def test_diode_continuity_at_zero_step(self):
        z = sig([0.3, 1e-3, 2.0, 0.0])
        np.testing.assert_allclose(element_resolvent(DIODE, 1e-12, z).values, z.values, rtol=1e-9, atol=1e-20)
        z = sig([0.3, -0.2, 0.7, 0.0])
        np.testing.assert_allclose(element_resolvent(DIODE, 1e-12, z, invert=True).values, z.values, atol=1e-20)

    def test_rc_inverse_matches_explicit(self, rng):
        z = sig(rng.standard_normal(500))
        G = element_matrix(RCAdmittance(1, 1), 500)
        explicit = np.linalg.solve(np.eye(500) + 0.01 * np.linalg.inv(G), z.values)
        got = element_resolvent(RCAdmittance(1, 1), 0.01, z, invert=True).values
        np.testing.assert_allclose(got, explicit, atol=1e-10)

    def test_memristive_unsupported(self):
        with pytest.raises(UnsupportedElementError):
            element_resolvent(Memristive(PotassiumConductance()), 1.0, sig([0.0, 1.0]))

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            element_resolvent(LinearResistor(1), -1.0, sig([1, 2]))


ELEMENTS = [
    (LinearResistor(2.5), False),
    (LinearResistor(0.4), True),
    (DIODE, False),
    (DIODE, True),
    (RCAdmittance(1.0, 0.05), False),
    (RCAdmittance(1.0, 0.05), True),
    (Capacitor(0.3), False),
    (Inductor(0.2), False),
]


def _sample(e, invert, r, tau):
    # currents for the i->v diode law must stay above -I_s
    if isinstance(e, ShockleyDiode) and not invert:
        return r.uniform(-0.5, 2.0, tau)
    return r.uniform(-1.0, 1.0, tau) * 10 ** r.uniform(-2, 1)


@pytest.mark.parametrize("e,invert", ELEMENTS, ids=lambda v: repr(v))
def test_reconstruction(e, invert, rng):
    tau = 16
    for alpha in (0.01, 1.0, 50.0):
        z = _sample(e, invert, rng, tau)
        x = element_resolvent(e, alpha, sig(z), invert=invert).values
        if isinstance(e, ShockleyDiode):
            # x may round onto the domain edge -I_s, so test the pair against the graph
            y = (z - x) / alpha
            gap = static_graph_distance(e, x, y, invert=invert)
            assert np.max(gap * max(alpha, 1.0)) <= 1e-9 * max(1.0, np.max(np.abs(z)))
            continue
        fx = element_forward(e, sig(x), invert=invert).values
        assert np.max(np.abs(x + alpha * fx - z)) <= 1e-10 * max(1.0, np.max(np.abs(z)))


@pytest.mark.parametrize("e,invert", ELEMENTS, ids=lambda v: repr(v))
def test_nonexpansive(e, invert):
    r = np.random.default_rng(7)
    tau = 8
    worst = 0.0
    for _ in range(1000):
        alpha = 10 ** r.uniform(-2, 1.5)
        z1, z2 = _sample(e, invert, r, tau), _sample(e, invert, r, tau)
        x1 = element_resolvent(e, alpha, sig(z1), invert=invert).values
        x2 = element_resolvent(e, alpha, sig(z2), invert=invert).values
        worst = max(worst, np.linalg.norm(x1 - x2) / np.linalg.norm(z1 - z2))
    assert worst <= 1 + 1e-9


@pytest.mark.parametrize("e,invert", [(LinearResistor(2.0), False), (RCAdmittance(1, 0.1), False),
                                      (RCAdmittance(2, 0.5), True), (LinearResistor(3.0), True)])
def test_gamma_bound(e, invert):
    r = np.random.default_rng(3)
    tau = 12
    mu = monotonicity_of(e, tau, invert=invert).mu
    assert mu > 0
    for _ in range(200):
        alpha = 10 ** r.uniform(-2, 1)
        z1, z2 = r.standard_normal(tau), r.standard_normal(tau)
        x1 = element_resolvent(e, alpha, sig(z1), invert=invert).values
        x2 = element_resolvent(e, alpha, sig(z2), invert=invert).values
        ratio = np.linalg.norm(x1 - x2) / np.linalg.norm(z1 - z2)
        assert ratio <= 1 / (1 + alpha * mu) + 1e-6


class TestElementOperator:
    def test_orientation(self):
        op = ElementOperator.oriented(RCAdmittance(1, 1), Direction.I_TO_V, 8)
        assert op.invert and op.direction is Direction.I_TO_V

    def test_forward_inverse(self, rng):
        e = RCAdmittance(1, 0.2)
        op = ElementOperator(e, 8, invert=True)
        x = rng.standard_normal(8)
        np.testing.assert_allclose(element_matrix(e, 8) @ op.forward(x), x, atol=1e-12)

    def test_nonfinite_passthrough(self):
        op = ElementOperator(DIODE, 4)
        assert np.all(np.isnan(op.forward(np.array([0.0, np.inf, 1.0, 2.0]))))
        assert np.all(np.isnan(op.resolvent(1.0, np.array([0.0, np.nan, 1.0, 2.0]))))

    def test_warm_start_consistent(self, rng):
        op = ElementOperator(DIODE, 16, invert=True)
        z = rng.uniform(-1, 1, 16)
        first = op.resolvent(0.3, z)
        second = op.resolvent(0.3, z + 1e-6)
        cold = element_resolvent(DIODE, 0.3, sig(z + 1e-6), invert=True).values
        np.testing.assert_allclose(second, cold, rtol=1e-12, atol=1e-15)
        assert first.shape == (16,)

    def test_memristive_has_no_resolvent(self):
        assert not ElementOperator(Memristive(PotassiumConductance()), 8).has_resolvent
        assert ElementOperator(DIODE, 8).has_resolvent
