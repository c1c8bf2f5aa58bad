import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from catbounds.errors import InvalidWeightsError, ModelValidationError, UnsupportedFamilyError
from catbounds.model import (
    BatchArrivals,
    BSequence,
    Catastrophes,
    CatastropheTail,
    QueueModel,
    SingleServer,
    TimeFunction,
    WeightSequence,
    b_partial_tail,
    beta_star,
    common_period,
    eval_rate,
    weight_constants,
)

LAMBDA = TimeFunction.trig(2.0, [(2.0, 0.0, 1.0)], period=1.0, name="lambda")


class TestEvalRate:
    def test_trig_at_zero(self):
        assert eval_rate(LAMBDA, 0.0) == 4.0

    def test_trig_at_half(self):
        assert eval_rate(LAMBDA, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_zero_constant(self):
        assert eval_rate(TimeFunction.constant(0.0), 3.7) == 0.0

    def test_negative_value_names_function_and_time(self):
        with pytest.raises(ModelValidationError, match="bad_rate.*t=0.5"):
            TimeFunction.trig(1.0, [(2.0, 0.0, 1.0)], name="bad_rate")

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            eval_rate(LAMBDA, -1.0)

    def test_signed_allows_negative(self):
        f = TimeFunction.trig(1.0, [(2.0, 0.0, 1.0)], signed=True)
        assert f(0.5) == pytest.approx(-1.0)

    def test_scalar_path_matches_vectorized(self):
        t = np.linspace(0.0, 3.0, 101)
        assert np.allclose([LAMBDA.scalar(x) for x in t], LAMBDA.evaluate(t), atol=1e-14)


class TestTimeFunctionKinds:
    def test_piecewise_periodic(self):
        f = TimeFunction.piecewise([0.25, 0.5], [1.0, 2.0, 3.0], period=1.0)
        assert f(0.1) == 1.0 and f(0.3) == 2.0 and f(0.9) == 3.0 and f(1.3) == 2.0

    def test_tabulated_interpolates(self):
        f = TimeFunction.tabulated([0.0, 1.0], [1.0, 3.0])
        assert f(0.5) == 2.0 and f(5.0) == 3.0

    def test_period_checked(self):
        for t in np.linspace(0.0, 5.0, 51):
            assert LAMBDA(t + 1.0) == pytest.approx(LAMBDA(t), abs=1e-12)

    def test_inconsistent_period_rejected(self):
        with pytest.raises(ModelValidationError):
            TimeFunction.trig(2.0, [(1.0, 0.0, 1.5)], period=1.0)

    @pytest.mark.parametrize("f", [
        LAMBDA,
        TimeFunction.trig(3.0, [(1.0, 0.5, 1.0), (0.2, -0.7, 3.0)], period=1.0),
        TimeFunction.piecewise([0.3, 0.7], [1.0, 0.2, 2.0], period=1.0),
        TimeFunction.tabulated([0.0, 0.4, 1.0], [1.0, 2.0, 1.0], period=1.0),
        TimeFunction.constant(1.7),
    ])
    def test_antiderivative_matches_quadrature(self, f):
        kinks = np.concatenate([k + np.array((0.0, 0.3, 0.4, 0.7)) for k in range(11)])
        for t in (0.37, 1.0, 4.2, 10.0):
            cuts = np.concatenate(([0.0], kinks[(kinks > 0) & (kinks < t)], [t]))
            ref = math.fsum(integrate.quad(f, a, b, epsabs=1e-14)[0]
                            for a, b in zip(cuts[:-1], cuts[1:]))
            assert f.antiderivative(t) == pytest.approx(ref, abs=1e-10)

    def test_effective_period_from_frequencies(self):
        f = TimeFunction.trig(2.0, [(0.5, 0.0, 2.0), (0.0, 0.3, 3.0)])
        assert f.effective_period == pytest.approx(1.0)
        assert common_period([f, TimeFunction.constant(1.0)]) == pytest.approx(1.0)

    @settings(max_examples=60, deadline=None)
    @given(a0=st.floats(0.0, 5.0), amp=st.floats(0.0, 1.0), ph=st.floats(0.0, 6.3),
           t0=st.floats(0.0, 20.0), width=st.floats(0.0, 3.0))
    def test_sup_bound_dominates_samples(self, a0, amp, ph, t0, width):
        f = TimeFunction.trig(a0, [(a0 * amp * math.cos(ph), a0 * amp * math.sin(ph), 1.0)])
        t = np.linspace(t0, t0 + width, 200)
        assert f.evaluate(t).max() <= f.sup_bound(t0, t0 + width) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(vals=st.lists(st.floats(0.0, 5.0), min_size=2, max_size=6), t0=st.floats(0.0, 5.0),
           width=st.floats(0.0, 2.0))
    def test_sup_bound_piecewise(self, vals, t0, width):
        bps = np.linspace(0.0, 1.0, len(vals) + 1)[1:-1]
        f = TimeFunction.piecewise(bps, vals, period=1.0)
        t = np.linspace(t0, t0 + width, 300)
        assert f.evaluate(t).max() <= f.sup_bound(t0, t0 + width) + 1e-12


class TestBSequence:
    def test_B1_is_one(self):
        assert BSequence.cubic().tail_mass(1) == 1.0

    def test_B2_against_partial_sums(self):
        k = np.arange(2, 2_000_001, dtype=float)
        partial = math.fsum(4.0 / (k * (k + 1) * (k + 2)))
        # remainder of the partial sum is below 2/K^2
        assert BSequence.cubic().tail_mass(2) == pytest.approx(1 / 3, abs=1e-15)
        assert abs(partial - 1 / 3) < 1e-12

    def test_b_partial_tail_requires_level_jump(self):
        m = QueueModel(arrivals=BatchArrivals(TimeFunction.constant(1.0), (1.0,)))
        with pytest.raises(UnsupportedFamilyError):
            b_partial_tail(m, 1)

    @pytest.mark.parametrize("m", [1, 2, 5, 40])
    def test_first_moment_tail(self, m):
        b = BSequence.cubic()
        k = np.arange(m, 400_000, dtype=float)
        assert b.first_moment_tail(m) == pytest.approx(math.fsum(k * b.b(k)), abs=2e-5)

    def test_sum_k_B_k_diverges(self):
        assert math.isinf(BSequence.cubic().sum_k_tail_mass())

    def test_sample_target_distribution(self):
        b = BSequence.cubic()
        rng = np.random.default_rng(3)
        draws = np.array([b.sample_target(2, u) for u in rng.random(20_000)])
        assert draws.min() >= 3
        p3 = b.b(3) / b.tail_mass(3)
        se = math.sqrt(p3 * (1 - p3) / len(draws))
        assert abs(np.mean(draws == 3) - p3) < 4 * se

    def test_explicit_sequence(self):
        b = BSequence("explicit", (0.5, 0.25))
        assert b.tail_mass(2) == 0.25 and b.tail_mass(3) == 0.0
        assert b.sample_target(0, 0.9) in (1, 2)


class TestCatastrophes:
    def test_harmonic_infimum_is_base(self):
        cat = Catastrophes(tail=CatastropheTail(
            "harmonic", TimeFunction.constant(2.0),
            TimeFunction.trig(1.0, [(0.0, 1.0, 1.0)])))
        assert cat.infimum(0.25) == 2.0
        assert cat.rate(4, 0.25) == pytest.approx(2.5)

    def test_prefix_without_tail_repeats_last(self):
        cat = Catastrophes((TimeFunction.constant(3.0), TimeFunction.constant(1.0)))
        assert cat.rate(1, 0.0) == 3.0 and cat.rate(10, 0.0) == 1.0
        assert cat.infimum(0.0) == 1.0

    def test_no_catastrophes(self):
        m = QueueModel(services=SingleServer(TimeFunction.constant(1.0)))
        assert beta_star(m, 0.3) == 0.0


class TestWeights:
    def test_linear_constants(self):
        assert weight_constants(WeightSequence.linear()) == (1.0, math.inf, 1.0)

    def test_ones_constants(self):
        d, d_star, _ = weight_constants(WeightSequence.ones())
        assert d == d_star == 1.0

    @pytest.mark.parametrize("rho", [1.05, 1.5, 2.0, math.e, 5.0])
    def test_geometric_W_brute_force(self, rho):
        i = np.arange(1, 200, dtype=float)
        assert weight_constants(WeightSequence.geometric(rho))[2] == pytest.approx(
            np.min(rho ** i / i), rel=1e-12)

    def test_explicit_tail(self):
        w = WeightSequence("explicit", values=(1.0, 2.0, 3.0), tail_slope=1.0, tail_intercept=1.0)
        assert np.array_equal(w.d(np.arange(6)), [1, 2, 3, 4, 5, 6])

    @pytest.mark.parametrize("kw", [
        dict(kind="geometric", rho=0.9),
        dict(kind="explicit", values=(1.0, 0.0)),
        dict(kind="explicit", values=(1.0,), tail_slope=-1.0),
        dict(kind="unknown"),
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidWeightsError):
            WeightSequence(**kw)
