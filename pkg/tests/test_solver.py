import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from catbounds.bounds import build_report
from catbounds.errors import SolverError
from catbounds.generator import build_A
from catbounds.model import (
    Catastrophes,
    CatastropheTail,
    QueueModel,
    SingleServer,
    TimeFunction,
    WeightSequence,
)
from catbounds.solver import (
    conditional_mean,
    delta,
    dopri45,
    limiting_regime_check,
    pair_diagnostics,
    solve_forward,
    solve_reduced,
)

from _models import mm1_catastrophe, random_model, two_state

GRID = np.linspace(0.0, 5.0, 51)


class TestIntegrator:
    def test_exponential_decay(self):
        t = np.linspace(0.0, 4.0, 9)
        y, stats = dopri45(lambda t, y: -y, np.array([1.0]), t, tol=1e-12)
        assert np.abs(y[:, 0] - np.exp(-t)).max() <= 1e-10
        assert stats.max_local_error <= 1e-12

    def test_time_dependent_rhs(self):
        t = np.linspace(0.0, 3.0, 7)
        y, _ = dopri45(lambda t, y: np.cos(t) * np.ones_like(y), np.zeros(2), t, tol=1e-12)
        assert np.allclose(y[:, 1], np.sin(t), atol=1e-10)

    def test_step_budget(self):
        with pytest.raises(SolverError, match="budget"):
            dopri45(lambda t, y: -50 * y, np.ones(1), [0.0, 10.0], tol=1e-12, max_steps=5)

    def test_negativity_detected(self):
        with pytest.raises(SolverError, match="below"):
            dopri45(lambda t, y: -np.ones_like(y), np.ones(1), [0.0, 2.0])

    def test_grid_must_be_sorted(self):
        with pytest.raises(ValueError):
            dopri45(lambda t, y: y, np.ones(1), [1.0, 0.0])


class TestForward:
    def test_zero_rates_are_stationary(self):
        traj = solve_forward(QueueModel(), 5, delta(3, 5), GRID)
        assert np.array_equal(traj.p, np.tile(delta(3, 5), (len(GRID), 1)))

    def test_two_state_closed_form(self):
        a, b = 0.4, 2.1
        traj = solve_forward(two_state(a, b), 1, 1, GRID, tol=1e-12)
        exact = a / (a + b) + b / (a + b) * np.exp(-(a + b) * GRID)
        assert np.abs(traj.p[:, 1] - exact).max() <= 1e-10

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_matrix_exponential(self, seed):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(3, 25))
        model = random_model(rng, N, constant_only=True)
        p0 = rng.dirichlet(np.ones(N + 1))
        A = build_A(model, N, 0.0).toarray()
        got = solve_forward(model, N, p0, [0.0, 0.5, 2.0]).p
        assert np.abs(got[2] - expm(2.0 * A) @ p0).max() <= 1e-8

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_mass_conserved(self, seed):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(2, 15))
        traj = solve_forward(random_model(rng, N), N, 0, np.linspace(0.0, 3.0, 7))
        assert np.abs(traj.total_mass - 1.0).max() <= 1e-9

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_reduced_equals_forward(self, seed):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(2, 15))
        model = random_model(rng, N)
        t = np.linspace(0.0, 3.0, 7)
        gap = solve_forward(model, N, 0, t).p - solve_reduced(model, N, 0, t).p
        assert np.abs(gap).sum(axis=1).max() <= 1e-8

    def test_defect_tracking_loses_tail_mass(self, published):
        traj = solve_forward(published, 10, 0, [0.0, 1.0], closure="defect_tracking")
        assert traj.tail_defect[-1] > 0.0
        assert traj.tail_defect[0] == 0.0

    def test_truncation_converges_light_tail(self):
        model = mm1_catastrophe(0.8, 1.0, 0.5)
        t = np.linspace(0.0, 3.0, 4)
        a = solve_forward(model, 60, 0, t).p
        b = solve_forward(model, 120, 0, t).p
        assert np.abs(a - b[:, :61]).sum(axis=1).max() <= 1e-8

    def test_truncation_gap_within_crossing_mass(self, corrected):
        t = np.linspace(0.0, 3.0, 4)
        a = solve_forward(corrected, 200, 0, t).p
        b = solve_forward(corrected, 400, 0, t).p
        gap = np.abs(a - b[:, :201]).sum(axis=1) + b[:, 201:].sum(axis=1)
        # twice the expected number of arrivals landing above N
        crossing = 2 * corrected.arrivals.rate.antiderivative(t) * corrected.arrivals.b.tail_mass(201)
        assert np.all(gap <= crossing + 1e-10)

    def test_initial_vector_checked(self):
        with pytest.raises(ValueError):
            solve_forward(two_state(1.0, 1.0), 1, np.array([0.5, 0.4]), GRID)
        with pytest.raises(ValueError):
            solve_forward(two_state(1.0, 1.0), 1, 4, GRID)

    def test_table_header(self):
        traj = solve_forward(two_state(1.0, 1.0), 1, 0, [0.0, 1.0])
        header, rows = traj.table()
        assert header == ["t", "p0", "p1", "tail_defect", "norm_1D", "mean"]
        assert rows.shape == (2, 6)

    def test_at_requires_grid_time(self):
        traj = solve_forward(two_state(1.0, 1.0), 1, 0, [0.0, 1.0])
        assert np.allclose(traj.at(1.0), traj.p[1])
        with pytest.raises(KeyError):
            traj.at(0.5)


class TestDiagnostics:
    def test_equal_starts_have_no_ratio(self, corrected_report, corrected):
        w = WeightSequence.linear()
        pd = pair_diagnostics(corrected, 60, 0, 0, w, corrected_report, [0.0, 1.0])
        assert pd.violation_ratio is None

    def test_constant_catastrophes_uniform_bound(self):
        c = 0.6
        model = mm1_catastrophe(0.8, 1.0, c)
        ones = WeightSequence.ones()
        rep = build_report(model, ones, 60)
        pd = pair_diagnostics(model, 60, delta(0, 60), delta(4, 60), ones, rep, GRID)
        assert np.allclose(pd.bound_uniform, 2 * np.exp(-c * GRID))
        assert pd.violation_ratio <= 1 + 1e-9
        assert pd.norm_equivalence

    def test_mean_gap_starts_at_j(self, corrected_report, corrected):
        pd = pair_diagnostics(corrected, 100, 0, 7, WeightSequence.linear(), corrected_report,
                              [0.0, 0.5])
        assert pd.mean_gap[0] == 7.0
        assert 0.0 < pd.mean_gap[1] < 7.0

    def test_conditional_mean_without_arrivals(self):
        model = QueueModel(services=SingleServer(TimeFunction.constant(1.0)))
        assert np.all(conditional_mean(model, 10, 0, GRID) == 0.0)
        m = conditional_mean(model, 10, 3, [0.0, 2.0], tol=1e-12)
        # pure death from 3 at unit rate: E = sum_{k<3} P(Poisson(2) <= k)
        expected = sum(math.exp(-2.0) * sum(2.0 ** i / math.factorial(i) for i in range(k + 1))
                       for k in range(3))
        assert m[1] == pytest.approx(expected, abs=1e-9)

    def test_tail_warning(self):
        model = QueueModel(services=SingleServer(TimeFunction.constant(1.0)))
        with pytest.warns(UserWarning, match="under-truncated"):
            conditional_mean(model, 10, 10, [0.0, 0.1])

    def test_limit_without_arrivals_is_origin(self):
        model = QueueModel(
            services=SingleServer(TimeFunction.constant(1.0)),
            catastrophes=Catastrophes(tail=CatastropheTail("constant", TimeFunction.constant(2.0))))
        w = WeightSequence.linear()
        rep = build_report(model, w, 30)
        lc = limiting_regime_check(model, 30, w, rep, np.linspace(0.0, 20.0, 41), p0=5)
        assert lc.observed_sup == pytest.approx(1.0, abs=1e-8)
        assert np.abs(lc.trajectory.p[-1] - delta(0, 30)).max() <= 1e-8
        assert lc.passed
