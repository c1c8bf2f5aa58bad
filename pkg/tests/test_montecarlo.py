import math

import numpy as np
import pytest

from catbounds import montecarlo
from catbounds.errors import MajorantError
from catbounds.model import (
    Catastrophes,
    CatastropheTail,
    QueueModel,
    SingleServer,
    TimeFunction,
)
from catbounds.montecarlo import PathEnsemble, compare_tv, simulate_paths
from catbounds.solver import solve_forward

from _models import mm1_catastrophe, two_state


def test_zero_rates_stay_put():
    ens = simulate_paths(QueueModel(), 4, 3.0, 50, seed=1, record_events=True)
    assert np.all(ens.states == 4)
    assert np.all(ens.event_counts == 0)
    assert np.all(np.isinf(ens.first_exit_times()))


def test_two_state_probability_within_three_se():
    a, b = 1.3, 0.7
    ens = simulate_paths(two_state(a, b), 0, 1.0, 4000, seed=5, eval_times=[1.0])
    exact = a / (a + b) * (1 - math.exp(-(a + b)))
    p1 = ens.distribution(1.0, 2)[1]
    assert abs(p1 - exact) <= 3 * ens.stderr(1.0, 2)[1]


def test_seed_determinism_and_path_independence():
    model = mm1_catastrophe(1.0, 1.0, 0.3)
    a = simulate_paths(model, 2, 4.0, 30, seed=11)
    b = simulate_paths(model, 2, 4.0, 30, seed=11)
    c = simulate_paths(model, 2, 4.0, 10, seed=11)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.states[:10], c.states)


def test_events_are_ordered_and_consistent(corrected):
    ens = simulate_paths(corrected, 0, 3.0, 200, seed=3, record_events=True)
    for evs, n in zip(ens.events, ens.event_counts):
        assert len(evs) == n
        times = [e.time for e in evs]
        assert times == sorted(times)
        for prev, e in zip(evs, evs[1:]):
            assert prev.target == e.source
        for e in evs:
            if e.kind == "catastrophe":
                assert e.target == 0 and e.source >= 1
            elif e.kind == "arrival":
                assert e.target > e.source
            else:
                assert e.target == e.source - 1


def test_event_lines_are_json(corrected):
    ens = simulate_paths(corrected, 0, 1.0, 5, seed=0, record_events=True)
    lines = ens.event_lines()
    assert len(lines) == int(ens.event_counts.sum())
    assert all(line.startswith('{"path"') for line in lines)


def test_time_varying_exit_law():
    # exit from 1 at rate q(t) = 1.5 + sin(2 pi t) + 1 (service plus constant catastrophes)
    srv = TimeFunction.trig(1.5, [(0.0, 1.0, 1.0)], period=1.0)
    model = QueueModel(services=SingleServer(srv),
                       catastrophes=Catastrophes(tail=CatastropheTail("constant",
                                                                      TimeFunction.constant(1.0))))
    ens = simulate_paths(model, 1, 2.0, 6000, seed=9, record_events=True)
    h = ens.first_exit_times()
    for t in (0.2, 0.5, 1.0):
        survival = math.exp(-(srv.antiderivative(t) + t))
        p_hat = float(np.mean(h > t))
        se = math.sqrt(survival * (1 - survival) / len(h))
        assert abs(p_hat - survival) <= 4 * se


def test_majorant_violation_detected(monkeypatch):
    monkeypatch.setattr(montecarlo._Transitions, "sup", lambda self, fn, w: 0.5 * fn.scalar(0.0))
    with pytest.raises(MajorantError):
        simulate_paths(mm1_catastrophe(1.0, 1.0, 1.0), 1, 5.0, 5, seed=0)


def test_tv_of_exact_draws_is_noise_level(corrected):
    t = np.linspace(0.0, 2.0, 3)
    traj = solve_forward(corrected, 200, 0, t)
    ens = PathEnsemble.from_distribution(traj.at(2.0), 2.0, 5000, seed=4)
    cmp = compare_tv(ens, traj, 2.0)
    assert cmp.consistent
    assert cmp.stderr > 0.0


def test_tv_of_point_mass_is_zero():
    model = QueueModel()
    traj = solve_forward(model, 5, 2, [0.0, 1.0])
    ens = simulate_paths(model, 2, 1.0, 100, seed=0, eval_times=[1.0])
    cmp = compare_tv(ens, traj, 1.0)
    assert cmp.tv == 0.0 and cmp.consistent


def test_tv_flags_wrong_law():
    traj = solve_forward(two_state(1.0, 1.0), 1, 0, [0.0, 1.0])
    ens = PathEnsemble.from_distribution(np.array([0.9, 0.1]), 1.0, 2000, seed=1)
    assert not compare_tv(ens, traj, 1.0).consistent


def test_invalid_arguments():
    with pytest.raises(ValueError):
        simulate_paths(QueueModel(), -1, 1.0, 1, seed=0)
    with pytest.raises(ValueError):
        simulate_paths(QueueModel(), 0, 1.0, 1, seed=0, eval_times=[0.5, 2.0])
    ens = simulate_paths(QueueModel(), 0, 1.0, 1, seed=0)
    with pytest.raises(KeyError):
        ens.distribution(0.55)
