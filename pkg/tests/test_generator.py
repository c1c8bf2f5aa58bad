import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catbounds.catalog import example_model
from catbounds.generator import AffineGenerator, apply_weights, build_A, build_A_star
from catbounds.model import BSequence, LevelJumpArrivals, QueueModel, TimeFunction, WeightSequence

from _models import random_model, two_state

pytestmark = pytest.mark.filterwarnings("ignore:truncation N=")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 12), t=st.floats(0.0, 50.0))
def test_reflecting_columns_sum_to_zero(seed, N, t):
    model = random_model(np.random.default_rng(seed), N)
    A = build_A(model, N, t)
    assert np.abs(A.column_sums()).max() <= 1e-12
    off = A.toarray() - np.diag(np.diag(A.toarray()))
    assert off.min() >= 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 12), t=st.floats(0.0, 50.0))
def test_defect_tracking_columns_lose_cut_outflow(seed, N, t):
    model = random_model(np.random.default_rng(seed), N)
    A = build_A(model, N, t, closure="defect_tracking")
    sums = A.column_sums()
    assert sums.max() <= 1e-12
    # a column can only lose arrival outflow
    for j in range(N + 1):
        assert -sums[j] <= model.arrival_outflow(j, t) + 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 12), t=st.floats(0.0, 50.0))
def test_reduced_form_identity(seed, N, t):
    rng = np.random.default_rng(seed)
    model = random_model(rng, N)
    A = build_A(model, N, t).toarray()
    A_star, g = build_A_star(model, N, t)
    p = rng.dirichlet(np.ones(N + 1))
    assert np.abs(A @ p - (A_star.toarray() @ p + g.values)).max() <= 1e-14
    assert g.beta_star == pytest.approx(model.beta_star(t))


def test_level_jump_orientation():
    model = example_model("published")
    A = build_A(model, 10, 0.0).toarray()
    b = BSequence.cubic()
    lam = 4.0
    # column j holds the flows out of state j: arrival to i > j at lam * b_i
    assert A[5, 2] == pytest.approx(lam * b.b(5))
    assert A[1, 2] == pytest.approx(1.0)  # one service
    assert A[0, 3] == pytest.approx(2.0 + (1.0 + 0.0) / 3)  # catastrophe gamma_3(0)
    assert A[2, 5] == 0.0


def test_defect_tracking_loss_is_cut_tail():
    model = example_model("published")
    N, t = 12, 0.1
    sums = build_A(model, N, t, closure="defect_tracking").column_sums()
    lam = model.arrivals.rate(t)
    assert np.allclose(sums, -lam * BSequence.cubic().tail_mass(N + 1), atol=1e-14)


def test_two_state_matrix():
    A = build_A(two_state(1.3, 0.7), 1, 0.0).toarray()
    assert np.allclose(A, [[-1.3, 0.7], [1.3, -0.7]])


def test_apply_weights_scaling():
    model = example_model("corrected")
    A_star, _ = build_A_star(model, 8, 0.2)
    w = WeightSequence.linear()
    B = apply_weights(A_star, w).toarray()
    d = w.d(np.arange(9))
    assert np.allclose(B, d[:, None] * A_star.toarray() / d[None, :])
    with pytest.raises(ValueError):
        apply_weights(build_A(model, 8, 0.2), w)


def test_snapshot_matches_affine_sum():
    gen = AffineGenerator(example_model("published"), 30)
    t = 0.37
    direct = sum(c * tm.matrix.toarray() for c, tm in zip(gen.coefficients(t), gen.terms))
    assert np.allclose(gen.snapshot(t).toarray(), direct, atol=1e-15)
    p = np.random.default_rng(0).random((31, 3))
    assert np.allclose(gen.matvec(t, p), direct @ p, atol=1e-14)


def test_vectorized_coefficients():
    gen = AffineGenerator(example_model("published"), 5)
    t = np.linspace(0.0, 1.0, 7)
    C = gen.coefficients(t)
    assert C.shape == (7, len(gen.terms))
    assert np.allclose(C[3], gen.coefficients(t[3]))


def test_coo_text_sorted_by_column():
    lines = build_A(two_state(1.0, 2.0), 1, 0.0).coo_text().splitlines()
    assert lines == ["0 0 -1", "1 0 1", "0 1 2", "1 1 -2"]


def test_invalid_inputs():
    model = example_model("published")
    with pytest.raises(ValueError):
        build_A(model, 0, 0.0)
    with pytest.raises(ValueError):
        build_A(model, 5, -1.0)
    with pytest.raises(ValueError):
        build_A(model, 5, 0.0, closure="absorbing")


def test_warns_when_truncation_drops_most_arrivals():
    heavy = QueueModel(arrivals=LevelJumpArrivals(
        TimeFunction.constant(1.0), BSequence("explicit", (0.1, 0.1, 0.1, 0.7))))
    with pytest.warns(UserWarning, match="discards"):
        build_A(heavy, 2, 0.0)

