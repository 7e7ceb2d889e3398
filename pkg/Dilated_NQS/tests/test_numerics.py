import numpy as np
import pytest

from errors import InvalidInputError, ShapeError
from functions.numerics import (
    RngStream,
    concat,
    log_softmax,
    matvec,
    sigmoid,
    softmax,
    softsign_pi,
    softsign_pi_derivative,
)


def test_softmax_sums_to_one_for_huge_logits():
    p = softmax(np.array([1000.0, -1000.0, 999.0]))
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(p >= 0.0)


def test_softmax_batch_rows_are_distributions():
    gen = np.random.default_rng(0)
    p = softmax(gen.normal(scale=50.0, size=(7, 2)))
    assert p.shape == (7, 2)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-15)


def test_log_softmax_matches_log_of_softmax():
    v = np.array([0.3, -1.2])
    assert np.allclose(log_softmax(v), np.log(softmax(v)))
    assert np.all(np.isfinite(log_softmax(np.array([800.0, -800.0]))))


def test_non_finite_input_is_rejected():
    with pytest.raises(InvalidInputError):
        softmax(np.array([np.nan, 0.0]))
    with pytest.raises(InvalidInputError):
        sigmoid(np.array([np.inf]))


def test_softsign_pi_stays_inside_open_interval():
    v = np.array([-1e12, -3.0, 0.0, 2.0, 1e12])
    out = softsign_pi(v)
    assert np.all(np.abs(out) < np.pi)
    assert out[2] == 0.0
    assert softsign_pi(np.array([1.0]))[0] == pytest.approx(np.pi / 2)


def test_softsign_derivative_matches_central_difference():
    v = np.array([-2.5, -0.4, 0.7, 3.0])
    h = 1e-6
    numeric = (softsign_pi(v + h) - softsign_pi(v - h)) / (2 * h)
    assert np.allclose(softsign_pi_derivative(v), numeric, rtol=1e-7)


def test_matvec_single_and_batch():
    W = np.arange(6.0).reshape(2, 3)
    x = np.array([1.0, 0.0, -1.0])
    assert np.allclose(matvec(W, x), W @ x)
    batch = np.stack([x, 2 * x])
    assert np.allclose(matvec(W, batch), batch @ W.T)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        matvec(np.zeros((2, 3)), np.zeros(4))
    with pytest.raises(ShapeError):
        concat(np.zeros((2, 3)), np.zeros((3, 1)))
    assert concat(np.zeros((2, 3)), np.ones((2, 1))).shape == (2, 4)


# ---------------------------------------------------------
# RngStream
# ---------------------------------------------------------

def test_same_seed_and_stream_replay_the_same_draws():
    a = RngStream(5, 17).uniform(10)
    b = RngStream(5, 17).uniform(10)
    assert np.array_equal(a, b)
    assert np.all((a >= 0.0) & (a < 1.0))


def test_different_streams_and_seeds_differ():
    base = RngStream(5, 17).uniform(10)
    assert not np.array_equal(base, RngStream(5, 18).uniform(10))
    assert not np.array_equal(base, RngStream(6, 17).uniform(10))


def test_offset_addresses_a_later_stream():
    assert RngStream(3, 10).offset(5) == RngStream(3, 15)
    assert np.array_equal(RngStream(3, 10).offset(5).uniform(4), RngStream(3, 15).uniform(4))


def test_full_64_bit_range_is_accepted():
    RngStream(2**64 - 1, 2**64 - 1).uniform(2)
    with pytest.raises(InvalidInputError):
        RngStream(2**64, 0)
    with pytest.raises(InvalidInputError):
        RngStream(0, -1)
