import numpy as np
import pytest

from errors import InvalidInputError, ResourceError
from functions.numerics import RngStream
from functions.rnn import max_depth, zero_params
from functions.wavefunction import (
    basis_configs,
    enumerate_amplitudes,
    enumerate_probabilities,
    evaluate,
    evaluate_batch,
    grad_log_amplitude,
    sample,
    sample_batch,
    spin_config,
)


def test_spin_config_validation():
    assert spin_config([1, -1, 1]).dtype == np.int8
    with pytest.raises(InvalidInputError):
        spin_config([1, 0, -1])
    with pytest.raises(InvalidInputError):
        spin_config([])


def test_basis_order_is_most_significant_site_first():
    configs = basis_configs(2)
    assert configs.tolist() == [[1, 1], [1, -1], [-1, 1], [-1, -1]]
    with pytest.raises(ResourceError):
        basis_configs(21)


@pytest.mark.parametrize("seed", range(20))
def test_probabilities_are_normalized_across_sizes(make_params, seed):
    n_sites = 2 + seed % 11
    gen = np.random.default_rng(seed)
    n_layers = int(gen.integers(1, min(3, max_depth(n_sites)) + 1))
    params = make_params(n_layers, int(gen.integers(1, 5)), complex_phase=bool(seed % 2), seed=seed)
    _, log_prob, _ = enumerate_amplitudes(params, n_sites)
    assert np.sum(np.exp(log_prob)) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("complex_phase", [False, True])
def test_probabilities_are_normalized(make_params, complex_phase):
    params = make_params(3, 4, complex_phase=complex_phase, seed=5)
    _, log_prob, phase = enumerate_amplitudes(params, 8)
    assert np.sum(np.exp(log_prob)) == pytest.approx(1.0, abs=1e-12)
    assert np.all(log_prob <= 0.0)
    if complex_phase:
        assert np.all(np.abs(phase) < 8 * np.pi)
    else:
        assert np.all(phase == 0.0)


def test_zero_parameters_give_uniform_distribution():
    params = zero_params(2, 3, complex_phase=True)
    result = evaluate(params, [1, -1, -1, 1])
    assert result.log_prob == pytest.approx(4 * np.log(0.5))
    assert result.phase == 0.0
    assert result.log_psi == pytest.approx(complex(2 * np.log(0.5), 0.0))


def test_single_and_batch_evaluation_agree(make_params, random_configs):
    params = make_params(2, 3, complex_phase=True, seed=1)
    configs = random_configs(5, 6, seed=2)
    log_prob, phase = evaluate_batch(params, configs)
    for k, cfg in enumerate(configs):
        single = evaluate(params, cfg)
        assert single.log_prob == pytest.approx(log_prob[k], abs=1e-13)
        assert single.phase == pytest.approx(phase[k], abs=1e-13)


# ---------------------------------------------------------
# Sampling
# ---------------------------------------------------------

def test_sample_streams_are_per_sample(make_params):
    params = make_params(2, 3, seed=3)
    rng = RngStream(42, 1000)
    batch = sample_batch(params, 6, rng, 10)
    for k in (0, 4, 9):
        assert np.array_equal(batch.configs[k], sample(params, 6, rng.offset(k)))

    # a larger batch over the same streams starts with the same samples
    bigger = sample_batch(params, 6, rng, 15)
    assert np.array_equal(bigger.configs[:10], batch.configs)


def test_sampled_log_prob_matches_evaluation(make_params):
    params = make_params(2, 4, complex_phase=True, seed=6)
    batch = sample_batch(params, 7, RngStream(1, 0), 20)
    log_prob, phase = evaluate_batch(params, batch.configs)
    assert np.allclose(batch.log_prob, log_prob, atol=1e-13)
    assert np.allclose(batch.phase, phase, atol=1e-13)
    assert batch.tape is None


def test_sample_histogram_matches_exact_distribution(make_params):
    params = make_params(2, 3, seed=7)
    n_sites, n_samples = 3, 200_000
    exact = enumerate_probabilities(params, n_sites)
    configs = sample_batch(params, n_sites, RngStream(9, 0), n_samples).configs

    counts = {}
    for cfg in map(tuple, configs.tolist()):
        counts[cfg] = counts.get(cfg, 0) + 1
    tv = 0.5 * sum(abs(counts.get(cfg, 0) / n_samples - p) for cfg, p in exact.items())
    assert tv < 0.01


def test_recorded_sample_keeps_tape(make_params):
    params = make_params(1, 2, seed=0)
    batch = sample_batch(params, 3, RngStream(0, 0), 4, record=True)
    assert batch.tape is not None and batch.tape.n_sites == 3
    assert batch.logits_p.shape == (4, 3, 2)


# ---------------------------------------------------------
# Log-derivatives
# ---------------------------------------------------------

@pytest.mark.parametrize("cell_type", ["gru", "vanilla"])
def test_grad_log_amplitude_matches_finite_differences(make_params, numeric_gradient, relative_error, cell_type):
    params = make_params(2, 3, complex_phase=True, seed=11, cell_type=cell_type)
    sigma = np.array([1, -1, -1, 1, 1])
    analytic = grad_log_amplitude(params, sigma)

    half_log_prob = numeric_gradient(lambda p: 0.5 * evaluate(p, sigma).log_prob, params)
    phase = numeric_gradient(lambda p: evaluate(p, sigma).phase, params)
    expected = half_log_prob.map(lambda a: a.astype(np.complex128))
    for (_, e), (_, ph) in zip(expected.arrays(), phase.arrays()):
        e -= 1j * ph
    assert relative_error(analytic, expected) < 1e-6


def test_real_model_log_derivative_has_no_imaginary_part(make_params):
    params = make_params(2, 2, seed=12)
    grad = grad_log_amplitude(params, [1, 1, -1])
    assert all(np.all(a.imag == 0.0) for _, a in grad.arrays())
