"""
Autoregressive wave function built on the dilated RNN.

    psi(sigma) = sqrt(P(sigma)) * exp(i * phi(sigma))
    P(sigma)   = prod_n P(sigma_n | sigma_<n)       (softmax head)
    phi(sigma) = sum_n  phi(sigma_n | sigma_<n)     (pi * softsign head)

Sampling is exact ancestral sampling: site n is drawn from its conditional given the
spins already drawn, using one uniform per site from the sample's own RngStream.
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import InvalidInputError, ResourceError
from functions.numerics import log_softmax, softmax, softsign_pi, softsign_pi_derivative
from functions.rnn import (
    INPUT_SIZE,
    DilatedPass,
    check_depth,
    dilated_backward,
    dilated_forward,
    one_hot,
)

logger = logging.getLogger(__name__)

MAX_ENUMERATION_SITES = 20
ENUMERATION_CHUNK = 4096


@dataclass(frozen=True)
class AmplitudeResult:
    """log P(sigma) (<= 0) and the total phase phi(sigma)."""

    log_prob: float
    phase: float

    @property
    def log_psi(self):
        return complex(0.5 * self.log_prob, self.phase)


@dataclass
class SampleBatch:
    """
    Configurations drawn from one parameter snapshot, with everything the energy and
    gradient estimators need.

    `weights` is None for Monte Carlo batches (uniform 1/N_s); an enumerated batch
    carries the exact probabilities instead. `tape`, `logits_p` and `logits_phi`
    are kept when the batch was drawn with recording switched on; a chunked batch
    lists its per-chunk sub-batches in `parts` instead.
    """

    configs: np.ndarray
    log_prob: np.ndarray
    phase: np.ndarray
    local_energies: np.ndarray = None
    weights: np.ndarray = None
    tape: object = None
    logits_p: np.ndarray = None
    logits_phi: np.ndarray = None
    parts: list = None

    def __len__(self):
        return len(self.configs)


def spin_config(values):
    """Validate a configuration: at least one site, every entry exactly +1 or -1."""
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size < 1:
        raise InvalidInputError("a spin configuration is a non-empty 1-D sequence")
    if not np.all(np.abs(arr) == 1):
        raise InvalidInputError(f"spins must be exactly +1 or -1, got {arr}")
    return arr.astype(np.int8)


# ---------------------------------------------------------
# Amplitude bookkeeping
# ---------------------------------------------------------

def _selected(values, sigma):
    """Pick the entry of the last axis that one-hot(sigma) selects."""
    index = (np.asarray(sigma) > 0).astype(np.intp)[..., None]
    return np.take_along_axis(values, index, axis=-1)[..., 0]


def amplitude_terms(logits_p, logits_phi, sigma):
    """Summed log-conditionals and phases for a batch: arrays of shape (batch,)."""
    log_prob = _selected(log_softmax(logits_p), sigma).sum(axis=1)
    if logits_phi is None:
        phase = np.zeros(log_prob.shape)
    else:
        phase = _selected(softsign_pi(logits_phi), sigma).sum(axis=1)
    return log_prob, phase


def log_psi(log_prob, phase):
    """log psi = 1/2 log P + i phi, elementwise."""
    return 0.5 * np.asarray(log_prob) + 1j * np.asarray(phase)


# ---------------------------------------------------------
# Sampling
# ---------------------------------------------------------

def sample_batch(params, n_sites, rng, n_samples, record=False):
    """
        Draw `n_samples` configurations; sample k uses stream rng.offset(k).

        Parameters:
            params (ModelParams): network parameters.
            n_sites (int): chain length N >= 1.
            rng (RngStream): stream of sample 0.
            n_samples (int): batch size.
            record (bool): keep the gradient tape and logits for a backward pass.

        Returns:
            SampleBatch
    """
    if n_sites < 1:
        raise InvalidInputError("n_sites must be at least 1")
    check_depth(params, n_sites)

    uniforms = np.stack([rng.offset(k).uniform(n_sites) for k in range(n_samples)])
    run = DilatedPass(params, n_samples, record=record)
    spins = np.empty((n_samples, n_sites), dtype=np.int8)
    logits_p = np.empty((n_samples, n_sites, INPUT_SIZE))
    logits_phi = np.empty((n_samples, n_sites, INPUT_SIZE)) if params.is_complex else None

    x_in = np.zeros((n_samples, INPUT_SIZE))
    for n in range(n_sites):
        lp, lphi = run.step(x_in)
        logits_p[:, n] = lp
        if logits_phi is not None:
            logits_phi[:, n] = lphi
        p_up = softmax(lp)[:, 1]
        spins[:, n] = np.where(uniforms[:, n] < p_up, 1, -1)
        x_in = one_hot(spins[:, n])

    log_prob, phase = amplitude_terms(logits_p, logits_phi, spins)
    batch = SampleBatch(configs=spins, log_prob=log_prob, phase=phase)
    if record:
        batch.tape = run.tape
        batch.logits_p = logits_p
        batch.logits_phi = logits_phi
    return batch


def sample(params, n_sites, rng):
    """One configuration drawn from stream `rng`."""
    return sample_batch(params, n_sites, rng, 1).configs[0]


# ---------------------------------------------------------
# Evaluation
# ---------------------------------------------------------

def evaluate_batch(params, sigmas):
    """(log_prob, phase) arrays for a batch of configurations."""
    sigmas = np.atleast_2d(sigmas)
    logits_p, logits_phi, _ = dilated_forward(params, sigmas, record=False)
    return amplitude_terms(logits_p, logits_phi, sigmas)


def evaluate(params, sigma):
    """AmplitudeResult of a single configuration."""
    sigma = spin_config(sigma)
    log_prob, phase = evaluate_batch(params, sigma[None, :])
    return AmplitudeResult(float(log_prob[0]), float(phase[0]))


# ---------------------------------------------------------
# Log-derivatives
# ---------------------------------------------------------

def upstream_gradients(logits_p, logits_phi, sigma, weight_p, weight_phi=None):
    """
        Upstream gradients for dilated_backward of the objective

            sum_k weight_p[k] * log P(sigma_k) + weight_phi[k] * phi(sigma_k)

        Weights have shape (batch,) and may be complex.
    """
    hot = one_hot(sigma)
    dlogits_p = (hot - softmax(logits_p)) * np.asarray(weight_p)[:, None, None]
    dlogits_phi = None
    if logits_phi is not None and weight_phi is not None:
        dlogits_phi = hot * softsign_pi_derivative(logits_phi) * np.asarray(weight_phi)[:, None, None]
    return dlogits_p, dlogits_phi


def grad_log_amplitude(params, sigma):
    """
        Conjugated log-derivative d/dtheta log psi*(sigma) = 1/2 dlogP - i dphi.

        Returns:
            ModelParams: complex gradient record (imaginary part zero for real models).
    """
    sigma = spin_config(sigma)[None, :]
    logits_p, logits_phi, tape = dilated_forward(params, sigma, record=True)
    dlogits_p, dlogits_phi = upstream_gradients(
        logits_p, logits_phi, sigma,
        weight_p=np.array([0.5 + 0j]),
        weight_phi=np.array([-1j]),
    )
    return dilated_backward(params, tape, dlogits_p.astype(np.complex128), dlogits_phi)


# ---------------------------------------------------------
# Enumeration oracle
# ---------------------------------------------------------

def basis_configs(n_sites):
    """
        All 2^N configurations in computational-basis order.

        Row i is basis state |i>; site 0 is the most significant bit and bit value 0
        is spin +1, matching kron products of sigma^z = diag(1, -1).
    """
    if n_sites > MAX_ENUMERATION_SITES:
        raise ResourceError(f"enumerating 2^{n_sites} configurations is beyond the limit of 2^{MAX_ENUMERATION_SITES}")
    index = np.arange(2 ** n_sites)[:, None]
    bits = (index >> np.arange(n_sites - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)


def enumerate_amplitudes(params, n_sites):
    """(configs, log_prob, phase) over the full basis, evaluated in chunks."""
    configs = basis_configs(n_sites)
    log_prob = np.empty(len(configs))
    phase = np.empty(len(configs))
    for start in range(0, len(configs), ENUMERATION_CHUNK):
        stop = start + ENUMERATION_CHUNK
        log_prob[start:stop], phase[start:stop] = evaluate_batch(params, configs[start:stop])
    return configs, log_prob, phase


def enumerate_probabilities(params, n_sites):
    """
        Exact P(sigma) for every basis state.

        Returns:
            dict: tuple(spins) -> probability.
    """
    configs, log_prob, _ = enumerate_amplitudes(params, n_sites)
    return {tuple(int(s) for s in cfg): float(p) for cfg, p in zip(configs, np.exp(log_prob))}
