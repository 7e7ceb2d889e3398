"""
First-order and exact correlators of the linearized autoregressive model

    P(x_n = +-1 | x_<n) = exp(+-o_n) / (2 cosh o_n),    o_n = b + sum_m k_m x_(n-m)

with C_n = E[x_n x_1] - E[x_n] E[x_1].
"""

import logging

import numpy as np

from errors import InvalidInputError, ResourceError
from functions.numerics import map_chunks
from functions.theory.kernels import TheorySeries, kernel, weak_coupling
from functions.vmc import chunk_ranges
from functions.wavefunction import MAX_ENUMERATION_SITES, basis_configs

logger = logging.getLogger(__name__)

EXACT_BLOCK = 2 ** 14


def capp_series(spec, n_max, kernel_series=None):
    """
        First-order correlator C_1 = beta, C_n = beta sum_(k<n) k_(n-k) C_k.

        Parameters:
            spec (LinearModelSpec): model.
            n_max (int): last index computed.
            kernel_series (TheorySeries | None): precomputed kernel up to lag n_max - 1.

        Returns:
            TheorySeries labelled "capp".
    """
    if n_max < 1:
        raise InvalidInputError(f"n_max must be >= 1, got {n_max}")
    if kernel_series is None:
        kernel_series = kernel(spec, n_max - 1)
    k = np.asarray(kernel_series.values[: n_max - 1])
    if len(k) < n_max - 1:
        raise InvalidInputError(f"kernel has {len(k)} lags, the recursion needs {n_max - 1}")
    weak_coupling(spec, n_max - 1)

    beta = spec.beta
    C = np.zeros(n_max)
    C[0] = beta
    for n in range(2, n_max + 1):
        C[n - 1] = beta * np.dot(k[n - 2::-1], C[: n - 1])
    return TheorySeries("capp", C, spec)


def exact_correlator(spec, n_sites, threads=1):
    """
        C_n for n = 1 .. n_sites by summing over all 2^n_sites sequences, each weighted
        by its product of logistic conditionals.

        The sequences are split into blocks of EXACT_BLOCK rows; block sums are
        accumulated in block order on up to `threads` workers.
    """
    if n_sites < 1:
        raise InvalidInputError(f"n_sites must be >= 1, got {n_sites}")
    if n_sites > MAX_ENUMERATION_SITES:
        raise ResourceError(f"exact correlator enumeration is limited to {MAX_ENUMERATION_SITES} sites")

    k = kernel(spec, n_sites - 1).values
    configs = basis_configs(n_sites)

    def block_moments(bounds):
        start, stop = bounds
        x = configs[start:stop].astype(np.float64)
        fields = np.full(x.shape, spec.bias)
        for n in range(1, n_sites):
            fields[:, n] += x[:, n - 1::-1] @ k[:n]
        # log P(x_n | x_<n) = -log(1 + exp(-2 x_n o_n))
        weights = np.exp(-np.sum(np.logaddexp(0.0, -2.0 * x * fields), axis=1))
        return weights @ x, weights @ (x * x[:, :1])

    mean = np.zeros(n_sites)
    second = np.zeros(n_sites)
    for first_moment, cross_moment in map_chunks(block_moments, chunk_ranges(len(configs), EXACT_BLOCK), threads):
        mean += first_moment
        second += cross_moment
    C = second - mean * mean[0]
    return TheorySeries("exact", C, spec)
