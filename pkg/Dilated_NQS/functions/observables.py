"""
Connected two-point correlations of sigma^z, the chord-length map, and the
log-log power-law fit used to extract the critical exponent eta.

    C(r) = <s_i s_{i+r}> - <s_i><s_{i+r}>,    i = N // 4,  r = 1 .. N // 2
    L_r  = (N / pi) sin(pi r / N)
    C(r) ~ L_r^(-eta)
"""

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from errors import FitError, InvalidInputError
from functions.numerics import map_chunks
from functions.vmc import chunk_ranges
from functions.wavefunction import enumerate_amplitudes, sample_batch

logger = logging.getLogger(__name__)

MIN_CORRELATION_SAMPLES = 100
MIN_FIT_POINTS = 3
FIT_WINDOWS = ("sites", "lags")
CSV_HEADER = ["r", "chord_length", "C", "stderr"]


@dataclass
class CorrelationSeries:
    n_sites: int
    reference_site: int
    r: np.ndarray
    values: np.ndarray
    stderr: np.ndarray

    def __len__(self):
        return len(self.r)


@dataclass
class PowerLawFit:
    eta: float
    eta_stderr: float
    intercept: float
    r2: float
    window: tuple
    excluded_points: int = 0
    n_points: int = 0
    zero_variance: bool = False

    def to_json(self):
        return {
            "eta": self.eta,
            "eta_stderr": self.eta_stderr,
            "R2": self.r2,
            "window": list(self.window),
            "excluded_points": self.excluded_points,
            "intercept": self.intercept,
            "zero_variance": self.zero_variance,
        }


def reference_site(n_sites):
    return n_sites // 4


def separations(n_sites):
    return np.arange(1, n_sites // 2 + 1)


# ---------------------------------------------------------
# Correlation estimators
# ---------------------------------------------------------

def _connected(spins, i, r):
    """Sample-mean connected correlator and its jackknife error for every r."""
    n = len(spins)
    a = spins[:, i].astype(np.float64)
    b = spins[:, (i + r) % spins.shape[1]].astype(np.float64)
    ab = a[:, None] * b

    sum_a, sum_b, sum_ab = a.sum(), b.sum(axis=0), ab.sum(axis=0)
    value = sum_ab / n - (sum_a / n) * (sum_b / n)

    # leave-one-out estimates, shape (n, len(r))
    loo_a = (sum_a - a)[:, None] / (n - 1)
    loo_b = (sum_b[None, :] - b) / (n - 1)
    loo_ab = (sum_ab[None, :] - ab) / (n - 1)
    loo = loo_ab - loo_a * loo_b
    spread = loo - loo.mean(axis=0)
    stderr = np.sqrt((n - 1) / n * np.sum(spread ** 2, axis=0))
    return value, stderr


def measure_correlations(params, n_sites, n_samples, rng, threads=1):
    """
        Monte Carlo estimate of C(r) from one sample set, with jackknife error bars.

        Parameters:
            params (ModelParams): trained network.
            n_sites (int): chain length N.
            n_samples (int): number of samples (>= 100).
            rng (RngStream): stream of sample 0.
            threads (int): worker threads; the result does not depend on it.

        Returns:
            CorrelationSeries
    """
    if n_samples < MIN_CORRELATION_SAMPLES:
        raise InvalidInputError(f"measure_correlations needs at least {MIN_CORRELATION_SAMPLES} samples, got {n_samples}")
    if n_sites < 2:
        raise InvalidInputError("a correlation needs at least two sites")

    def run_chunk(bounds):
        start, stop = bounds
        return sample_batch(params, n_sites, rng.offset(start), stop - start).configs

    spins = np.concatenate(map_chunks(run_chunk, chunk_ranges(n_samples), threads))
    i, r = reference_site(n_sites), separations(n_sites)
    value, stderr = _connected(spins, i, r)
    return CorrelationSeries(n_sites, i, r, value, stderr)


def exact_correlations(params, n_sites):
    """C(r) summed over all 2^N configurations (N <= 20); stderr is zero."""
    configs, log_prob, _ = enumerate_amplitudes(params, n_sites)
    weights = np.exp(log_prob)
    i, r = reference_site(n_sites), separations(n_sites)
    a = configs[:, i].astype(np.float64)
    b = configs[:, (i + r) % n_sites].astype(np.float64)
    value = weights @ (a[:, None] * b) - (weights @ a) * (weights @ b)
    return CorrelationSeries(n_sites, i, r, value, np.zeros(len(r)))


# ---------------------------------------------------------
# Power-law fit
# ---------------------------------------------------------

def chord_length(n_sites, r):
    """(N / pi) sin(pi r / N), for 0 <= r <= N."""
    if not 0 <= r <= n_sites:
        raise InvalidInputError(f"r must lie in [0, {n_sites}], got {r}")
    folded = min(r, n_sites - r)
    return n_sites / math.pi * math.sin(math.pi * folded / n_sites)


def fit_window(n_sites, window="sites"):
    """
        Inclusive (r_min, r_max) of a fit window.

        "sites": the sites i + r span [N/4, 3N/4], i.e. r from 2 to N/2 (r = 1 dropped).
        "lags":  r itself spans [N/4, 3N/4], capped at the measured N/2.
        A (r_min, r_max) pair is used as given.
    """
    if isinstance(window, str):
        if window == "sites":
            return 2, n_sites // 2
        if window == "lags":
            return math.ceil(n_sites / 4), min(3 * n_sites // 4, n_sites // 2)
        raise InvalidInputError(f"unknown fit window {window!r}; expected one of {FIT_WINDOWS}")
    r_min, r_max = window
    return int(r_min), int(r_max)


def fit_power_law(series, window="sites"):
    """
        Least squares of log C(r) against log L_r over the window.

        Points with C(r) <= 0 are dropped and counted, never clamped.

        Returns:
            PowerLawFit: eta = -slope, its standard error and R^2 (0 when the series
            has no variance, with zero_variance set).
    """
    r_min, r_max = fit_window(series.n_sites, window)
    in_window = (series.r >= r_min) & (series.r <= r_max)
    positive = in_window & (series.values > 0)
    excluded = int(np.sum(in_window & ~positive))
    if np.sum(positive) < MIN_FIT_POINTS:
        raise FitError(
            f"only {int(np.sum(positive))} positive points in window r = [{r_min}, {r_max}]"
            f" ({excluded} nonpositive excluded)",
            excluded=excluded,
        )
    if excluded:
        logger.info("power-law fit: %d nonpositive points excluded", excluded)

    x = np.log([chord_length(series.n_sites, int(r)) for r in series.r[positive]])
    y = np.log(series.values[positive])
    zero_variance = bool(np.ptp(y) == 0)
    result = stats.linregress(x, y)
    r2 = 0.0 if zero_variance else float(np.clip(result.rvalue ** 2, 0.0, 1.0))
    return PowerLawFit(
        eta=-float(result.slope),
        eta_stderr=float(result.stderr),
        intercept=float(result.intercept),
        r2=r2,
        window=(r_min, r_max),
        excluded_points=excluded,
        n_points=int(np.sum(positive)),
        zero_variance=zero_variance,
    )


# ---------------------------------------------------------
# Output files
# ---------------------------------------------------------

def write_correlations_csv(series, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r, value, err in zip(series.r, series.values, series.stderr):
            writer.writerow([int(r), repr(chord_length(series.n_sites, int(r))), repr(float(value)), repr(float(err))])


def write_fit_json(fit, path, seed=None):
    report = fit.to_json()
    if seed is not None:
        report["seed"] = seed
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
