"""
Linearized recurrent models and their input-to-output kernels.

With a diagonal recurrent matrix diag(lambda_j) and couplings c_j = u_j w_j, the
vanilla kernel is k_m = sum_j c_j lambda_j^(m-1). The dilated kernel adds the
layered recursions h^(l)_n = h^(l-1)_n + lambda h^(l)_(n - B^(l-1)) and is obtained
as the impulse response of that filter cascade.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal

from errors import ConfigError, InvalidInputError
from functions.theory.digits import digit_sum

logger = logging.getLogger(__name__)

WEAK_COUPLING_LIMIT = 0.1


class ModelMode(str, Enum):
    VANILLA = "vanilla"
    DILATED = "dilated"


@dataclass(frozen=True)
class LinearModelSpec:
    """
    Hidden modes lambda_j in (0, 1), couplings c_j, output bias b and, for the
    dilated mode, base B and depth L.
    """

    mode: ModelMode
    lambdas: tuple
    couplings: tuple
    bias: float = 0.0
    base: int = 2
    depth: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", ModelMode(self.mode))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        object.__setattr__(self, "couplings", tuple(float(x) for x in self.couplings))
        if len(self.lambdas) != len(self.couplings):
            raise ConfigError(f"{len(self.lambdas)} lambdas but {len(self.couplings)} couplings")
        for lam in self.lambdas:
            if not 0.0 < lam < 1.0:
                raise ConfigError(f"lambda = {lam} violates the stability constraint 0 < lambda < 1")
        if not all(math.isfinite(c) for c in self.couplings) or not math.isfinite(self.bias):
            raise ConfigError("couplings and bias must be finite")
        if int(self.base) != self.base or self.base < 2:
            raise ConfigError(f"dilation base must be an integer >= 2, got {self.base}")
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")

    @property
    def beta(self):
        """1 - tanh(b)^2, the slope of the output nonlinearity at the bias."""
        return 1.0 - math.tanh(self.bias) ** 2

    @property
    def n_modes(self):
        return len(self.lambdas)


@dataclass
class TheorySeries:
    """Coefficients indexed from 1: values[0] is k_1 (or C_1)."""

    label: str
    values: np.ndarray
    spec: LinearModelSpec

    @property
    def index(self):
        return np.arange(1, len(self.values) + 1)

    def at(self, n):
        return float(self.values[n - 1])

    def __len__(self):
        return len(self.values)


def _require_mode(spec, mode, op):
    if spec.mode is not mode:
        raise ConfigError(f"{op} needs a {mode.value} spec, got {spec.mode.value}")


def _check_length(m_max):
    if m_max < 0:
        raise InvalidInputError(f"series length must be >= 0, got {m_max}")


# ---------------------------------------------------------
# Kernels
# ---------------------------------------------------------

def kernel_vanilla(spec, m_max):
    """k_m = sum_j c_j lambda_j^(m-1), m = 1 .. m_max."""
    _require_mode(spec, ModelMode.VANILLA, "kernel_vanilla")
    _check_length(m_max)
    m = np.arange(1, m_max + 1)
    values = np.zeros(m_max)
    for lam, c in zip(spec.lambdas, spec.couplings):
        values += c * lam ** (m - 1)
    return TheorySeries("kernel", values, spec)


def _impulse_response(lam, base, depth, m_max):
    """Top-layer response at lags 0..m_max to a unit input at lag 0."""
    impulse = np.zeros(m_max + 1)
    impulse[0] = 1.0
    # layer 1: the input edge costs one lag, then unit-stride recurrence
    h = signal.lfilter([0.0, 1.0], [1.0, -lam], impulse)
    stride = base
    for _ in range(1, depth):
        feedback = np.zeros(stride + 1)
        feedback[0], feedback[stride] = 1.0, -lam
        h = signal.lfilter([1.0], feedback, h)
        stride *= base
    return h


def kernel_dilated(spec, m_max):
    """
        Exact dilated kernel k_m for m = 1 .. m_max, as the impulse response of the
        layered linear recursions. Equals sum_j c_j sum_paths lambda_j^(jumps).
    """
    _require_mode(spec, ModelMode.DILATED, "kernel_dilated")
    _check_length(m_max)
    values = np.zeros(m_max)
    for lam, c in zip(spec.lambdas, spec.couplings):
        if c != 0.0:
            values += c * _impulse_response(lam, spec.base, spec.depth, m_max)[1:]
    return TheorySeries("kernel", values, spec)


def kernel(spec, m_max):
    if spec.mode is ModelMode.VANILLA:
        return kernel_vanilla(spec, m_max)
    return kernel_dilated(spec, m_max)


def digit_sum_lower_bound(spec, m_max):
    """Single-path bound k_m >= c_j* lambda_j*^(s_B(m-1)) for the dominant mode j*."""
    j = dominant_mode(spec)
    lam, c = spec.lambdas[j], spec.couplings[j]
    return np.array([c * lam ** digit_sum(m - 1, spec.base) for m in range(1, m_max + 1)])


# ---------------------------------------------------------
# Exponents and coupling strength
# ---------------------------------------------------------

def alpha_exponents(spec):
    """alpha_j = -(B - 1) log_B lambda_j for every mode."""
    return [-(spec.base - 1) * math.log(lam) / math.log(spec.base) for lam in spec.lambdas]


def dominant_mode(spec):
    """Index of the positive-coupling mode with the largest lambda (smallest alpha)."""
    candidates = [j for j, c in enumerate(spec.couplings) if c > 0]
    if not candidates:
        raise ConfigError("no mode has a positive coupling")
    return max(candidates, key=lambda j: spec.lambdas[j])


def power_law_bound(spec, n_max):
    """
        c_j* lambda_j*^(B-1) (n-1)^(-alpha_j*) for n = 2 .. n_max, the envelope the
        dilated kernel k_(n-1) stays above.
    """
    j = dominant_mode(spec)
    alpha = alpha_exponents(spec)[j]
    n = np.arange(2, n_max + 1)
    return spec.couplings[j] * spec.lambdas[j] ** (spec.base - 1) * (n - 1.0) ** (-alpha)


def weak_coupling(spec, m_max=None):
    """
        Weak-coupling parameter epsilon.

        Vanilla: sum_j |c_j| / (1 - lambda_j). Dilated: sum of |k_m| up to lag m_max
        (the sum grows with the analysed range). Logs a warning at epsilon >= 0.1.
    """
    if spec.mode is ModelMode.VANILLA:
        eps = sum(abs(c) / (1.0 - lam) for lam, c in zip(spec.lambdas, spec.couplings))
    else:
        if m_max is None:
            raise InvalidInputError("the dilated epsilon needs the analysed lag range m_max")
        eps = float(np.sum(np.abs(kernel_dilated(spec, m_max).values)))
    if eps >= WEAK_COUPLING_LIMIT:
        logger.warning("weak-coupling epsilon = %.4g >= %.1f; first-order results may be inaccurate",
                       eps, WEAK_COUPLING_LIMIT)
    return eps
