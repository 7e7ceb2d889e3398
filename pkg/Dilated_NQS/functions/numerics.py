"""
Dense numerics shared by every other module.

Vectors and matrices are plain float64 numpy arrays; the activations below act on
the last axis so they work unchanged on a single vector or on a batch of them.
Random draws come from RngStream, a counter-based (Philox) stream addressed by
(seed, stream index) so that per-sample streams never depend on evaluation order.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from errors import InvalidInputError, ShapeError

UINT64_MAX = 2**64 - 1


def _finite(v, name="input"):
    """Convert to a float array and reject NaN/inf entries."""
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


# ---------------------------------------------------------
# Output-layer activations
# ---------------------------------------------------------

def softmax(v):
    """
        Softmax over the last axis, max-subtracted so large logits cannot overflow.

        Parameters:
            v (array): logits, shape (..., k).

        Returns:
            array: positive entries summing to one along the last axis.
    """
    return special.softmax(_finite(v, "softmax input"), axis=-1)


def log_softmax(v):
    """Log of softmax(v) computed without forming the probabilities."""
    return special.log_softmax(_finite(v, "log_softmax input"), axis=-1)


def softsign_pi(v):
    """Phase activation pi * v / (1 + |v|); maps the real line into (-pi, pi)."""
    arr = _finite(v, "softsign input")
    return np.pi * arr / (1.0 + np.abs(arr))


def softsign_pi_derivative(v):
    """d/dv of softsign_pi, used by the phase head's backward pass."""
    arr = _finite(v, "softsign input")
    return np.pi / (1.0 + np.abs(arr)) ** 2


# ---------------------------------------------------------
# Cell activations and linear algebra
# ---------------------------------------------------------

def sigmoid(v):
    return special.expit(_finite(v, "sigmoid input"))


def tanh(v):
    return np.tanh(_finite(v, "tanh input"))


def matvec(matrix, v):
    """
        Apply `matrix` to the last axis of `v`.

        Works for one vector (d_in,) or a batch (batch, d_in); raises ShapeError when
        the inner dimensions disagree.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    v = np.asarray(v)
    if matrix.ndim != 2 or v.shape[-1] != matrix.shape[1]:
        raise ShapeError(
            f"cannot apply a {matrix.shape} matrix to a vector of length {v.shape[-1]}"
        )
    return v @ matrix.T


def concat(a, b):
    """Concatenate along the last axis; leading (batch) dimensions must agree."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"cannot concatenate shapes {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=-1)


# ---------------------------------------------------------
# Ordered fan-out
# ---------------------------------------------------------

def map_chunks(fn, items, threads=1):
    """fn over items, results in item order whatever the thread count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------
# Counter-based random streams
# ---------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """
    Reproducible random stream addressed by a 64-bit seed and a 64-bit stream index.

    Both numbers are packed into the 128-bit Philox key, so equal (seed, stream)
    pairs replay the same draws and different stream indices give independent
    sequences. Sample k of a batch uses stream `first + k`.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not 0 <= int(value) <= UINT64_MAX:
                raise InvalidInputError(f"{name} must fit in 64 unsigned bits, got {value}")

    def generator(self):
        """A fresh numpy Generator positioned at the start of this stream."""
        key = (int(self.stream) << 64) | int(self.seed)
        return np.random.Generator(np.random.Philox(key=key))

    def uniform(self, size):
        """First `size` uniform doubles in [0, 1) of this stream."""
        return self.generator().random(size)

    def offset(self, k):
        """The stream k positions further along (sample k of a batch)."""
        return RngStream(self.seed, int(self.stream) + int(k))
