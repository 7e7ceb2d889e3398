"""
Variational Monte Carlo building blocks: sample batches with local energies, the
energy and gradient estimators, the Adam update, run records and checkpoints.

Parallel work is cut into fixed chunks of SAMPLE_CHUNK samples. Chunk k always holds
samples [k*SAMPLE_CHUNK, (k+1)*SAMPLE_CHUNK) and chunk results are reduced in chunk
order, so the thread count never changes a single bit of the output.
"""

import csv
import logging
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from errors import CheckpointError, InvalidInputError
from functions.hamiltonians import HamiltonianSpec, local_energies
from functions.numerics import map_chunks
from functions.rnn import ModelParams, dilated_backward, dilated_forward, zero_params
from functions.wavefunction import (
    SampleBatch,
    enumerate_amplitudes,
    evaluate_batch,
    log_psi,
    sample_batch,
    upstream_gradients,
)

logger = logging.getLogger(__name__)

SAMPLE_CHUNK = 32

# Stream namespaces: training iteration t uses streams [t*N_s, (t+1)*N_s).
EVAL_STREAM_BASE = 2 ** 62
MEASURE_STREAM_BASE = 2 ** 62 + 2 ** 61
INIT_STREAM = 2 ** 63

CHECKPOINT_MAGIC = b"DNQS"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<IIIBQ")
_FLAG_COMPLEX = 1
_FLAG_VANILLA = 2

METRICS_HEADER = ["iter", "energy_mean", "energy_stderr", "grad_norm", "seconds"]


@dataclass
class VmcConfig:
    """Everything a training run needs; defaults are the TFIM benchmark settings."""

    hamiltonian: HamiltonianSpec
    n_layers: int
    hidden_size: int = 32
    complex_phase: bool = False
    cell_type: str = "gru"
    n_samples: int = 100
    n_samples_eval: int = 100_000
    learning_rate: float = 1e-4
    n_iterations: int = 100_000
    seed: int = 1
    checkpoint_every: int = 1000
    threads: int = 1
    max_seconds: Optional[float] = None

    def __post_init__(self):
        for name in ("n_layers", "hidden_size", "n_samples", "n_samples_eval", "threads"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_samples < 2:
            raise InvalidInputError("n_samples must be at least 2 for an error bar")
        if self.n_iterations < 0 or self.checkpoint_every < 1:
            raise InvalidInputError("n_iterations must be >= 0 and checkpoint_every >= 1")
        if self.learning_rate <= 0:
            raise InvalidInputError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class AdamState:
    """First/second moments per parameter array (declaration order) and the step count."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params):
        arrays = [a for _, a in params.arrays()]
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays])


@dataclass
class RunRecord:
    """Append-only per-iteration telemetry (the training curve)."""

    iterations: list = field(default_factory=list)
    energy_mean: list = field(default_factory=list)
    energy_stderr: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def append(self, iteration, mean, stderr, grad_norm, seconds):
        self.iterations.append(int(iteration))
        self.energy_mean.append(float(mean))
        self.energy_stderr.append(float(stderr))
        self.grad_norm.append(float(grad_norm))
        self.seconds.append(float(seconds))

    def __len__(self):
        return len(self.iterations)

    def rows(self):
        return zip(self.iterations, self.energy_mean, self.energy_stderr, self.grad_norm, self.seconds)


# ---------------------------------------------------------
# Chunked parallel helpers
# ---------------------------------------------------------

def chunk_ranges(n_samples, chunk=SAMPLE_CHUNK):
    return [(start, min(start + chunk, n_samples)) for start in range(0, n_samples, chunk)]


def log_psi_of(params):
    """configs -> complex log psi, for the local-energy kernels."""
    def evaluate(configs):
        return log_psi(*evaluate_batch(params, configs))
    return evaluate


# ---------------------------------------------------------
# Sample batches
# ---------------------------------------------------------

def draw_batch(params, spec, n_samples, rng, threads=1, record=True):
    """
        Sample `n_samples` configurations and their local energies.

        Sample k uses stream rng.offset(k). The returned batch keeps one part per
        chunk (with its gradient tape when `record` is set) for estimate_gradient.
    """
    amplitudes = log_psi_of(params)

    def run_chunk(bounds):
        start, stop = bounds
        part = sample_batch(params, spec.n_sites, rng.offset(start), stop - start, record=record)
        part.local_energies = local_energies(
            spec, part.configs, log_psi(part.log_prob, part.phase), amplitudes
        )
        return part

    parts = map_chunks(run_chunk, chunk_ranges(n_samples), threads)
    return SampleBatch(
        configs=np.concatenate([p.configs for p in parts]),
        log_prob=np.concatenate([p.log_prob for p in parts]),
        phase=np.concatenate([p.phase for p in parts]),
        local_energies=np.concatenate([p.local_energies for p in parts]),
        parts=parts,
    )


def enumerated_batch(params, spec):
    """
        Every basis configuration weighted by its exact probability; the Monte Carlo
        estimators evaluated on this batch return exact expectations.
    """
    configs, log_prob, phase = enumerate_amplitudes(params, spec.n_sites)
    logits_p, logits_phi, tape = dilated_forward(params, configs, record=True)
    energies = local_energies(spec, configs, log_psi(log_prob, phase), log_psi_of(params))
    return SampleBatch(
        configs=configs,
        log_prob=log_prob,
        phase=phase,
        local_energies=energies,
        weights=np.exp(log_prob),
        tape=tape,
        logits_p=logits_p,
        logits_phi=logits_phi,
    )


def _parts(batch):
    return batch.parts or [batch]


# ---------------------------------------------------------
# Estimators
# ---------------------------------------------------------

def energy_statistics(batch):
    """
        Mean local energy and its standard error.

        Monte Carlo batches: sample mean and sample-std / sqrt(N_s). Weighted
        (enumerated) batches are exact, so their error bar is 0.
    """
    energies = np.asarray(batch.local_energies)
    if batch.weights is not None:
        return complex(np.sum(batch.weights * energies)), 0.0
    # shifting by the first entry makes a constant batch give exactly zero spread
    shifted = energies - energies[0]
    mean = energies[0] + shifted.mean()
    stderr = float(np.std(shifted.real, ddof=1) / np.sqrt(len(energies)))
    return complex(mean), stderr


def estimate_energy(params, spec, n_samples, rng, threads=1):
    """
        Monte Carlo energy estimate from `n_samples` fresh samples.

        Returns:
            (complex, float): mean local energy and its standard error.
    """
    if n_samples < 2:
        raise InvalidInputError("estimate_energy needs at least 2 samples")
    batch = draw_batch(params, spec, n_samples, rng, threads=threads, record=False)
    return energy_statistics(batch)


def estimate_gradient(params, spec, batch, threads=1):
    """
        Baseline-subtracted log-derivative estimate of d<H>/dtheta:

            2 Re < (E_loc - E_mean) d log psi* >
              = < Re(dE) dlogP + 2 Im(dE) dphi >

        Each part's tape is consumed.

        Returns:
            ModelParams: real gradient record.
    """
    if batch.configs.shape[1] != spec.n_sites:
        raise InvalidInputError("batch and Hamiltonian disagree on the number of sites")
    mean, _ = energy_statistics(batch)
    n_total = len(batch)

    def backward(part):
        delta = part.local_energies - mean
        if batch.weights is None:
            weights = np.full(len(part), 1.0 / n_total)
        else:
            weights = part.weights
        dlogits_p, dlogits_phi = upstream_gradients(
            part.logits_p, part.logits_phi, part.configs,
            weight_p=weights * delta.real,
            weight_phi=2.0 * weights * delta.imag,
        )
        return dilated_backward(params, part.tape, dlogits_p, dlogits_phi)

    records = map_chunks(backward, _parts(batch), threads)
    total = records[0]
    for rec in records[1:]:
        for (_, acc), (_, arr) in zip(total.arrays(), rec.arrays()):
            acc += arr
    return total


def exact_energy(params, spec):
    """Enumeration-weighted energy sum_sigma P(sigma) E_loc(sigma)."""
    return energy_statistics(enumerated_batch(params, spec))[0]


# ---------------------------------------------------------
# Adam
# ---------------------------------------------------------

def adam_step(state, params, grad, lr):
    """
        One bias-corrected Adam update, applied to `params` in place.

        Returns:
            (AdamState, ModelParams): the same objects, advanced by one step.
    """
    arrays = [a for _, a in params.arrays()]
    grads = [g for _, g in grad.arrays()]
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise InvalidInputError("gradient record and optimizer state do not match the parameters")

    state.step += 1
    b1, b2, eps, t = state.beta1, state.beta2, state.eps, state.step
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if p.shape != g.shape:
            raise InvalidInputError(f"gradient of shape {g.shape} for a parameter of shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state, params


# ---------------------------------------------------------
# Checkpoints and metrics
# ---------------------------------------------------------

def save_checkpoint(path, params, state, n_sites, seed):
    """
        Write the binary checkpoint:

            b"DNQS" | u32 version | u32 L, u32 d_h, u32 N, u8 flags, u64 seed |
            f64 parameter arrays | f64 Adam m | f64 Adam v | u64 step

        All numbers little-endian; arrays in declaration order.
    """
    flags = (_FLAG_COMPLEX if params.is_complex else 0) | (_FLAG_VANILLA if params.cell_type == "vanilla" else 0)
    try:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            fh.write(_HEADER.pack(params.n_layers, params.hidden_size, n_sites, flags, seed))
            for group in ([a for _, a in params.arrays()], state.m, state.v):
                for arr in group:
                    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            fh.write(struct.pack("<Q", state.step))
    except OSError as exc:
        raise CheckpointError(f"could not write checkpoint {path}: {exc}") from exc


@dataclass
class Checkpoint:
    params: ModelParams
    state: AdamState
    n_sites: int
    seed: int


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"could not read checkpoint {path}: {exc}") from exc

    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic bytes)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path} has format version {version}, this build reads version {CHECKPOINT_VERSION}",
            found_version=version,
        )
    n_layers, hidden_size, n_sites, flags, seed = _HEADER.unpack_from(blob, 8)
    cell_type = "vanilla" if flags & _FLAG_VANILLA else "gru"
    params = zero_params(n_layers, hidden_size, bool(flags & _FLAG_COMPLEX), cell_type)
    state = AdamState.for_params(params)

    offset = 8 + _HEADER.size
    try:
        for group in ([a for _, a in params.arrays()], state.m, state.v):
            for arr in group:
                arr[...] = np.frombuffer(blob, dtype="<f8", count=arr.size, offset=offset).reshape(arr.shape)
                offset += 8 * arr.size
        (state.step,) = struct.unpack_from("<Q", blob, offset)
    except (ValueError, struct.error) as exc:
        raise CheckpointError(f"{path} is truncated or has the wrong model shape") from exc
    if offset + 8 != len(blob):
        raise CheckpointError(f"{path} has {len(blob) - offset - 8} unexpected trailing bytes")
    return Checkpoint(params, state, n_sites, seed)


def write_metrics_csv(record, path):
    """iter,energy_mean,energy_stderr,grad_norm,seconds with round-trippable floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for it, mean, stderr, gnorm, secs in record.rows():
            writer.writerow([it, repr(mean), repr(stderr), repr(gnorm), f"{secs:.3f}"])
