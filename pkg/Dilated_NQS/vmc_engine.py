import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from tqdm import tqdm

from errors import CheckpointError
from functions.numerics import RngStream
from functions.rnn import check_depth, init_params, record_norm
from functions.vmc import (
    EVAL_STREAM_BASE,
    INIT_STREAM,
    AdamState,
    RunRecord,
    adam_step,
    draw_batch,
    energy_statistics,
    estimate_energy,
    estimate_gradient,
    load_checkpoint,
    save_checkpoint,
)

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.dnqs"
FINAL_NAME = "final.dnqs"


@dataclass
class TrainingResult:
    params: object
    state: AdamState
    record: RunRecord
    final_energy: complex = None
    final_stderr: float = None
    stopped_early: bool = False


def _save(path, params, state, config, iteration):
    try:
        save_checkpoint(path, params, state, config.hamiltonian.n_sites, config.seed)
    except CheckpointError as exc:
        raise CheckpointError(f"iteration {iteration}: {exc}") from exc


def train(config, checkpoint_dir=None, resume_from=None, progress=None):
    """
        Core VMC training engine.
        Samples the network, estimates energy and gradient, and applies Adam for
        `config.n_iterations` iterations, then estimates the final energy with
        `config.n_samples_eval` fresh samples.

        Parameters:
            config (VmcConfig): Hamiltonian, model shape and optimizer settings.
            checkpoint_dir (Path | None): where checkpoint.dnqs / final.dnqs are written.
            resume_from (Path | None): checkpoint to continue from; iteration t of the
                resumed run is bitwise identical to iteration t of an uninterrupted one.
            progress (bool | None): show a tqdm bar; defaults to "stderr is a terminal".

        Returns:
            TrainingResult: final params, optimizer state, RunRecord and final energy.
    """
    spec = config.hamiltonian
    if progress is None:
        progress = sys.stderr.isatty()
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    # ---------------------------------------------------------
    # 1. Initial parameters and optimizer state (fresh or resumed)
    # ---------------------------------------------------------
    if resume_from is not None:
        restored = load_checkpoint(resume_from)
        params, state = restored.params, restored.state
        if restored.n_sites != spec.n_sites or restored.seed != config.seed:
            logger.warning("checkpoint was written for N=%d seed=%d; continuing with N=%d seed=%d",
                           restored.n_sites, restored.seed, spec.n_sites, config.seed)
        logger.info("resuming from %s at iteration %d", resume_from, state.step)
    else:
        params = init_params(config.n_layers, config.hidden_size, config.complex_phase,
                             RngStream(config.seed, INIT_STREAM), cell_type=config.cell_type)
        state = AdamState.for_params(params)
    check_depth(params, spec.n_sites)
    logger.info("training %s N=%d: L=%d d_h=%d %s, %d parameters",
                spec.kind.value, spec.n_sites, params.n_layers, params.hidden_size,
                "complex" if params.is_complex else "real", params.n_parameters())

    # ---------------------------------------------------------
    # 2. Optimization loop
    # ---------------------------------------------------------
    # Iteration t draws its samples from streams [t*N_s, (t+1)*N_s); the counter lives
    # in the Adam state so a resumed run replays the same streams.
    record = RunRecord()
    started = time.perf_counter()
    stopped_early = False
    iterations = range(state.step, config.n_iterations)
    for t in tqdm(iterations, disable=not progress, desc=spec.kind.value, unit="it"):
        rng = RngStream(config.seed, t * config.n_samples)
        batch = draw_batch(params, spec, config.n_samples, rng, threads=config.threads)
        mean, stderr = energy_statistics(batch)
        grad = estimate_gradient(params, spec, batch, threads=config.threads)
        grad_norm = record_norm(grad)
        adam_step(state, params, grad, config.learning_rate)

        elapsed = time.perf_counter() - started
        record.append(t, mean.real, stderr, grad_norm, elapsed)

        if (t + 1) % config.checkpoint_every == 0:
            logger.info("iter %d: E = %.8f +/- %.2e, |grad| = %.3e", t + 1, mean.real, stderr, grad_norm)
            if checkpoint_dir is not None:
                _save(checkpoint_dir / CHECKPOINT_NAME, params, state, config, t + 1)

        if config.max_seconds is not None and elapsed >= config.max_seconds:
            logger.info("wall-time budget of %.0f s reached after %d iterations", config.max_seconds, t + 1)
            stopped_early = True
            break

    # ---------------------------------------------------------
    # 3. Final parameters on disk
    # ---------------------------------------------------------
    if checkpoint_dir is not None:
        _save(checkpoint_dir / FINAL_NAME, params, state, config, state.step)

    # ---------------------------------------------------------
    # 4. Final energy from a large independent sample set
    # ---------------------------------------------------------
    final_energy, final_stderr = estimate_energy(
        params, spec, config.n_samples_eval, RngStream(config.seed, EVAL_STREAM_BASE), config.threads
    )
    logger.info("final energy %.8f +/- %.2e (%d samples)", final_energy.real, final_stderr, config.n_samples_eval)

    return TrainingResult(params, state, record, final_energy, final_stderr, stopped_early)
