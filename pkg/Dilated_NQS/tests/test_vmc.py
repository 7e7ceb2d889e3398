import csv
import struct

import numpy as np
import pytest

from errors import CheckpointError, InvalidInputError
from functions.hamiltonians import HamiltonianKind, HamiltonianSpec
from functions.numerics import RngStream, map_chunks
from functions.vmc import (
    CHECKPOINT_VERSION,
    METRICS_HEADER,
    AdamState,
    RunRecord,
    adam_step,
    chunk_ranges,
    draw_batch,
    energy_statistics,
    enumerated_batch,
    estimate_energy,
    estimate_gradient,
    exact_energy,
    load_checkpoint,
    save_checkpoint,
    write_metrics_csv,
)
from functions.wavefunction import SampleBatch, evaluate_batch
from vmc_engine import CHECKPOINT_NAME, FINAL_NAME, train

TFIM4 = HamiltonianSpec(HamiltonianKind.TFIM_PBC, 4, 1.0)
CLUSTER5 = HamiltonianSpec(HamiltonianKind.CLUSTER_ES, 5)
TFIM6 = HamiltonianSpec(HamiltonianKind.TFIM_PBC, 6, 1.0)


def _batch_of(energies):
    energies = np.asarray(energies, dtype=np.complex128)
    n = len(energies)
    return SampleBatch(configs=np.ones((n, 2), dtype=np.int8), log_prob=np.zeros(n),
                       phase=np.zeros(n), local_energies=energies)


# ---------------------------------------------------------
# Energy statistics
# ---------------------------------------------------------

def test_energy_statistics_mean_and_error():
    mean, stderr = energy_statistics(_batch_of([1.0, 2.0, 3.0, 4.0]))
    assert mean == pytest.approx(2.5)
    assert stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)


def test_constant_batch_has_exactly_zero_spread():
    mean, stderr = energy_statistics(_batch_of([-1.2345678901234] * 100))
    assert mean.real == -1.2345678901234
    assert stderr == 0.0


def test_weighted_batch_is_exact():
    batch = _batch_of([1.0, 3.0])
    batch.weights = np.array([0.25, 0.75])
    mean, stderr = energy_statistics(batch)
    assert mean == pytest.approx(2.5)
    assert stderr == 0.0


def test_estimate_energy_needs_two_samples(make_params):
    with pytest.raises(InvalidInputError):
        estimate_energy(make_params(1, 2), TFIM4, 1, RngStream(0, 0))


def test_monte_carlo_energy_agrees_with_enumeration(make_params):
    params = make_params(3, 3, seed=21)
    exact = exact_energy(params, TFIM6)
    mean, stderr = estimate_energy(params, TFIM6, 4000, RngStream(3, 0))
    assert stderr > 0.0
    assert abs(mean.real - exact.real) <= 4 * stderr


# ---------------------------------------------------------
# Gradients
# ---------------------------------------------------------

@pytest.mark.parametrize("spec, complex_phase", [(TFIM4, False), (CLUSTER5, True), (TFIM6, False)],
                         ids=["tfim4-real", "cluster5-complex", "tfim6-real"])
def test_enumerated_gradient_matches_finite_differences(make_params, numeric_gradient, relative_error,
                                                        spec, complex_phase):
    params = make_params(2, 2, complex_phase=complex_phase, seed=4)
    analytic = estimate_gradient(params, spec, enumerated_batch(params, spec))
    numeric = numeric_gradient(lambda p: exact_energy(p, spec).real, params)
    assert all(np.isrealobj(a) for _, a in analytic.arrays())
    assert relative_error(analytic, numeric) <= 1e-6


def test_gradient_consumes_the_tapes(make_params):
    params = make_params(1, 2, seed=0)
    batch = draw_batch(params, TFIM4, 40, RngStream(0, 0))
    estimate_gradient(params, TFIM4, batch)
    assert all(part.tape.consumed for part in batch.parts)


def test_chunks_cover_the_batch_in_order():
    assert chunk_ranges(70) == [(0, 32), (32, 64), (64, 70)]
    assert map_chunks(lambda x: x * x, [3, 1, 2], threads=3) == [9, 1, 4]


def test_thread_count_does_not_change_any_bit(make_params):
    params = make_params(2, 3, complex_phase=True, seed=8)
    results = []
    for threads in (1, 3):
        batch = draw_batch(params, CLUSTER5, 100, RngStream(5, 200), threads=threads)
        grad = estimate_gradient(params, CLUSTER5, batch, threads=threads)
        results.append((batch, grad))
    (b1, g1), (b3, g3) = results
    assert np.array_equal(b1.configs, b3.configs)
    assert np.array_equal(b1.local_energies, b3.local_energies)
    for (_, a), (_, b) in zip(g1.arrays(), g3.arrays()):
        assert np.array_equal(a, b)


def _with_energies(batch, transform):
    """Replace the local energies of a drawn batch and of each of its chunks."""
    for part in batch.parts:
        part.local_energies = transform(part.local_energies)
    batch.local_energies = np.concatenate([part.local_energies for part in batch.parts])
    return batch


def test_equal_local_energies_give_exactly_zero_gradient(make_params):
    params = make_params(2, 3, complex_phase=True, seed=12)
    batch = draw_batch(params, CLUSTER5, 70, RngStream(6, 0))
    _with_energies(batch, lambda e: np.full(len(e), -2.75 + 0.5j))
    grad = estimate_gradient(params, CLUSTER5, batch)
    for _, arr in grad.arrays():
        assert np.all(arr == 0.0)


def test_scaling_local_energies_scales_the_gradient(make_params):
    params = make_params(2, 3, complex_phase=True, seed=12)
    plain = estimate_gradient(params, CLUSTER5, draw_batch(params, CLUSTER5, 70, RngStream(6, 0)))
    doubled_batch = _with_energies(draw_batch(params, CLUSTER5, 70, RngStream(6, 0)), lambda e: 2.0 * e)
    doubled = estimate_gradient(params, CLUSTER5, doubled_batch)
    for (_, a), (_, b) in zip(plain.arrays(), doubled.arrays()):
        assert np.allclose(b, 2.0 * a, rtol=1e-12, atol=1e-15)


# ---------------------------------------------------------
# Adam
# ---------------------------------------------------------

def test_first_adam_step_moves_by_learning_rate(make_params):
    params = make_params(1, 2, seed=1)
    before = params.copy()
    grad = params.map(lambda a: np.where(np.arange(a.size).reshape(a.shape) % 2, 3.0, -0.5))
    state = AdamState.for_params(params)
    adam_step(state, params, grad, lr=0.01)
    assert state.step == 1
    for (_, new), (_, old), (_, g) in zip(params.arrays(), before.arrays(), grad.arrays()):
        assert np.allclose(new, old - 0.01 * np.sign(g), atol=1e-9)


def test_adam_rejects_mismatched_records(make_params):
    params = make_params(1, 2, seed=1)
    other = make_params(2, 2, seed=1)
    with pytest.raises(InvalidInputError):
        adam_step(AdamState.for_params(params), params, other, lr=0.01)


def test_zero_gradient_never_moves_the_parameters(make_params):
    params = make_params(2, 3, complex_phase=True, seed=3)
    before = params.copy()
    state = AdamState.for_params(params)
    for _ in range(50):
        adam_step(state, params, params.zeros_like(), lr=0.1)
    assert state.step == 50
    for (_, new), (_, old) in zip(params.arrays(), before.arrays()):
        assert np.array_equal(new, old)


# ---------------------------------------------------------
# Checkpoints and metrics
# ---------------------------------------------------------

@pytest.mark.parametrize("complex_phase, cell_type", [(False, "gru"), (True, "gru"), (True, "vanilla")])
def test_checkpoint_round_trip(tmp_path, make_params, complex_phase, cell_type):
    params = make_params(2, 3, complex_phase=complex_phase, seed=2, cell_type=cell_type)
    state = AdamState.for_params(params)
    adam_step(state, params, params.copy(), lr=1e-3)
    path = tmp_path / "model.dnqs"
    save_checkpoint(path, params, state, n_sites=6, seed=2**64 - 1)

    restored = load_checkpoint(path)
    assert restored.n_sites == 6 and restored.seed == 2**64 - 1
    assert restored.params.cell_type == cell_type
    assert restored.params.is_complex == complex_phase
    assert restored.state.step == 1
    for (_, a), (_, b) in zip(params.arrays(), restored.params.arrays()):
        assert np.array_equal(a, b)
    for a, b in zip(state.v, restored.state.v):
        assert np.array_equal(a, b)


def test_restored_checkpoint_evaluates_identically(tmp_path, make_params, random_configs):
    params = make_params(3, 4, complex_phase=True, seed=19)
    path = tmp_path / "model.dnqs"
    save_checkpoint(path, params, AdamState.for_params(params), n_sites=8, seed=19)
    restored = load_checkpoint(path).params

    configs = random_configs(100, 8, seed=19)
    log_prob, phase = evaluate_batch(params, configs)
    restored_log_prob, restored_phase = evaluate_batch(restored, configs)
    assert np.array_equal(log_prob, restored_log_prob)
    assert np.array_equal(phase, restored_phase)


def test_checkpoint_errors(tmp_path, make_params):
    params = make_params(1, 2, seed=0)
    path = tmp_path / "model.dnqs"
    save_checkpoint(path, params, AdamState.for_params(params), n_sites=3, seed=1)
    blob = path.read_bytes()

    bad = tmp_path / "bad.dnqs"
    bad.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(bad)

    bad.write_bytes(blob[:4] + struct.pack("<I", CHECKPOINT_VERSION + 1) + blob[8:])
    with pytest.raises(CheckpointError) as info:
        load_checkpoint(bad)
    assert info.value.found_version == CHECKPOINT_VERSION + 1

    bad.write_bytes(blob[:-20])
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)

    bad.write_bytes(blob + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(bad)

    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.dnqs")


def test_metrics_csv_round_trips_floats(tmp_path):
    record = RunRecord()
    record.append(0, -3.141592653589793, 0.1, 2.5e-7, 0.0123)
    record.append(1, -3.2, 0.05, 1e-300, 0.5)
    path = tmp_path / "metrics.csv"
    write_metrics_csv(record, path)

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == METRICS_HEADER
    assert float(rows[1][1]) == -3.141592653589793
    assert float(rows[2][3]) == 1e-300
    assert rows[1][4] == "0.012"


# ---------------------------------------------------------
# Training loop
# ---------------------------------------------------------

def test_training_writes_checkpoints_and_record(tmp_path, tiny_vmc_config):
    result = train(tiny_vmc_config(), checkpoint_dir=tmp_path, progress=False)
    assert len(result.record) == 4
    assert result.record.iterations == [0, 1, 2, 3]
    assert result.state.step == 4
    assert (tmp_path / CHECKPOINT_NAME).is_file() and (tmp_path / FINAL_NAME).is_file()
    assert load_checkpoint(tmp_path / FINAL_NAME).state.step == 4
    assert np.isfinite(result.final_energy.real) and result.final_stderr >= 0.0
    assert not result.stopped_early


def test_training_is_reproducible_across_thread_counts(tiny_vmc_config):
    one = train(tiny_vmc_config(threads=1), progress=False)
    two = train(tiny_vmc_config(threads=2), progress=False)
    assert one.record.energy_mean == two.record.energy_mean
    assert one.record.grad_norm == two.record.grad_norm
    assert one.final_energy == two.final_energy


def test_outputs_are_byte_identical_across_thread_counts(tmp_path, tiny_vmc_config):
    contents = []
    for threads in (1, 3):
        run_dir = tmp_path / f"threads-{threads}"
        result = train(tiny_vmc_config(threads=threads, complex_phase=True), checkpoint_dir=run_dir, progress=False)
        write_metrics_csv(result.record, run_dir / "metrics.csv")
        with open(run_dir / "metrics.csv", newline="") as fh:
            # wall-clock seconds are the only column allowed to differ
            rows = [row[:4] for row in csv.reader(fh)]
        contents.append((rows, (run_dir / FINAL_NAME).read_bytes()))
    assert contents[0] == contents[1]


def test_resumed_run_is_bitwise_identical(tmp_path, tiny_vmc_config):
    straight = train(tiny_vmc_config(), progress=False)

    first = tmp_path / "first"
    train(tiny_vmc_config(n_iterations=2), checkpoint_dir=first, progress=False)
    resumed = train(tiny_vmc_config(), resume_from=first / FINAL_NAME, progress=False)

    assert resumed.record.iterations == [2, 3]
    assert resumed.record.energy_mean == straight.record.energy_mean[2:]
    for (_, a), (_, b) in zip(straight.params.arrays(), resumed.params.arrays()):
        assert np.array_equal(a, b)


def test_wall_time_budget_stops_early(tiny_vmc_config):
    result = train(tiny_vmc_config(max_seconds=1e-9), progress=False)
    assert result.stopped_early
    assert len(result.record) == 1
