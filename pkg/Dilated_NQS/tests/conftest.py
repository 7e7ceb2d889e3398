import numpy as np
import pytest

from functions.hamiltonians import HamiltonianKind, HamiltonianSpec
from functions.numerics import RngStream
from functions.rnn import init_params
from functions.vmc import VmcConfig

FD_STEP = 1e-5


def _numeric_gradient(f, params, step=FD_STEP):
    """Central differences of the scalar f(params) for every parameter entry."""
    grad = params.zeros_like()
    for (_, arr), (_, out) in zip(params.arrays(), grad.arrays()):
        flat, flat_out = arr.reshape(-1), out.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = f(params)
            flat[i] = saved - step
            down = f(params)
            flat[i] = saved
            flat_out[i] = (up - down) / (2.0 * step)
    return grad


def _relative_error(record, reference):
    """max |record - reference| / max |reference| over every entry."""
    diff = max(np.max(np.abs(a - b)) for (_, a), (_, b) in zip(record.arrays(), reference.arrays()))
    scale = max(np.max(np.abs(b)) for _, b in reference.arrays())
    return diff / scale


@pytest.fixture
def numeric_gradient():
    return _numeric_gradient


@pytest.fixture
def relative_error():
    return _relative_error


@pytest.fixture
def make_params():
    """init_params with a per-test seed: make_params(L, d_h, complex, seed=..., cell_type=...)."""
    def build(n_layers, hidden_size, complex_phase=False, seed=0, cell_type="gru"):
        return init_params(n_layers, hidden_size, complex_phase, RngStream(seed, 7), cell_type=cell_type)
    return build


@pytest.fixture
def random_configs():
    def draw(n_configs, n_sites, seed=0):
        gen = np.random.default_rng(seed)
        return (2 * gen.integers(0, 2, size=(n_configs, n_sites)) - 1).astype(np.int8)
    return draw


@pytest.fixture
def tiny_vmc_config():
    """A seconds-scale training setup: 4-site TFIM, two sample chunks per iteration."""
    def build(**overrides):
        values = dict(
            hamiltonian=HamiltonianSpec(HamiltonianKind.TFIM_PBC, 4, 1.0),
            n_layers=2,
            hidden_size=3,
            n_samples=40,
            n_samples_eval=64,
            learning_rate=1e-2,
            n_iterations=4,
            seed=11,
            checkpoint_every=2,
        )
        values.update(overrides)
        return VmcConfig(**values)
    return build
