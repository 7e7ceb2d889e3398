import pytest

from config import PRESETS, load_run_config, load_theory_config
from errors import ConfigError
from functions.hamiltonians import HamiltonianKind
from functions.theory.kernels import ModelMode


@pytest.fixture
def toml_file(tmp_path):
    def write(text, name="run.toml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return write


def test_defaults_are_the_tfim_preset():
    config = load_run_config()
    assert config.benchmark == "tfim"
    assert config.n_sites == 100 and config.depth == 7
    assert config.hidden_size == 32 and not config.complex
    assert config.learning_rate == 1e-4
    assert config.as_dict()["n_layers"] == 7


def test_cluster_preset_from_file(toml_file):
    config = load_run_config(toml_file('benchmark = "cluster"\n'))
    for key, value in PRESETS["cluster"].items():
        assert getattr(config, key) == value
    assert config.hamiltonian().kind is HamiltonianKind.CLUSTER_ES


def test_flags_beat_file_beat_preset(toml_file):
    path = toml_file("seed = 3\nn_sites = 20\nthreads = 2\n")
    config = load_run_config(path, seed=9, threads=None)
    assert config.seed == 9
    assert config.n_sites == 20
    assert config.threads == 2
    assert config.hidden_size == PRESETS["tfim"]["hidden_size"]


def test_vmc_config_carries_every_setting(toml_file):
    path = toml_file('n_sites = 10\nn_layers = 4\nhidden_size = 16\nlearning_rate = 1e-3\ncell = "vanilla"\n')
    vmc = load_run_config(path).to_vmc_config()
    assert vmc.hamiltonian.n_sites == 10
    assert vmc.n_layers == 4 and vmc.hidden_size == 16
    assert vmc.learning_rate == 1e-3
    assert vmc.cell_type == "vanilla"


@pytest.mark.parametrize("text, message", [
    ("hidden = 3\n", "unknown key"),
    ("n_sites = \n", "line 1"),
    ('benchmark = "heisenberg"\n', "benchmark"),
    ('fit_window = "middle"\n', "fit_window"),
    ("n_sites = 8\nn_layers = 4\n", "n_layers"),
    ("n_samples = 1\n", "n_samples"),
    ("seed = -1\n", "seed"),
    ('benchmark = "cluster"\nn_sites = 3\n', "n_sites"),
])
def test_invalid_run_configs(toml_file, text, message):
    with pytest.raises(ConfigError, match=message):
        load_run_config(toml_file(text))


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "nope.toml")


# ---------------------------------------------------------
# Theory configuration
# ---------------------------------------------------------

def test_theory_defaults():
    config = load_theory_config()
    spec = config.model_spec()
    assert spec.mode is ModelMode.DILATED
    assert spec.depth == 12 and spec.base == 2
    assert config.tail == (256, 2048)
    assert config.threads == 1


def test_theory_file_and_overrides(toml_file):
    path = toml_file('mode = "vanilla"\nlambdas = [0.5, 0.7]\ncouplings = [0.01, 0.02]\nbias = 0.3\n', "theory.toml")
    config = load_theory_config(path, seed=4, threads=3)
    spec = config.model_spec()
    assert spec.mode is ModelMode.VANILLA
    assert spec.lambdas == (0.5, 0.7)
    assert config.seed == 4 and config.threads == 3


@pytest.mark.parametrize("text", [
    "lambdas = [1.2]\n",
    'mode = "deep"\n',
    "n_exact = 25\n",
    "tail_start = 500\ntail_stop = 100\n",
    "threads = 0\n",
    "order = 2\n",
])
def test_invalid_theory_configs(toml_file, text):
    with pytest.raises(ConfigError):
        load_theory_config(toml_file(text, "theory.toml"))
