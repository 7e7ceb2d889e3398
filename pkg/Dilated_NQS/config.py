"""
Run and theory configuration: TOML files with flat keys, layered as

    benchmark preset  <  keys in the file  <  command-line flags
"""

import logging
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from errors import ConfigError
from functions.hamiltonians import HamiltonianKind, HamiltonianSpec
from functions.observables import FIT_WINDOWS
from functions.rnn import CELL_TYPES, max_depth
from functions.theory.kernels import LinearModelSpec, ModelMode
from functions.vmc import VmcConfig

logger = logging.getLogger(__name__)


# ---------------------------------------------------------
# Training / measurement runs
# ---------------------------------------------------------

@dataclass
class RunConfig:
    benchmark: str = "tfim"
    n_sites: int = 100
    field: float = 1.0
    n_layers: Optional[int] = None
    hidden_size: int = 32
    complex: bool = False
    cell: str = "gru"
    n_samples: int = 100
    n_samples_eval: int = 100_000
    learning_rate: float = 1e-4
    n_iterations: int = 100_000
    seed: int = 1
    checkpoint_every: int = 1000
    threads: int = 1
    max_seconds: Optional[float] = None
    fit_window: str = "sites"
    out: str = "runs"

    @property
    def depth(self):
        """n_layers, or ceil(log2 N) when unset."""
        return self.n_layers if self.n_layers is not None else max_depth(self.n_sites)

    def hamiltonian(self):
        return HamiltonianSpec(HamiltonianKind(self.benchmark), self.n_sites, self.field)

    def to_vmc_config(self):
        return VmcConfig(
            hamiltonian=self.hamiltonian(),
            n_layers=self.depth,
            hidden_size=self.hidden_size,
            complex_phase=self.complex,
            cell_type=self.cell,
            n_samples=self.n_samples,
            n_samples_eval=self.n_samples_eval,
            learning_rate=self.learning_rate,
            n_iterations=self.n_iterations,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
            threads=self.threads,
            max_seconds=self.max_seconds,
        )

    def as_dict(self):
        body = asdict(self)
        body["n_layers"] = self.depth
        return body


PRESETS = {
    "tfim": dict(
        benchmark="tfim", n_sites=100, field=1.0, n_layers=None, hidden_size=32, complex=False,
        n_samples=100, n_samples_eval=100_000, learning_rate=1e-4, n_iterations=100_000,
    ),
    "cluster": dict(
        benchmark="cluster", n_sites=64, n_layers=6, hidden_size=256, complex=True,
        n_samples=100, n_samples_eval=50_000, learning_rate=1e-3, n_iterations=20_000,
    ),
}


def _read_toml(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"{path}: {exc}") from exc


def _check_keys(cls, values, source):
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(unknown)}")
    return values


def validate_run_config(config):
    if config.benchmark not in PRESETS:
        raise ConfigError(f"benchmark must be one of {sorted(PRESETS)}, got {config.benchmark!r}")
    if config.cell not in CELL_TYPES:
        raise ConfigError(f"cell must be one of {CELL_TYPES}, got {config.cell!r}")
    if config.fit_window not in FIT_WINDOWS:
        raise ConfigError(f"fit_window must be one of {FIT_WINDOWS}, got {config.fit_window!r}")
    for key in ("n_sites", "hidden_size", "n_samples", "n_samples_eval", "checkpoint_every", "threads"):
        if getattr(config, key) < 1:
            raise ConfigError(f"{key} must be positive, got {getattr(config, key)}")
    if config.n_samples < 2:
        raise ConfigError("n_samples must be at least 2")
    if config.n_iterations < 0:
        raise ConfigError(f"n_iterations must be >= 0, got {config.n_iterations}")
    if config.learning_rate <= 0:
        raise ConfigError(f"learning_rate must be positive, got {config.learning_rate}")
    if not 0 <= config.seed < 2 ** 64:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {config.seed}")
    if config.n_layers is not None and not 1 <= config.n_layers <= max_depth(config.n_sites):
        raise ConfigError(
            f"n_layers must lie in [1, {max_depth(config.n_sites)}] for n_sites = {config.n_sites}, got {config.n_layers}"
        )
    if config.max_seconds is not None and config.max_seconds <= 0:
        raise ConfigError(f"max_seconds must be positive, got {config.max_seconds}")
    # builds and validates the Hamiltonian (cluster needs N >= 4 for its local energy)
    spec = config.hamiltonian()
    if spec.kind is HamiltonianKind.CLUSTER_ES and spec.n_sites < 4:
        raise ConfigError("the cluster benchmark needs n_sites >= 4")
    return config


def load_run_config(path=None, **overrides):
    """
        Resolve a RunConfig from preset, optional TOML file and CLI overrides
        (None-valued overrides are ignored).
    """
    values = _check_keys(RunConfig, _read_toml(path), path) if path is not None else {}
    flags = {k: v for k, v in overrides.items() if v is not None}
    _check_keys(RunConfig, flags, "command line")

    benchmark = flags.get("benchmark", values.get("benchmark", "tfim"))
    if benchmark not in PRESETS:
        raise ConfigError(f"benchmark must be one of {sorted(PRESETS)}, got {benchmark!r}")
    try:
        config = replace(RunConfig(), **{**PRESETS[benchmark], **values, **flags})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    logger.debug("resolved run config: %s", config)
    return validate_run_config(config)


# ---------------------------------------------------------
# Theory pipeline
# ---------------------------------------------------------

@dataclass
class TheoryConfig:
    mode: str = "dilated"
    lambdas: tuple = (0.3,)
    couplings: tuple = (0.01,)
    bias: float = 0.0
    base: int = 2
    depth: int = 12
    m_max: int = 2048
    n_exact: int = 14
    tail_start: int = 256
    tail_stop: int = 2048
    threads: int = 1
    seed: int = 1
    out: str = "runs"

    def model_spec(self):
        return LinearModelSpec(
            mode=ModelMode(self.mode),
            lambdas=tuple(self.lambdas),
            couplings=tuple(self.couplings),
            bias=self.bias,
            base=self.base,
            depth=self.depth,
        )

    @property
    def tail(self):
        return self.tail_start, self.tail_stop


def load_theory_config(path=None, **overrides):
    values = _check_keys(TheoryConfig, _read_toml(path), path) if path is not None else {}
    flags = {k: v for k, v in overrides.items() if v is not None}
    try:
        config = replace(TheoryConfig(), **{**values, **flags})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if config.mode not in [m.value for m in ModelMode]:
        raise ConfigError(f"mode must be 'vanilla' or 'dilated', got {config.mode!r}")
    if config.m_max < 1 or not 1 <= config.tail_start <= config.tail_stop:
        raise ConfigError("need m_max >= 1 and 1 <= tail_start <= tail_stop")
    if config.threads < 1:
        raise ConfigError(f"threads must be >= 1, got {config.threads}")
    if not 0 <= config.n_exact <= 20:
        raise ConfigError(f"n_exact must lie in [0, 20], got {config.n_exact}")
    config.model_spec()  # raises ConfigError for lambdas outside (0, 1)
    return config
