"""
Command-line entry point.

    python cli.py train   [--config FILE] [--seed S] [--threads K] [--out DIR] [--dry-run]
    python cli.py measure --checkpoint FILE [--config FILE] [--seed S] [--threads K] [--out DIR] [--dry-run]
    python cli.py theory  [--config FILE] [--seed S] [--threads K] [--out DIR] [--dry-run]
    python cli.py exact   [--config FILE | --kind tfim|cluster --n-sites N --field G] [--threads K] [--dry-run]

Exit codes: 0 success, 2 configuration / missing file, 3 checkpoint, 4 resource
limit, 1 any other error.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict
from datetime import datetime
from pathlib import Path

from app import create_app
from config import load_run_config, load_theory_config
from errors import CheckpointError, ConfigError, DnqsError, ResourceError
from functions.hamiltonians import HamiltonianKind, HamiltonianSpec, exact_diag, free_fermion_energy
from functions.numerics import RngStream
from functions.observables import fit_power_law, measure_correlations, write_correlations_csv, write_fit_json
from functions.theory.reports import run_theory
from functions.vmc import MEASURE_STREAM_BASE, load_checkpoint, write_metrics_csv
from models import find_run, record_measurement, record_training_run
from vmc_engine import train

logger = logging.getLogger("dnqs")

EXIT_CODES = ((ConfigError, 2), (CheckpointError, 3), (ResourceError, 4), (DnqsError, 1))
DATABASE_NAME = "runs.db"


# ---------------------------------------------------------
# HELPERS
# ---------------------------------------------------------

def configure_logging(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def new_run_dir(out, label, seed):
    """<out>/<label>-<seed>-<timestamp>, suffixed if that name is taken."""
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    base = Path(out) / f"{label}-{seed}-{stamp}"
    candidate, k = base, 0
    while candidate.exists():
        k += 1
        candidate = Path(f"{base}-{k}")
    candidate.mkdir(parents=True)
    return candidate.resolve()


def write_json(body, path):
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------
# SUBCOMMANDS
# ---------------------------------------------------------

def cmd_train(args):
    """Train a network; writes metrics.csv, config.json, checkpoints and a runs.db row."""
    config = load_run_config(args.config, seed=args.seed, threads=args.threads, out=args.out)
    if args.dry_run:
        print(json.dumps(config.as_dict(), indent=2, sort_keys=True))
        return 0

    run_dir = new_run_dir(config.out, config.benchmark, config.seed)
    write_json(config.as_dict(), run_dir / "config.json")
    logger.info("run directory %s", run_dir)

    result = train(config.to_vmc_config(), checkpoint_dir=run_dir, resume_from=args.resume)
    write_metrics_csv(result.record, run_dir / "metrics.csv")

    with create_app(Path(config.out) / DATABASE_NAME).app_context():
        record_training_run(config, result, run_dir)

    print(f"final energy: {result.final_energy.real:.10f} +/- {result.final_stderr:.3e}")
    return 0


def cmd_measure(args):
    """Correlations and power-law fit of a trained checkpoint."""
    checkpoint_path = Path(args.checkpoint)
    if not checkpoint_path.is_file():
        raise ConfigError(f"checkpoint not found: {checkpoint_path}")
    checkpoint = load_checkpoint(checkpoint_path)
    seed = args.seed if args.seed is not None else checkpoint.seed
    config = load_run_config(args.config, seed=seed, threads=args.threads, out=args.out,
                             n_sites=checkpoint.n_sites)
    if args.dry_run:
        body = config.as_dict()
        body.update(checkpoint=str(checkpoint_path), n_layers=checkpoint.params.n_layers,
                    hidden_size=checkpoint.params.hidden_size, complex_phase=checkpoint.params.is_complex,
                    cell=checkpoint.params.cell_type)
        print(json.dumps(body, indent=2, sort_keys=True))
        return 0

    out_dir = Path(args.out) if args.out is not None else checkpoint_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    series = measure_correlations(checkpoint.params, checkpoint.n_sites, config.n_samples_eval,
                                  RngStream(config.seed, MEASURE_STREAM_BASE), config.threads)
    write_correlations_csv(series, out_dir / "correlations.csv")
    fit = fit_power_law(series, config.fit_window)
    write_fit_json(fit, out_dir / "fit.json", seed=config.seed)

    database = (Path(args.out) if args.out is not None else checkpoint_path.parent.parent) / DATABASE_NAME
    with create_app(database).app_context():
        run = find_run(checkpoint_path.resolve().parent)
        record_measurement(fit, checkpoint_path, run.id if run is not None else None)

    print(f"eta = {fit.eta:.4f} +/- {fit.eta_stderr:.4f}  (R^2 = {fit.r2:.4f}, window r = {fit.window})")
    return 0


def cmd_theory(args):
    """Kernels, first-order series, singularity report and exact oracle of a linear model."""
    config = load_theory_config(args.config, seed=args.seed, threads=args.threads, out=args.out)
    if args.dry_run:
        print(json.dumps(asdict(config), indent=2, sort_keys=True))
        return 0
    run_dir = new_run_dir(config.out, f"theory-{config.mode}", config.seed)
    write_json(asdict(config), run_dir / "config.json")
    report = run_theory(config.model_spec(), run_dir, m_max=config.m_max, n_exact=config.n_exact,
                        tail=config.tail, seed=config.seed, threads=config.threads)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_exact(args):
    """Exact ground energy by diagonalization (N <= 16)."""
    if args.config is not None:
        config = load_run_config(args.config, threads=args.threads)
        spec, threads = config.hamiltonian(), config.threads
    else:
        if args.kind is None or args.n_sites is None:
            raise ConfigError("exact needs --config or both --kind and --n-sites")
        if args.threads is not None and args.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {args.threads}")
        spec = HamiltonianSpec(HamiltonianKind(args.kind), args.n_sites, args.field)
        threads = args.threads or 1
    if args.dry_run:
        body = {"kind": spec.kind.value, "n_sites": spec.n_sites, "field": spec.field, "threads": threads}
        print(json.dumps(body, indent=2, sort_keys=True))
        return 0

    energy, _ = exact_diag(spec, threads)
    print(f"exact ground energy ({spec.kind.value}, N = {spec.n_sites}): {energy:.12f}")
    if spec.kind is HamiltonianKind.TFIM_PBC and spec.n_sites % 2 == 0:
        print(f"free-fermion closed form: {free_fermion_energy(spec.n_sites, spec.field):.12f}")
    return 0


# ---------------------------------------------------------
# PARSER
# ---------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="dnqs", description="Dilated recurrent quantum states: VMC and theory.")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="train a network by VMC")
    train_p.add_argument("--config", help="TOML run configuration")
    train_p.add_argument("--seed", type=int)
    train_p.add_argument("--threads", type=int)
    train_p.add_argument("--out", help="parent directory of run directories and runs.db")
    train_p.add_argument("--resume", help="checkpoint to continue from")
    train_p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    train_p.set_defaults(func=cmd_train)

    measure_p = sub.add_parser("measure", help="correlations and power-law fit of a checkpoint")
    measure_p.add_argument("--checkpoint", required=True)
    measure_p.add_argument("--config")
    measure_p.add_argument("--seed", type=int)
    measure_p.add_argument("--threads", type=int)
    measure_p.add_argument("--out")
    measure_p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    measure_p.set_defaults(func=cmd_measure)

    theory_p = sub.add_parser("theory", help="linearized correlation theory")
    theory_p.add_argument("--config", help="TOML theory spec")
    theory_p.add_argument("--seed", type=int)
    theory_p.add_argument("--threads", type=int, help="workers for the exact oracle")
    theory_p.add_argument("--out")
    theory_p.add_argument("--dry-run", action="store_true")
    theory_p.set_defaults(func=cmd_theory)

    exact_p = sub.add_parser("exact", help="exact ground energy by diagonalization")
    exact_p.add_argument("--config")
    exact_p.add_argument("--kind", choices=[k.value for k in HamiltonianKind])
    exact_p.add_argument("--n-sites", type=int)
    exact_p.add_argument("--field", type=float, default=1.0)
    exact_p.add_argument("--threads", type=int, help="workers for building the Hamiltonian")
    exact_p.add_argument("--dry-run", action="store_true", help="print the resolved Hamiltonian and exit")
    exact_p.set_defaults(func=cmd_exact)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except DnqsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for error_type, code in EXIT_CODES:
            if isinstance(exc, error_type):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
