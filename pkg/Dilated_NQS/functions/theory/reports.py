import csv
import json
import logging
from pathlib import Path

from functions.theory.correlators import capp_series, exact_correlator
from functions.theory.kernels import ModelMode, kernel, weak_coupling
from functions.theory.singularity import decay_classifier, singularity_report

logger = logging.getLogger(__name__)

SERIES_HEADER = ["index", "value"]


def write_series_csv(series, path):
    """One row per coefficient: index (from 1), value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_HEADER)
        for n, value in zip(series.index, series.values):
            writer.writerow([int(n), repr(float(value))])


def report_dict(report, classification, epsilon=None, seed=None):
    """The JSON report body; None fields stay null."""
    body = {
        "z_star": report.z_star,
        "q": report.multiplicity,
        "rho": report.rho,
        "alpha": report.alpha,
        "unit_disk_safe": report.unit_disk_safe,
        "marginal": report.marginal,
        "message": report.message,
        "classifier": classification.kind.value,
        "fit_r2_exp": classification.r2_exp,
        "fit_r2_pow": classification.r2_pow,
        "rate": classification.rate,
        "exponent": classification.exponent,
        "classifier_as_expected": classification.as_expected,
        "epsilon": epsilon,
    }
    if seed is not None:
        body["seed"] = seed
    return body


def write_report_json(body, path):
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)


def run_theory(spec, out_dir, m_max=2048, n_exact=14, tail=None, seed=None, threads=1):
    """
        Full linearized-model pipeline: kernel, first-order series, singularity
        report, decay classification and the exact enumeration oracle.

        Parameters:
            spec (LinearModelSpec): model.
            out_dir (Path): directory for kernel.csv, capp.csv, exact.csv, report.json.
            m_max (int): series length.
            n_exact (int): sequence length of the exact oracle (0 skips it).
            tail ((int, int) | None): classifier window.
            seed (int | None): recorded in the report.
            threads (int): workers for the exact oracle.

        Returns:
            dict: the report body written to report.json.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # ---------------------------------------------------------
    # 1. Kernel and first-order correlator
    # ---------------------------------------------------------
    k = kernel(spec, m_max)
    capp = capp_series(spec, m_max, kernel_series=k)
    write_series_csv(k, out_dir / "kernel.csv")
    write_series_csv(capp, out_dir / "capp.csv")

    # ---------------------------------------------------------
    # 2. Asymptotics
    # ---------------------------------------------------------
    report = singularity_report(spec)
    classification = decay_classifier(capp.values, spec.mode, tail)
    epsilon = weak_coupling(spec, m_max if spec.mode is ModelMode.DILATED else None)

    # ---------------------------------------------------------
    # 3. Exact oracle
    # ---------------------------------------------------------
    if n_exact:
        write_series_csv(exact_correlator(spec, n_exact, threads), out_dir / "exact.csv")

    body = report_dict(report, classification, epsilon, seed)
    write_report_json(body, out_dir / "report.json")
    logger.info("theory report: classifier=%s z_star=%s alpha=%s", body["classifier"], body["z_star"], body["alpha"])
    return body
