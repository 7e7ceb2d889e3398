"""
Dominant singularity of the first-order correlator and a decay-law classifier.

For the vanilla model K(z) = sum_j c_j z / (1 - lambda_j z) and D(z) = 1 - beta K(z).
Clearing denominators gives the polynomial

    P(z) = prod_j (1 - lambda_j z) - beta sum_j c_j z prod_(i != j) (1 - lambda_i z)

whose smallest positive root z_* sets C_n^app ~ A n^(q-1) z_*^(-n).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import stats

from errors import ConfigError
from functions.theory.kernels import ModelMode, alpha_exponents, dominant_mode

logger = logging.getLogger(__name__)

ROOT_CLUSTER_TOL = 1e-8
IMAG_TOL = 1e-9
UNIT_CIRCLE_POINTS = 4096
MIN_TAIL_POINTS = 64


@dataclass
class SingularityReport:
    z_star: Optional[float] = None
    multiplicity: Optional[int] = None
    rho: Optional[float] = None
    alpha: Optional[float] = None
    unit_disk_safe: Optional[bool] = None
    sup_beta_k: Optional[float] = None
    marginal: bool = False
    roots: list = field(default_factory=list)
    message: str = ""

    @property
    def degenerate(self):
        return self.z_star is None


def _merged_modes(spec):
    """Drop c = 0 modes and merge equal lambdas by adding their couplings."""
    merged = {}
    for lam, c in zip(spec.lambdas, spec.couplings):
        merged[lam] = merged.get(lam, 0.0) + c
    return [(lam, c) for lam, c in sorted(merged.items()) if c != 0.0]


def denominator_polynomial(spec):
    """Ascending coefficients of P(z)."""
    modes = _merged_modes(spec)
    factors = [np.array([1.0, -lam]) for lam, _ in modes]
    poly = np.array([1.0])
    for f in factors:
        poly = P.polymul(poly, f)
    for j, (_, c) in enumerate(modes):
        term = np.array([0.0, -spec.beta * c])
        for i, f in enumerate(factors):
            if i != j:
                term = P.polymul(term, f)
        poly = P.polyadd(poly, term)
    return poly


def sup_on_unit_circle(spec, n_points=UNIT_CIRCLE_POINTS):
    """max |beta K(z)| over n_points equally spaced points of |z| = 1."""
    z = np.exp(2j * np.pi * np.arange(n_points) / n_points)
    K = np.zeros(n_points, dtype=np.complex128)
    for lam, c in zip(spec.lambdas, spec.couplings):
        K += c * z / (1.0 - lam * z)
    return float(np.max(np.abs(spec.beta * K)))


def singularity_report(spec):
    """
        Locate z_*, its multiplicity q and the rate rho = 1 / z_* for a vanilla spec.

        A dilated spec gets the power-law exponent alpha of its dominant mode instead;
        its generating function has no isolated dominant pole.
    """
    if spec.mode is ModelMode.DILATED:
        try:
            alpha = alpha_exponents(spec)[dominant_mode(spec)]
        except ConfigError:
            alpha = None
        return SingularityReport(alpha=alpha, message="dilated model: power-law regime, no pole analysis")

    sup = sup_on_unit_circle(spec)
    report = SingularityReport(unit_disk_safe=sup < 1.0, sup_beta_k=sup)
    poly = P.polytrim(denominator_polynomial(spec))
    if len(poly) < 2:
        report.message = "no dominant positive singularity (D(z) has no zeros)"
        return report

    roots = P.polyroots(poly)
    report.roots = [complex(r) for r in roots]
    real = [r.real for r in roots if abs(r.imag) <= IMAG_TOL * max(1.0, abs(r)) and r.real > 0]
    if not real:
        report.message = "no dominant positive singularity"
        return report

    z_star = min(real)
    report.z_star = float(z_star)
    report.multiplicity = sum(1 for r in roots if abs(r - z_star) <= ROOT_CLUSTER_TOL * max(1.0, z_star))
    report.rho = 1.0 / z_star
    report.marginal = abs(z_star - 1.0) <= ROOT_CLUSTER_TOL
    if report.marginal:
        report.message = "z_* on the unit circle: marginal case, no asymptotic claim"
    logger.debug("z_* = %.12g (q = %d), sup|beta K| = %.4g", z_star, report.multiplicity, sup)
    return report


# ---------------------------------------------------------
# Decay classifier
# ---------------------------------------------------------

class DecayKind(str, Enum):
    EXPONENTIAL = "exponential"
    POWER_LAW = "power_law"
    UNDETERMINED = "undetermined"


EXPECTED_DECAY = {ModelMode.VANILLA: DecayKind.EXPONENTIAL, ModelMode.DILATED: DecayKind.POWER_LAW}


@dataclass
class DecayClassification:
    kind: DecayKind
    rate: Optional[float] = None
    exponent: Optional[float] = None
    r2_exp: Optional[float] = None
    r2_pow: Optional[float] = None
    n_points: int = 0
    mode: Optional[ModelMode] = None

    @property
    def as_expected(self):
        """Whether the selected law is the one the model's wiring predicts (None without a mode)."""
        if self.mode is None:
            return None
        return self.kind is EXPECTED_DECAY[self.mode]


def decay_classifier(values, mode=None, tail=None):
    """
        Compare log C vs n (exponential) against log C vs log n (power law) on the tail.

        Parameters:
            values (array): C_1, C_2, ... (index 1 first).
            mode (ModelMode | str | None): wiring that produced the series; recorded so
                the result can be checked against the law that wiring predicts.
            tail ((int, int) | None): inclusive index range; defaults to the last 3/4.

        Returns:
            DecayClassification: the better-R^2 model with both fits, or UNDETERMINED
            when fewer than 64 positive tail coefficients remain.
    """
    if mode is not None:
        try:
            mode = ModelMode(mode)
        except ValueError:
            raise ConfigError(f"unknown model mode {mode!r}; expected one of {[m.value for m in ModelMode]}")
    values = np.asarray(values, dtype=np.float64)
    n = np.arange(1, len(values) + 1)
    start, stop = tail if tail is not None else (max(1, len(values) // 4), len(values))
    keep = (n >= start) & (n <= stop) & (values > 0) & np.isfinite(values)
    if np.sum(keep) < MIN_TAIL_POINTS:
        return DecayClassification(DecayKind.UNDETERMINED, n_points=int(np.sum(keep)), mode=mode)

    y = np.log(values[keep])
    exp_fit = stats.linregress(n[keep].astype(np.float64), y)
    pow_fit = stats.linregress(np.log(n[keep]), y)
    r2_exp, r2_pow = exp_fit.rvalue ** 2, pow_fit.rvalue ** 2
    kind = DecayKind.EXPONENTIAL if r2_exp >= r2_pow else DecayKind.POWER_LAW
    return DecayClassification(
        kind=kind,
        rate=-float(exp_fit.slope),
        exponent=-float(pow_fit.slope),
        r2_exp=float(r2_exp),
        r2_pow=float(r2_pow),
        n_points=int(np.sum(keep)),
        mode=mode,
    )
