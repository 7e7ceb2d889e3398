"""
Local energies for the periodic transverse-field Ising chain and the cluster-state
(entanglement-swapping) Hamiltonian, with exact-diagonalization oracles.

    H_TFIM = - sum_{i=1}^{N} Z_i Z_{i+1} - g sum_{i=1}^{N} X_i          (site N+1 = site 1)
    H_ES   = - sum_{k=2}^{N-2} X_{k-1} Z_k X_{k+1}
             - Z_1 X_2 - X_{N-1} X_N - X_{N-2} Z_{N-1} Z_N

Sites are 0-based in code. E_loc(sigma) = sum_sigma' H[sigma, sigma'] psi(sigma')/psi(sigma)
is evaluated in log space: every off-diagonal term contributes
coeff * exp(log psi(sigma') - log psi(sigma)).
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import eigsh

from errors import ConfigError, InvalidInputError, ResourceError
from functions.numerics import map_chunks
from functions.wavefunction import spin_config

logger = logging.getLogger(__name__)

MAX_ED_SITES = 16
DENSE_ED_SITES = 10

PAULI_X = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
PAULI_Z = sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))


class HamiltonianKind(str, Enum):
    TFIM_PBC = "tfim"
    CLUSTER_ES = "cluster"


@dataclass(frozen=True)
class HamiltonianSpec:
    """Which model, how many sites, and the transverse field g (TFIM only)."""

    kind: HamiltonianKind
    n_sites: int
    field: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", HamiltonianKind(self.kind))
        if self.n_sites < 1:
            raise ConfigError(f"n_sites must be positive, got {self.n_sites}")
        if self.kind is HamiltonianKind.CLUSTER_ES and self.n_sites < 3:
            raise ConfigError("the cluster Hamiltonian needs at least 3 sites for its boundary terms")
        if self.field < 0:
            raise ConfigError(f"field g must be non-negative, got {self.field}")

    @property
    def is_stoquastic(self):
        return self.kind is HamiltonianKind.TFIM_PBC


# ---------------------------------------------------------
# Coupling tables
# ---------------------------------------------------------

def _tfim_table(spec, sigmas):
    """Diagonal energies (batch,), flip masks (terms, N) and coefficients (batch, terms)."""
    n = spec.n_sites
    diag = -np.sum(sigmas * np.roll(sigmas, -1, axis=1), axis=1).astype(np.float64)
    flips = np.eye(n, dtype=bool)
    coeffs = np.full((len(sigmas), n), -spec.field)
    return diag, flips, coeffs


def _cluster_table(spec, sigmas):
    n = spec.n_sites
    if n < 4:
        raise ConfigError("the cluster local energy needs N >= 4 so every term family is distinct")
    s = sigmas.astype(np.float64)
    flips, coeffs = [], []

    # bulk X_{k-1} Z_k X_{k+1}
    for k in range(1, n - 2):
        mask = np.zeros(n, dtype=bool)
        mask[[k - 1, k + 1]] = True
        flips.append(mask)
        coeffs.append(-s[:, k])

    # Z_1 X_2
    mask = np.zeros(n, dtype=bool)
    mask[1] = True
    flips.append(mask)
    coeffs.append(-s[:, 0])

    # X_{N-1} X_N
    mask = np.zeros(n, dtype=bool)
    mask[[n - 2, n - 1]] = True
    flips.append(mask)
    coeffs.append(-np.ones(len(s)))

    # X_{N-2} Z_{N-1} Z_N
    mask = np.zeros(n, dtype=bool)
    mask[n - 3] = True
    flips.append(mask)
    coeffs.append(-s[:, n - 2] * s[:, n - 1])

    diag = np.zeros(len(s))
    return diag, np.array(flips), np.stack(coeffs, axis=1)


def coupling_table(spec, sigmas):
    sigmas = np.atleast_2d(sigmas)
    if sigmas.shape[1] != spec.n_sites:
        raise InvalidInputError(f"configuration has {sigmas.shape[1]} sites, Hamiltonian has {spec.n_sites}")
    if spec.kind is HamiltonianKind.TFIM_PBC:
        return _tfim_table(spec, sigmas)
    return _cluster_table(spec, sigmas)


# ---------------------------------------------------------
# Local energies
# ---------------------------------------------------------

def _local_energy_single(spec, sigma, amp_of):
    sigma = spin_config(sigma)
    diag, flips, coeffs = coupling_table(spec, sigma[None, :])
    base = amp_of(sigma).log_psi
    total = complex(diag[0])
    for mask, coeff in zip(flips, coeffs[0]):
        flipped = np.where(mask, -sigma, sigma)
        total += coeff * np.exp(amp_of(flipped).log_psi - base)
    return total


def local_energy_tfim(spec, sigma, amp_of):
    """
        TFIM local energy of one configuration.

        Parameters:
            spec (HamiltonianSpec): kind TFIM_PBC.
            sigma (array): spins in {-1, +1}.
            amp_of (callable): configuration -> AmplitudeResult.

        Returns:
            complex: -sum_i s_i s_{i+1} - g sum_i psi(flip_i sigma) / psi(sigma).
    """
    if spec.kind is not HamiltonianKind.TFIM_PBC:
        raise ConfigError(f"local_energy_tfim called with a {spec.kind.value} Hamiltonian")
    return _local_energy_single(spec, sigma, amp_of)


def local_energy_cluster(spec, sigma, amp_of):
    """Cluster-state local energy of one configuration; every term flips at least one spin."""
    if spec.kind is not HamiltonianKind.CLUSTER_ES:
        raise ConfigError(f"local_energy_cluster called with a {spec.kind.value} Hamiltonian")
    return _local_energy_single(spec, sigma, amp_of)


def local_energy(spec, sigma, amp_of):
    if spec.kind is HamiltonianKind.TFIM_PBC:
        return local_energy_tfim(spec, sigma, amp_of)
    return local_energy_cluster(spec, sigma, amp_of)


def local_energies(spec, sigmas, log_psi, log_psi_of):
    """
        Batched local energies.

        Parameters:
            spec (HamiltonianSpec): model.
            sigmas (array): configurations, shape (batch, N).
            log_psi (array): complex log psi of `sigmas`, shape (batch,).
            log_psi_of (callable): (configs (M, N)) -> complex log psi (M,).

        Returns:
            array: complex local energies, shape (batch,).
    """
    sigmas = np.atleast_2d(sigmas)
    diag, flips, coeffs = coupling_table(spec, sigmas)
    batch, n = sigmas.shape
    n_terms = len(flips)
    flipped = np.where(flips[None, :, :], -sigmas[:, None, :], sigmas[:, None, :])
    connected = np.asarray(log_psi_of(flipped.reshape(batch * n_terms, n))).reshape(batch, n_terms)
    ratios = np.exp(connected - np.asarray(log_psi)[:, None])
    return diag + np.sum(coeffs * ratios, axis=1)


# ---------------------------------------------------------
# Exact diagonalization
# ---------------------------------------------------------

def _site_operator(op, site, n_sites):
    """op on `site`, identity elsewhere; site 0 is the leftmost kron factor."""
    eye_left = sparse.identity(2 ** site, format="csr")
    eye_right = sparse.identity(2 ** (n_sites - site - 1), format="csr")
    return sparse.kron(sparse.kron(eye_left, op, "csr"), eye_right, "csr")


def _pauli_terms(spec):
    """(coefficient, [(op, site), ...]) for every term of the Hamiltonian."""
    n = spec.n_sites
    if spec.kind is HamiltonianKind.TFIM_PBC:
        terms = []
        for i in range(n):
            terms.append((-1.0, [(PAULI_Z, i), (PAULI_Z, (i + 1) % n)]))
            terms.append((-spec.field, [(PAULI_X, i)]))
        return terms

    terms = [(-1.0, [(PAULI_X, k - 1), (PAULI_Z, k), (PAULI_X, k + 1)]) for k in range(1, n - 2)]
    terms.append((-1.0, [(PAULI_Z, 0), (PAULI_X, 1)]))
    terms.append((-1.0, [(PAULI_X, n - 2), (PAULI_X, n - 1)]))
    terms.append((-1.0, [(PAULI_X, n - 3), (PAULI_Z, n - 2), (PAULI_Z, n - 1)]))
    return terms


def hamiltonian_matrix(spec, threads=1):
    """
        Sparse 2^N x 2^N matrix of the Hamiltonian, built from Pauli kron products.

        Terms are built on up to `threads` workers and summed in term order.
    """
    n = spec.n_sites
    if n > MAX_ED_SITES:
        raise ResourceError(f"exact diagonalization is limited to N <= {MAX_ED_SITES}, got {n}")

    def build(term):
        coeff, factors = term
        product = _site_operator(*factors[0], n)
        for op, site in factors[1:]:
            product = product @ _site_operator(op, site, n)
        return coeff * product

    H = sparse.csr_matrix((2 ** n, 2 ** n))
    for part in map_chunks(build, _pauli_terms(spec), threads):
        H = H + part
    return H


def exact_diag(spec, threads=1):
    """
        Ground energy and ground vector of the Hamiltonian (N <= 16).

        Small systems use a dense symmetric eigensolver, larger ones Lanczos.

        Returns:
            (float, array): ground energy and a normalized complex ground vector in
            basis order (see wavefunction.basis_configs).
    """
    H = hamiltonian_matrix(spec, threads)
    if spec.n_sites <= DENSE_ED_SITES:
        energies, vectors = np.linalg.eigh(H.toarray())
        ground_energy, ground = energies[0], vectors[:, 0]
    else:
        energies, vectors = eigsh(H, k=1, which="SA", tol=0.0)
        ground_energy, ground = energies[0], vectors[:, 0]
    logger.debug("exact ground energy for %s N=%d: %.12f", spec.kind.value, spec.n_sites, ground_energy)
    return float(ground_energy), ground.astype(np.complex128)


def energy_expectation(spec, psi):
    """<psi|H|psi> / <psi|psi> for a full basis-order amplitude vector."""
    H = hamiltonian_matrix(spec)
    psi = np.asarray(psi, dtype=np.complex128)
    return complex(np.vdot(psi, H @ psi) / np.vdot(psi, psi))


def free_fermion_energy(n_sites, field):
    """
        Ground energy of the periodic TFIM from its free-fermion solution.

        The ground state lives in the even-parity sector, whose fermion momenta are
        k = (2j - 1) pi / N; E_0 = - sum_k sqrt(1 + g^2 - 2 g cos k).
    """
    if n_sites < 2 or n_sites % 2:
        raise InvalidInputError("the closed form is used for even chain lengths only")
    k = (2 * np.arange(1, n_sites + 1) - 1) * np.pi / n_sites
    return float(-np.sum(np.sqrt(1.0 + field ** 2 - 2.0 * field * np.cos(k))))
