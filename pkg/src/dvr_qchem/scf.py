"""Restricted closed-shell Hartree-Fock in a DVR basis.

The DVR repulsion is two-index, so the Coulomb matrix is diagonal,
``J_ii = sum_k g_ik D_kk``, and exchange is the elementwise product
``K = g * D``.  ``D`` is the per-spin density matrix ``C_occ C_occ^T``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ContractError, check_positive_int
from .model import IntegralSet
from .numerics import ConvergenceError

__all__ = [
    "ScfResult",
    "AufbauDegeneracyError",
    "fock_matrix",
    "hf_energy",
    "scf_solve",
    "RHF",
]

logger = logging.getLogger(__name__)


class AufbauDegeneracyError(RuntimeError):
    """HOMO and LUMO are degenerate, so the closed-shell occupation is ambiguous."""


@dataclass(frozen=True)
class ScfResult:
    mo_coeff: np.ndarray
    orbital_energies: np.ndarray
    density: np.ndarray
    e_hf: float
    iterations: int
    converged: bool
    n_electrons: int
    fock: np.ndarray

    @property
    def n_occ(self) -> int:
        return self.n_electrons // 2


def fock_matrix(ints: IntegralSet, density) -> np.ndarray:
    """``F = h + 2J - K`` for the per-spin density ``density``."""
    d = np.asarray(density, dtype=float)
    if d.shape != ints.g.shape:
        raise ContractError(f"density shape {d.shape} does not match basis size {ints.n}")
    coulomb = ints.g @ np.diag(d)
    return ints.hcore + np.diag(2.0 * coulomb) - ints.g * d


def hf_energy(ints: IntegralSet, density, fock) -> float:
    """Closed-shell energy ``sum_ij D_ij (h_ij + F_ij) + E_nn``."""
    d = np.asarray(density, dtype=float)
    return float(np.sum(d * (ints.hcore + np.asarray(fock))) + ints.e_nn)


def _aufbau_density(fock: np.ndarray, n_occ: int, gap_tol: float):
    eps, c = scipy.linalg.eigh(fock)
    if 0 < n_occ < len(eps) and eps[n_occ] - eps[n_occ - 1] < gap_tol:
        raise AufbauDegeneracyError(
            f"degenerate frontier orbitals: e_homo={eps[n_occ - 1]:.10f}, e_lumo={eps[n_occ]:.10f}"
        )
    c_occ = c[:, :n_occ]
    return eps, c, c_occ @ c_occ.T


class _Diis:
    def __init__(self, size: int = 8):
        self.size = size
        self.focks: list[np.ndarray] = []
        self.errors: list[np.ndarray] = []

    def extrapolate(self, fock: np.ndarray, error: np.ndarray) -> np.ndarray:
        self.focks.append(fock)
        self.errors.append(error)
        if len(self.focks) > self.size:
            self.focks.pop(0)
            self.errors.pop(0)
        m = len(self.focks)
        if m < 2:
            return fock
        b = -np.ones((m + 1, m + 1))
        b[m, m] = 0.0
        for i in range(m):
            for j in range(i + 1):
                b[i, j] = b[j, i] = np.vdot(self.errors[i], self.errors[j])
        rhs = np.zeros(m + 1)
        rhs[m] = -1.0
        try:
            coef = np.linalg.solve(b, rhs)[:m]
        except np.linalg.LinAlgError:
            return fock
        return sum(c * f for c, f in zip(coef, self.focks))


def scf_solve(
    ints: IntegralSet,
    n_electrons: int,
    max_iter: int = 200,
    e_tol: float = 1e-10,
    comm_tol: float = 1e-8,
    mixing: float = 0.5,
    diis: bool = False,
    gap_tol: float = 1e-8,
    dens_tol: float = 1e-10,
) -> ScfResult:
    """Self-consistent field iterations starting from the core Hamiltonian.

    ``mixing`` is the weight of the previous density in the linear update
    ``D <- mixing * D_old + (1 - mixing) * D_new``.  Convergence requires
    ``|dE| < e_tol``, ``max |FD - DF| < comm_tol`` and that the Aufbau
    density of ``F[D]`` reproduces ``D`` within ``dens_tol``, so the returned
    orbitals, orbital energies and density are mutually consistent.
    """
    n_electrons = check_positive_int(n_electrons, "n_electrons", allow_zero=True)
    if n_electrons % 2:
        raise ContractError("restricted HF needs an even electron count")
    n_occ = n_electrons // 2
    if n_occ > ints.n:
        raise ContractError(f"{n_electrons} electrons do not fit in {ints.n} spatial orbitals")
    if not 0.0 <= mixing < 1.0:
        raise ContractError("mixing must lie in [0, 1)")

    _, _, d = _aufbau_density(ints.hcore, n_occ, gap_tol)
    accel = _Diis() if diis else None
    e_old = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f = fock_matrix(ints, d)
        e = hf_energy(ints, d, f)
        comm = f @ d - d @ f
        err = np.max(np.abs(comm)) if comm.size else 0.0
        de = np.inf if e_old is None else abs(e - e_old)
        _, _, d_canon = _aufbau_density(f, n_occ, gap_tol)
        step = np.max(np.abs(d_canon - d)) if d.size else 0.0
        logger.debug("scf iter %3d  E = %.12f  dE = %.3e  [F,D] = %.3e", it, e, de, err)
        if err < comm_tol and step < dens_tol and (de < e_tol or n_occ == 0):
            converged = True
            break
        e_old = e
        if accel is not None:
            _, _, d = _aufbau_density(accel.extrapolate(f, comm), n_occ, gap_tol)
        else:
            d = mixing * d + (1.0 - mixing) * d_canon

    # canonical orbitals of the final Fock matrix
    f = fock_matrix(ints, d)
    eps, c = scipy.linalg.eigh(f)
    c_occ = c[:, :n_occ]
    d = c_occ @ c_occ.T
    f = fock_matrix(ints, d)
    e = hf_energy(ints, d, f)
    if not converged:
        logger.warning("SCF not converged after %d iterations", max_iter)
    return ScfResult(
        mo_coeff=c,
        orbital_energies=eps,
        density=d,
        e_hf=e,
        iterations=it,
        converged=converged,
        n_electrons=n_electrons,
        fock=f,
    )


class RHF(BaseEstimator):
    """Restricted Hartree-Fock estimator.

    ``fit(integrals)`` runs the SCF and exposes ``e_tot_``, ``mo_coeff_``,
    ``mo_energy_``, ``density_`` and the full ``result_``.
    """

    def __init__(
        self,
        n_electrons=None,
        max_iter=200,
        e_tol=1e-10,
        comm_tol=1e-8,
        mixing=0.5,
        diis=False,
        raise_on_failure=True,
    ):
        self.n_electrons = n_electrons
        self.max_iter = max_iter
        self.e_tol = e_tol
        self.comm_tol = comm_tol
        self.mixing = mixing
        self.diis = diis
        self.raise_on_failure = raise_on_failure

    def fit(self, integrals: IntegralSet, n_electrons=None):
        n_e = n_electrons if n_electrons is not None else self.n_electrons
        if n_e is None:
            raise ContractError("n_electrons must be given to the constructor or to fit()")
        res = scf_solve(
            integrals,
            n_e,
            max_iter=self.max_iter,
            e_tol=self.e_tol,
            comm_tol=self.comm_tol,
            mixing=self.mixing,
            diis=self.diis,
        )
        if not res.converged and self.raise_on_failure:
            raise ConvergenceError(f"SCF did not converge in {self.max_iter} iterations", best=res)
        self.result_ = res
        self.integrals_ = integrals
        self.e_tot_ = res.e_hf
        self.mo_coeff_ = res.mo_coeff
        self.mo_energy_ = res.orbital_energies
        self.density_ = res.density
        self.converged_ = res.converged
        return self

    def predict(self, integrals: IntegralSet = None) -> float:
        """Total energy; refits when given a different integral set."""
        if integrals is not None:
            return self.fit(integrals).e_tot_
        check_is_fitted(self, "e_tot_")
        return self.e_tot_
