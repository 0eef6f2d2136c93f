"""Electronic structure of one-dimensional chains in a DVR basis.

Hartree-Fock, determinant CASCI, Jordan-Wigner spin-chain CI and two-site
DMRG all operate on the same grid-based integrals.  Each method is
available as a plain function and as an estimator with ``fit``/``predict``.
"""
from importlib.metadata import PackageNotFoundError, version

from ._validation import ContractError
from .active_space import ActiveSpaceHamiltonian, build_active_hamiltonian
from .detci import CASCI, CiResult, solve_casci
from .dmrg import DMRG, DmrgResult, chain_terms, dmrg_run
from .dvr import DvrBasis, build_sinc_dvr, build_sine_dvr, kinetic_matrix
from .jwci import JWCI, JwciResult, build_jw_hamiltonian, solve_jwci
from .model import (
    ANGSTROM_TO_BOHR,
    ChainGeometry,
    IntegralSet,
    build_integrals,
    screened_coulomb,
    four_proton_geometry,
)
from .numerics import ConvergenceError, EigenPairs, dense_sym_eig, lowest_eigs
from .scf import RHF, AufbauDegeneracyError, ScfResult, scf_solve

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.0.0"

__all__ = [
    "ANGSTROM_TO_BOHR",
    "ActiveSpaceHamiltonian",
    "AufbauDegeneracyError",
    "CASCI",
    "ChainGeometry",
    "CiResult",
    "ContractError",
    "ConvergenceError",
    "DMRG",
    "DmrgResult",
    "DvrBasis",
    "EigenPairs",
    "IntegralSet",
    "JWCI",
    "JwciResult",
    "RHF",
    "ScfResult",
    "build_active_hamiltonian",
    "build_integrals",
    "build_jw_hamiltonian",
    "build_sinc_dvr",
    "build_sine_dvr",
    "chain_terms",
    "dense_sym_eig",
    "dmrg_run",
    "kinetic_matrix",
    "lowest_eigs",
    "scf_solve",
    "screened_coulomb",
    "solve_casci",
    "solve_jwci",
    "four_proton_geometry",
]
