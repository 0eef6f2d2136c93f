"""Screened-Coulomb pseudo-hydrogen chain and its DVR integrals."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from ._validation import ContractError, check_positive_int
from .dvr import DvrBasis, kinetic_matrix

__all__ = [
    "ANGSTROM_TO_BOHR",
    "ChainGeometry",
    "IntegralSet",
    "screened_coulomb",
    "nuclear_attraction_vector",
    "eri_matrix",
    "nuclear_repulsion",
    "build_integrals",
    "four_proton_geometry",
]

# bohr per angstrom; the single conversion point for config input
ANGSTROM_TO_BOHR = 1.8897259886

_V0 = 2.0 / np.sqrt(np.pi)


@dataclass(frozen=True)
class ChainGeometry:
    """Nuclei on a line (bohr) and the electron count."""

    positions: np.ndarray
    charges: np.ndarray
    n_electrons: int

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.positions, dtype=float))
        chg = np.atleast_1d(np.asarray(self.charges))
        if pos.shape != chg.shape:
            raise ContractError("positions and charges must have the same length")
        if np.any(np.diff(pos) <= 0):
            raise ContractError("nuclear positions must be strictly ascending")
        if chg.size and (np.any(chg < 1) or not np.all(np.equal(np.mod(chg, 1), 0))):
            raise ContractError("nuclear charges must be positive integers")
        n_e = check_positive_int(self.n_electrons, "n_electrons", allow_zero=True)
        if n_e % 2:
            raise ContractError("n_electrons must be even (restricted closed shell)")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", chg.astype(float))
        object.__setattr__(self, "n_electrons", n_e)

    def translated(self, shift: float) -> "ChainGeometry":
        return ChainGeometry(self.positions + shift, self.charges, self.n_electrons)


@dataclass(frozen=True)
class IntegralSet:
    """One- and two-electron integrals of the chain in a DVR basis.

    ``t`` kinetic matrix, ``v`` diagonal nuclear attraction, ``g`` the
    two-index repulsion ``g_ik = (ii|kk)``, ``e_nn`` nuclear repulsion.
    """

    t: np.ndarray
    v: np.ndarray
    g: np.ndarray
    e_nn: float
    basis: DvrBasis = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.v)

    @property
    def hcore(self) -> np.ndarray:
        return self.t + np.diag(self.v)


def screened_coulomb(r):
    """``erf(r) / r`` with its finite limit ``2/sqrt(pi)`` at ``r = 0``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ContractError("distance must be non-negative")
    out = np.full(r_arr.shape, _V0)
    small = r_arr < 1e-6
    # erf(r)/r = 2/sqrt(pi) (1 - r^2/3 + r^4/10 - ...)
    out[small] = _V0 * (1.0 - r_arr[small] ** 2 / 3.0)
    big = ~small
    out[big] = erf(r_arr[big]) / r_arr[big]
    return float(out) if out.ndim == 0 else out


def nuclear_attraction_vector(basis: DvrBasis, geom: ChainGeometry) -> np.ndarray:
    """``v_i = -sum_I Z_I v_C(|x_i - R_I|)`` on the grid."""
    if geom.positions.size == 0:
        return np.zeros(basis.n)
    dist = np.abs(basis.grid[:, None] - geom.positions[None, :])
    return -(screened_coulomb(dist) * geom.charges[None, :]).sum(axis=1)


def eri_matrix(basis: DvrBasis) -> np.ndarray:
    """Two-index repulsion ``g_ik = v_C(|x_i - x_k|)`` of the diagonal approximation."""
    return screened_coulomb(np.abs(basis.grid[:, None] - basis.grid[None, :]))


def nuclear_repulsion(geom: ChainGeometry) -> float:
    """Screened repulsion ``sum_{I<J} Z_I Z_J v_C(|R_I - R_J|)``."""
    pos, chg = geom.positions, geom.charges
    if pos.size < 2:
        return 0.0
    dist = np.abs(pos[:, None] - pos[None, :])
    iu = np.triu_indices(len(pos), 1)
    if np.any(dist[iu] < 1e-12):
        warnings.warn("coincident nuclei; screened repulsion stays finite", RuntimeWarning)
    zz = (chg[:, None] * chg[None, :])[iu]
    return float(np.sum(zz * screened_coulomb(dist[iu])))


def build_integrals(basis: DvrBasis, geom: ChainGeometry) -> IntegralSet:
    """All integrals of the chain Hamiltonian in ``basis``."""
    return IntegralSet(
        t=kinetic_matrix(basis),
        v=nuclear_attraction_vector(basis, geom),
        g=eri_matrix(basis),
        e_nn=nuclear_repulsion(geom),
        basis=basis,
    )


def four_proton_geometry(length: float = 10.0, scale: float = 1.0) -> ChainGeometry:
    """Four unit charges at ``-L/2, -L/6, L/6, L/2`` with four electrons.

    ``length`` is in input units and ``scale`` converts them to bohr
    (``ANGSTROM_TO_BOHR`` for angstrom input, 1 for bohr input).
    """
    l_bohr = length * scale
    pos = np.array([-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5]) * l_bohr
    return ChainGeometry(pos, np.ones(4, dtype=int), 4)
