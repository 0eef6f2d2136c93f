"""DVR -> molecular-orbital integral transforms and frozen-core folding.

Two-electron integrals are in chemists' notation throughout:
``eri[p, q, r, s] = (pq|rs)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ContractError, check_positive_int
from .model import IntegralSet
from .scf import ScfResult

__all__ = [
    "ActiveSpaceHamiltonian",
    "mo_transform_one",
    "mo_transform_eri",
    "frozen_core_fold",
    "build_active_hamiltonian",
    "MAX_DENSE_ORBITALS",
]

# dense four-index storage guard
MAX_DENSE_ORBITALS = 16


@dataclass(frozen=True)
class ActiveSpaceHamiltonian:
    """``H = e_core + sum h_eff[p,q] E_pq + 1/2 sum (pq|rs) (E_pq E_rs - delta_qr E_ps)``."""

    n_orb: int
    n_elec: int
    e_core: float
    h_eff: np.ndarray
    eri: np.ndarray
    orbital_indices: tuple = ()

    def __post_init__(self):
        l = self.n_orb
        if self.h_eff.shape != (l, l) or self.eri.shape != (l, l, l, l):
            raise ContractError("integral shapes do not match n_orb")
        if not 0 <= self.n_elec <= 2 * l:
            raise ContractError(f"{self.n_elec} electrons do not fit in {l} orbitals")


def mo_transform_one(h, u) -> np.ndarray:
    """``U^T h U``."""
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if h.shape != (u.shape[0], u.shape[0]):
        raise ContractError(f"h {h.shape} and U {u.shape} do not conform")
    return u.T @ h @ u


def mo_transform_eri(g, u) -> np.ndarray:
    """Four-index MO integrals from the two-index DVR repulsion.

    ``(pq|rs) = sum_ij U_ip U_iq g_ij U_jr U_js``, evaluated through the pair
    intermediate ``M[(pq), i] = U_ip U_iq`` as ``M g M^T``.
    """
    g = np.asarray(g, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    n, m = u.shape
    if g.shape != (n, n):
        raise ContractError(f"g {g.shape} and U {u.shape} do not conform")
    pair = np.einsum("ip,iq->pqi", u, u).reshape(m * m, n)
    return (pair @ g @ pair.T).reshape(m, m, m, m)


def frozen_core_fold(h_mo, eri_mo, frozen, active):
    """Fold doubly occupied ``frozen`` orbitals into an active-space Hamiltonian.

    Returns
    -------
    e_fc : float
        ``2 sum_f h_ff + sum_fg [2 (ff|gg) - (fg|gf)]``.
    h_eff : ndarray
        ``h_ij + sum_k [2 (ij|kk) - (ik|kj)]`` over active ``i, j``.
    eri_active : ndarray
        Active block of ``eri_mo``.
    """
    frozen = np.asarray(list(frozen), dtype=int)
    active = np.asarray(list(active), dtype=int)
    if np.intersect1d(frozen, active).size:
        raise ContractError("frozen and active orbital sets overlap")
    h_mo = np.asarray(h_mo, dtype=float)
    eri_mo = np.asarray(eri_mo, dtype=float)

    f = frozen
    if f.size:
        coul = eri_mo[np.ix_(f, f, f, f)]
        j_ff = np.einsum("ffgg->fg", coul)
        k_ff = np.einsum("fggf->fg", coul)
        e_fc = 2.0 * np.trace(h_mo[np.ix_(f, f)]) + np.sum(2.0 * j_ff - k_ff)
    else:
        e_fc = 0.0

    a = active
    h_eff = h_mo[np.ix_(a, a)].copy()
    if f.size and a.size:
        j_part = np.einsum("ijkk->ij", eri_mo[np.ix_(a, a, f, f)])
        k_part = np.einsum("ikkj->ij", eri_mo[np.ix_(a, f, f, a)])
        h_eff += 2.0 * j_part - k_part
    eri_active = eri_mo[np.ix_(a, a, a, a)].copy()
    return float(e_fc), h_eff, eri_active


def build_active_hamiltonian(
    scf: ScfResult, ints: IntegralSet, n_act_orb: int, n_act_elec: int
) -> ActiveSpaceHamiltonian:
    """CAS(``n_act_orb``, ``n_act_elec``) Hamiltonian on canonical HF orbitals.

    The lowest ``(n_electrons - n_act_elec) / 2`` orbitals are frozen and the
    next ``n_act_orb`` orbitals are active.
    """
    n_act_orb = check_positive_int(n_act_orb, "n_act_orb")
    n_act_elec = check_positive_int(n_act_elec, "n_act_elec", allow_zero=True)
    n_core_elec = scf.n_electrons - n_act_elec
    if n_core_elec < 0 or n_core_elec % 2:
        raise ContractError(
            f"frozen-core electron count {n_core_elec} must be a non-negative even number"
        )
    n_frozen = n_core_elec // 2
    if n_frozen + n_act_orb > ints.n:
        raise ContractError(f"active window exceeds the {ints.n} available orbitals")
    if n_act_orb > MAX_DENSE_ORBITALS:
        raise ContractError(f"at most {MAX_DENSE_ORBITALS} active orbitals are supported")
    if n_act_elec > 2 * n_act_orb:
        raise ContractError("too many active electrons for the active orbitals")

    sel = np.arange(n_frozen + n_act_orb)
    u = scf.mo_coeff[:, sel]
    h_mo = mo_transform_one(ints.hcore, u)
    eri_mo = mo_transform_eri(ints.g, u)
    frozen = range(n_frozen)
    active = range(n_frozen, n_frozen + n_act_orb)
    e_fc, h_eff, eri = frozen_core_fold(h_mo, eri_mo, frozen, active)
    return ActiveSpaceHamiltonian(
        n_orb=n_act_orb,
        n_elec=n_act_elec,
        e_core=e_fc + ints.e_nn,
        h_eff=0.5 * (h_eff + h_eff.T),
        eri=eri,
        orbital_indices=tuple(active),
    )
