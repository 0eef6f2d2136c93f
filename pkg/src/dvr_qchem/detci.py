"""CASCI over Slater determinants.

A determinant is a pair of integer bitstrings ``(alpha, beta)``; bit ``p``
marks orbital ``p`` as occupied.  Spin-orbitals are ordered all-alpha then
all-beta (alpha ``p`` -> ``p``, beta ``p`` -> ``L + p``) and a determinant is
``prod_{alpha asc} c+ prod_{beta asc} c+ |vac>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ContractError, check_positive_int
from .active_space import ActiveSpaceHamiltonian, build_active_hamiltonian
from .numerics import ConvergenceError, EigenPairs, dense_sym_eig, lowest_eigs

__all__ = [
    "DeterminantBasis",
    "CiResult",
    "enumerate_dets",
    "slater_condon_element",
    "ci_hamiltonian_dense",
    "CiOperator",
    "solve_casci",
    "CASCI",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 2000


def _strings(n_orb: int, n_el: int) -> np.ndarray:
    return np.array(
        [sum(1 << p for p in occ) for occ in combinations(range(n_orb), n_el)], dtype=np.int64
    )


@dataclass(frozen=True)
class DeterminantBasis:
    """All determinants with ``n_up`` alpha and ``n_down`` beta electrons.

    Determinant ``I = ia * len(beta_strings) + ib`` is
    ``(alpha_strings[ia], beta_strings[ib])``; the order is lexicographic in
    the occupied-orbital tuples.
    """

    n_orb: int
    n_up: int
    n_down: int
    alpha_strings: np.ndarray
    beta_strings: np.ndarray

    @property
    def size(self) -> int:
        return len(self.alpha_strings) * len(self.beta_strings)

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, idx: int) -> tuple[int, int]:
        ia, ib = divmod(idx, len(self.beta_strings))
        return int(self.alpha_strings[ia]), int(self.beta_strings[ib])

    @property
    def dets(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a in self.alpha_strings for b in self.beta_strings]


@dataclass(frozen=True)
class CiResult:
    """Ascending CI energies (``e_core`` included) and coefficient columns."""

    energies: np.ndarray
    coefficients: np.ndarray
    basis: DeterminantBasis
    spin_square: np.ndarray
    converged: bool = True


def enumerate_dets(n_orb: int, n_up: int, n_down: int) -> DeterminantBasis:
    n_orb = check_positive_int(n_orb, "n_orb")
    n_up = check_positive_int(n_up, "n_up", allow_zero=True)
    n_down = check_positive_int(n_down, "n_down", allow_zero=True)
    if n_up > n_orb or n_down > n_orb:
        raise ContractError(f"cannot place ({n_up}, {n_down}) electrons in {n_orb} orbitals")
    return DeterminantBasis(n_orb, n_up, n_down, _strings(n_orb, n_up), _strings(n_orb, n_down))


def _apply_ops(bits: int, ops) -> tuple[int, int]:
    """Apply (orbital, create) operators right to left; returns (bits, sign), sign 0 if killed."""
    sign = 1
    for orb, create in reversed(ops):
        occupied = (bits >> orb) & 1
        if occupied == create:
            return bits, 0
        if (bits & ((1 << orb) - 1)).bit_count() & 1:
            sign = -sign
        bits ^= 1 << orb
    return bits, sign


def _occ_list(bits: int) -> list[int]:
    out = []
    p = 0
    while bits:
        if bits & 1:
            out.append(p)
        bits >>= 1
        p += 1
    return out


def slater_condon_element(det_i, det_j, h_eff, eri) -> float:
    """``<Phi_J | H | Phi_I>`` without the constant core energy.

    ``det_i`` and ``det_j`` are ``(alpha_bits, beta_bits)`` pairs.
    """
    h = np.asarray(h_eff)
    l = h.shape[0]
    so_i = int(det_i[0]) | (int(det_i[1]) << l)
    so_j = int(det_j[0]) | (int(det_j[1]) << l)
    if so_i.bit_count() != so_j.bit_count():
        return 0.0
    diff = so_i ^ so_j
    n_diff = diff.bit_count() // 2
    if n_diff > 2:
        return 0.0

    def h1(p, q):
        return h[p % l, q % l] if p // l == q // l else 0.0

    def g2(p, q, r, s):
        # <pq|rs> = (pr|qs) in spin-orbitals
        if p // l != r // l or q // l != s // l:
            return 0.0
        return eri[p % l, r % l, q % l, s % l]

    occ = _occ_list(so_i)
    if n_diff == 0:
        e = sum(h1(m, m) for m in occ)
        for a in occ:
            for b in occ:
                e += 0.5 * (g2(a, b, a, b) - g2(a, b, b, a))
        return float(e)

    holes = _occ_list(so_i & diff)
    parts = _occ_list(so_j & diff)
    if n_diff == 1:
        m, p = holes[0], parts[0]
        _, s = _apply_ops(so_i, [(p, 1), (m, 0)])
        e = h1(p, m)
        for n in occ:
            e += g2(p, n, m, n) - g2(p, n, n, m)
        return float(s * e)

    m, n = holes
    p, q = parts
    _, s = _apply_ops(so_i, [(p, 1), (q, 1), (n, 0), (m, 0)])
    return float(s * (g2(p, q, m, n) - g2(p, q, n, m)))


def ci_hamiltonian_dense(basis: DeterminantBasis, h_eff, eri) -> np.ndarray:
    """Dense CI matrix from the Slater-Condon rules (no core energy)."""
    a_str, b_str = basis.alpha_strings, basis.beta_strings
    pop = np.vectorize(lambda x: int(x).bit_count())
    da = pop(a_str[:, None] ^ a_str[None, :]) // 2
    db = pop(b_str[:, None] ^ b_str[None, :]) // 2
    nb = len(b_str)
    dim = basis.size
    hmat = np.zeros((dim, dim))
    for ia, ja in zip(*np.nonzero(da <= 2)):
        for ib, jb in zip(*np.nonzero(db <= 2 - da[ia, ja])):
            i = ia * nb + ib
            j = ja * nb + jb
            if j < i:
                continue
            val = slater_condon_element(
                (a_str[ia], b_str[ib]), (a_str[ja], b_str[jb]), h_eff, eri
            )
            hmat[i, j] = hmat[j, i] = val
    return hmat


def _excitation_ops(strings: np.ndarray, n_orb: int):
    """Sparse ``E_pq = c+_p c_q`` on one spin's strings, indexed [p][q]."""
    index = {int(s): k for k, s in enumerate(strings)}
    n = len(strings)
    ops = []
    for p in range(n_orb):
        row = []
        for q in range(n_orb):
            rows, cols, vals = [], [], []
            for k, s in enumerate(strings):
                t, sign = _apply_ops(int(s), [(p, 1), (q, 0)])
                if sign:
                    rows.append(index[t])
                    cols.append(k)
                    vals.append(float(sign))
            row.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
        ops.append(row)
    return ops


class CiOperator:
    """Matrix-free CI Hamiltonian built from spin-resolved excitation operators.

    ``H = sum_pq k_pq E_pq + 1/2 sum_pqrs (pq|rs) E_pq E_rs`` with
    ``k = h - 1/2 sum_r (pr|rq)``.  Vectors are flattened ``(n_alpha, n_beta)``
    coefficient matrices.
    """

    def __init__(self, basis: DeterminantBasis, h_eff, eri):
        self.basis = basis
        self.h = np.asarray(h_eff, dtype=float)
        self.eri = np.asarray(eri, dtype=float)
        l = basis.n_orb
        self.k = self.h - 0.5 * np.einsum("prrq->pq", self.eri)
        self.ea = _excitation_ops(basis.alpha_strings, l)
        self.eb = _excitation_ops(basis.beta_strings, l)
        self.shape2 = (len(basis.alpha_strings), len(basis.beta_strings))

    def _e(self, p: int, q: int, c: np.ndarray) -> np.ndarray:
        return self.ea[p][q] @ c + (self.eb[p][q] @ c.T).T

    def matvec(self, v: np.ndarray) -> np.ndarray:
        l = self.basis.n_orb
        c = v.reshape(self.shape2)
        d = np.stack([self._e(r, s, c) for r in range(l) for s in range(l)])
        w = np.tensordot(self.eri.reshape(l * l, l * l), d, axes=1)
        out = np.zeros_like(c)
        for p in range(l):
            for q in range(l):
                out += self._e(p, q, self.k[p, q] * c + 0.5 * w[p * l + q])
        return out.ravel()

    def diagonal(self) -> np.ndarray:
        l = self.basis.n_orb
        na = ((self.basis.alpha_strings[:, None] >> np.arange(l)) & 1).astype(float)
        nb = ((self.basis.beta_strings[:, None] >> np.arange(l)) & 1).astype(float)
        hd = np.diag(self.h)
        jm = np.einsum("ppqq->pq", self.eri)
        km = np.einsum("pqqp->pq", self.eri)
        ea = na @ hd + 0.5 * np.einsum("ip,pq,iq->i", na, jm - km, na)
        eb = nb @ hd + 0.5 * np.einsum("ip,pq,iq->i", nb, jm - km, nb)
        cross = na @ jm @ nb.T
        return (ea[:, None] + eb[None, :] + cross).ravel()

    def spin_square(self, v: np.ndarray) -> float:
        """``<S^2> = N_a - sum_pq <E^a_pq E^b_qp> + S_z^2 - S_z``."""
        l = self.basis.n_orb
        c = v.reshape(self.shape2)
        acc = 0.0
        for p in range(l):
            for q in range(l):
                acc += np.sum(c * (self.ea[p][q] @ c @ self.eb[q][p].T))
        sz = 0.5 * (self.basis.n_up - self.basis.n_down)
        norm = np.sum(c * c)
        return float((self.basis.n_up * norm - acc) / norm + sz * sz - sz)


def solve_casci(
    ash: ActiveSpaceHamiltonian,
    s_z: float = 0.0,
    n_roots: int = 1,
    tol: float = 1e-9,
    max_iter: int = 500,
) -> CiResult:
    """Lowest ``n_roots`` CI states in the ``S_z = s_z`` sector."""
    two_n_up = ash.n_elec + 2 * s_z
    if abs(two_n_up - round(two_n_up)) > 1e-12 or round(two_n_up) % 2:
        raise ContractError(f"S_z = {s_z} is incompatible with {ash.n_elec} electrons")
    n_up = int(round(two_n_up)) // 2
    n_down = ash.n_elec - n_up
    basis = enumerate_dets(ash.n_orb, n_up, n_down)
    op = CiOperator(basis, ash.h_eff, ash.eri)
    n_roots = min(check_positive_int(n_roots, "n_roots"), basis.size)

    if basis.size < DENSE_LIMIT:
        pairs = dense_sym_eig(ci_hamiltonian_dense(basis, ash.h_eff, ash.eri))
        pairs = EigenPairs(pairs.values[:n_roots], pairs.vectors[:, :n_roots])
    else:
        pairs = lowest_eigs(
            op.matvec, basis.size, k=n_roots, tol=tol, max_iter=max_iter, diag=op.diagonal()
        )
        if not pairs.converged:
            raise ConvergenceError(
                f"CI Davidson did not converge (residuals {pairs.residuals})", best=pairs
            )
    s2 = np.array([op.spin_square(v) for v in pairs.vectors.T])
    return CiResult(
        energies=pairs.values + ash.e_core,
        coefficients=pairs.vectors,
        basis=basis,
        spin_square=s2,
        converged=pairs.converged,
    )


class CASCI(BaseEstimator):
    """CASCI(n_active_orb, n_active_elec) on canonical RHF orbitals.

    ``fit(integrals, scf=None)`` runs RHF first when no SCF result is given.
    """

    def __init__(self, n_active_orb=6, n_active_elec=4, n_roots=1, s_z=0.0, n_electrons=None):
        self.n_active_orb = n_active_orb
        self.n_active_elec = n_active_elec
        self.n_roots = n_roots
        self.s_z = s_z
        self.n_electrons = n_electrons

    def fit(self, integrals, scf=None):
        from .scf import RHF, ScfResult

        if scf is None:
            n_e = self.n_electrons if self.n_electrons is not None else self.n_active_elec
            scf = RHF(n_electrons=n_e).fit(integrals).result_
        elif not isinstance(scf, ScfResult):
            scf = scf.result_
        ash = build_active_hamiltonian(scf, integrals, self.n_active_orb, self.n_active_elec)
        res = solve_casci(ash, s_z=self.s_z, n_roots=self.n_roots)
        self.active_hamiltonian_ = ash
        self.result_ = res
        self.energies_ = res.energies
        self.e_tot_ = float(res.energies[0])
        return self

    def predict(self, integrals=None, scf=None):
        if integrals is not None:
            return self.fit(integrals, scf).e_tot_
        check_is_fitted(self, "e_tot_")
        return self.e_tot_
