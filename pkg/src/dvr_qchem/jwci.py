"""Jordan-Wigner mapping of the active-space Hamiltonian onto a chain of 4-level sites.

Site states are indexed ``2 * n_up + n_dn``, i.e. ``(|0>, |dn>, |up>, |updn>)``,
which is the ordering in which the annihilators

    a_up = [[0,0,1,0],[0,0,0,1],[0,0,0,0],[0,0,0,0]]
    a_dn = [[0,1,0,0],[0,0,0,0],[0,0,0,-1],[0,0,0,0]]

act as ``sigma^- (x) 1`` and ``(-1)^{n_up} (x) sigma^-``.  The global fermion
order is ``(1 up, 1 dn, 2 up, 2 dn, ...)`` and site 0 is the leftmost
Kronecker factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ContractError, check_index
from .active_space import ActiveSpaceHamiltonian, build_active_hamiltonian
from .numerics import ConvergenceError, dense_sym_eig, lowest_eigs

__all__ = [
    "SiteOperatorSet",
    "SpinChainHamiltonian",
    "JW_MAX_SITES",
    "jw_site_ops",
    "embed_fermion_op",
    "build_jw_hamiltonian",
    "solve_jwci",
    "JwciResult",
    "det_to_jw",
    "JWCI",
]

JW_MAX_SITES = 10
_MATERIALIZE_MAX_SITES = 6

UP, DN = 0, 1


@dataclass(frozen=True)
class SiteOperatorSet:
    a_up: np.ndarray
    a_dn: np.ndarray
    n_up: np.ndarray
    n_dn: np.ndarray
    n: np.ndarray
    parity: np.ndarray
    identity: np.ndarray = field(default_factory=lambda: np.eye(4))

    def annihilator(self, spin: int) -> np.ndarray:
        return self.a_up if spin == UP else self.a_dn


def jw_site_ops() -> SiteOperatorSet:
    a_up = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0]], dtype=float)
    a_dn = np.array([[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, -1], [0, 0, 0, 0]], dtype=float)
    n_up = a_up.T @ a_up
    n_dn = a_dn.T @ a_dn
    return SiteOperatorSet(
        a_up=a_up,
        a_dn=a_dn,
        n_up=n_up,
        n_dn=n_dn,
        n=n_up + n_dn,
        parity=np.diag([1.0, -1.0, -1.0, 1.0]),
    )


_OPS = jw_site_ops()


def _fermion_factors(site: int, spin: int, dagger: bool) -> dict[int, np.ndarray]:
    """Per-site factors of ``c_{site,spin}`` (or its adjoint); identity sites omitted."""
    a = _OPS.annihilator(spin)
    factors = {j: _OPS.parity for j in range(site)}
    factors[site] = a.T if dagger else a
    return factors


def _multiply_factors(left: dict, right: dict) -> dict:
    out = dict(right)
    for j, m in left.items():
        out[j] = m @ out[j] if j in out else m
    return {j: m for j, m in out.items() if not np.array_equal(m, _OPS.identity)}


def _kron_sparse(factors: dict, l: int) -> sp.csr_matrix:
    mats = [sp.csr_matrix(factors.get(j, _OPS.identity)) for j in range(l)]
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def _apply_factors(factors: dict, vec: np.ndarray, l: int) -> np.ndarray:
    """Apply a Kronecker product given per-site factors to a state vector."""
    psi = vec.reshape((4,) * l)
    for j, m in factors.items():
        psi = np.moveaxis(np.tensordot(m, psi, axes=([1], [j])), 0, j)
    return psi.reshape(-1)


def embed_fermion_op(ops: SiteOperatorSet, site: int, spin: int, dagger: bool, l: int) -> sp.csr_matrix:
    """``c_{site,spin}`` (``dagger=False``) or its adjoint as a ``4^l`` sparse matrix.

    ``spin`` is 0 for up and 1 for down.  The parity string runs over all
    sites left of ``site``; the on-site up-before-down sign lives in ``a_dn``.
    """
    site = check_index(site, l, "site")
    if spin not in (UP, DN):
        raise ContractError("spin must be 0 (up) or 1 (down)")
    a = ops.annihilator(spin)
    factors = {j: ops.parity for j in range(site)}
    factors[site] = a.T if dagger else a
    mats = [sp.csr_matrix(factors.get(j, ops.identity)) for j in range(l)]
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def _occupations(l: int) -> tuple[np.ndarray, np.ndarray]:
    """Up and down occupation of every basis state, shape (4^l,)."""
    idx = np.arange(4**l)
    n_up = np.zeros(4**l, dtype=int)
    n_dn = np.zeros(4**l, dtype=int)
    for j in range(l):
        digit = (idx // 4 ** (l - 1 - j)) % 4
        n_up += digit >> 1
        n_dn += digit & 1
    return n_up, n_dn


@dataclass
class SpinChainHamiltonian:
    """JW image of ``H_AS`` (plus optional ``mu (N - n_target)^2``).

    ``terms`` lists every one-body generator ``E_pq`` as
    ``((p, q), [per-site factor dicts for up and down])``; the Hamiltonian is
    ``offset + sum k_pq E_pq + 1/2 sum (pq|rs) E_pq E_rs`` plus the diagonal
    penalty.
    """

    l: int
    h_eff: np.ndarray
    eri: np.ndarray
    offset: float
    penalty: Optional[tuple[float, int]] = None
    terms: list = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return 4**self.l

    @cached_property
    def k(self) -> np.ndarray:
        return self.h_eff - 0.5 * np.einsum("prrq->pq", self.eri)

    @cached_property
    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        return _occupations(self.l)

    def _penalty_diag(self) -> np.ndarray:
        if self.penalty is None:
            return np.zeros(self.dim)
        mu, n_target = self.penalty
        n_up, n_dn = self.occupations
        return mu * (n_up + n_dn - n_target) ** 2.0

    def _e_apply(self, p: int, q: int, vec: np.ndarray) -> np.ndarray:
        out = np.zeros_like(vec)
        for factors in self.terms[p * self.l + q][1]:
            out += _apply_factors(factors, vec, self.l)
        return out

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        l = self.l
        if l <= _MATERIALIZE_MAX_SITES:
            return self.sparse @ vec
        u = np.stack([self._e_apply(r, s, vec) for r in range(l) for s in range(l)])
        w = np.tensordot(self.eri.reshape(l * l, l * l), u, axes=1)
        out = (self.offset + self._penalty_diag()) * vec
        for p in range(l):
            for q in range(l):
                out += self._e_apply(p, q, self.k[p, q] * vec + 0.5 * w[p * l + q])
        return out

    @cached_property
    def sparse(self) -> sp.csr_matrix:
        """Materialized Hamiltonian (includes offset and penalty)."""
        l = self.l
        e = [
            sum(_kron_sparse(f, l) for f in self.terms[p * l + q][1])
            for p in range(l)
            for q in range(l)
        ]
        dim = self.dim
        h = sp.diags(self.offset + self._penalty_diag()).tocsr()
        eri2 = self.eri.reshape(l * l, l * l)
        for pq in range(l * l):
            p, q = divmod(pq, l)
            w = sp.csr_matrix((dim, dim))
            for rs in range(l * l):
                if eri2[pq, rs] != 0.0:
                    w = w + eri2[pq, rs] * e[rs]
            h = h + e[pq] @ (self.k[p, q] * sp.identity(dim, format="csr") + 0.5 * w)
        h = h.tocsr()
        h.eliminate_zeros()
        return h

    def number_expectation(self, vec: np.ndarray) -> tuple[float, float]:
        """``(<N>, <S_z>)`` of a normalized state."""
        n_up, n_dn = self.occupations
        prob = vec * vec / np.dot(vec, vec)
        return float(prob @ (n_up + n_dn)), float(0.5 * prob @ (n_up - n_dn))


def build_jw_hamiltonian(
    ash: ActiveSpaceHamiltonian, penalty: Optional[tuple[float, int]] = None
) -> SpinChainHamiltonian:
    """Spin-chain Hamiltonian of an active space with ``L <= 10`` orbitals.

    ``penalty=(mu, n_target)`` adds ``mu (N - n_target)^2``.
    """
    l = ash.n_orb
    if l > JW_MAX_SITES:
        raise ContractError(
            f"{l} orbitals give a 4^{l} Jordan-Wigner space; the limit is {JW_MAX_SITES}. "
            "Use the DMRG solver for larger chains."
        )
    terms = []
    for p in range(l):
        for q in range(l):
            per_spin = [
                _multiply_factors(_fermion_factors(p, s, True), _fermion_factors(q, s, False))
                for s in (UP, DN)
            ]
            terms.append(((p, q), per_spin))
    return SpinChainHamiltonian(
        l=l,
        h_eff=np.asarray(ash.h_eff, dtype=float),
        eri=np.asarray(ash.eri, dtype=float),
        offset=float(ash.e_core),
        penalty=None if penalty is None else (float(penalty[0]), int(penalty[1])),
        terms=terms,
    )


@dataclass(frozen=True)
class JwciResult:
    energies: np.ndarray
    states: np.ndarray
    n_expectation: np.ndarray
    sz_expectation: np.ndarray
    converged: bool = True


def solve_jwci(
    h: SpinChainHamiltonian,
    n_roots: int = 1,
    n_electrons: Optional[int] = None,
    s_z: Optional[float] = None,
    tol: float = 1e-9,
    max_iter: int = 1000,
) -> JwciResult:
    """Lowest eigenpairs of the spin-chain Hamiltonian.

    With ``n_electrons`` (and optionally ``s_z``) the solve is restricted to
    the basis states of that sector, which ``H`` leaves invariant.  Returned
    states always live in the full ``4^L`` space.
    """
    n_up, n_dn = h.occupations
    mask = np.ones(h.dim, dtype=bool)
    if n_electrons is not None:
        mask &= (n_up + n_dn) == n_electrons
    if s_z is not None:
        mask &= np.isclose(0.5 * (n_up - n_dn), s_z)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ContractError("requested sector is empty")
    k = min(n_roots, idx.size)

    if h.l <= _MATERIALIZE_MAX_SITES:
        hs = h.sparse[idx][:, idx]
        if idx.size <= 1024:
            pairs = dense_sym_eig(hs.toarray())
            values, vecs, converged = pairs.values[:k], pairs.vectors[:, :k], True
        else:
            pairs = lowest_eigs(lambda x: hs @ x, idx.size, k=k, tol=tol, max_iter=max_iter,
                                diag=hs.diagonal())
            values, vecs, converged = pairs.values, pairs.vectors, pairs.converged
    else:
        def apply(x):
            full = np.zeros(h.dim)
            full[idx] = x
            return h.matvec(full)[idx]

        pairs = lowest_eigs(apply, idx.size, k=k, tol=tol, max_iter=max_iter)
        values, vecs, converged = pairs.values, pairs.vectors, pairs.converged
    if not converged:
        raise ConvergenceError("JW eigensolver did not converge", best=pairs)

    states = np.zeros((h.dim, k))
    states[idx] = vecs
    nexp, szexp = zip(*(h.number_expectation(s) for s in states.T))
    return JwciResult(values, states, np.array(nexp), np.array(szexp), converged)


def det_to_jw(det, n_orb: int) -> tuple[int, int]:
    """JW basis index and sign of a determinant ``(alpha_bits, beta_bits)``.

    ``Phi_det = sign * |index>``: the sign is the parity of reordering the
    all-alpha-then-all-beta creation string into site-interleaved order.
    """
    a, b = int(det[0]), int(det[1])
    index = 0
    for j in range(n_orb):
        digit = 2 * ((a >> j) & 1) + ((b >> j) & 1)
        index = index * 4 + digit
    # each beta electron at orbital j passes alpha electrons on orbitals > j
    swaps = 0
    for j in range(n_orb):
        if (b >> j) & 1:
            swaps += (a >> (j + 1)).bit_count()
    return index, (-1) ** swaps


class JWCI(BaseEstimator):
    """CASCI through the Jordan-Wigner spin-chain Hamiltonian.

    By default the solve is restricted to the ``N = n_active_elec`` sector;
    with ``mu`` set, the full space is solved with a number penalty instead.
    """

    def __init__(self, n_active_orb=6, n_active_elec=4, n_roots=1, mu=None, n_electrons=None):
        self.n_active_orb = n_active_orb
        self.n_active_elec = n_active_elec
        self.n_roots = n_roots
        self.mu = mu
        self.n_electrons = n_electrons

    def fit(self, integrals, scf=None):
        from .scf import RHF, ScfResult

        if scf is None:
            n_e = self.n_electrons if self.n_electrons is not None else self.n_active_elec
            scf = RHF(n_electrons=n_e).fit(integrals).result_
        elif not isinstance(scf, ScfResult):
            scf = scf.result_
        ash = build_active_hamiltonian(scf, integrals, self.n_active_orb, self.n_active_elec)
        if self.mu is None:
            ham = build_jw_hamiltonian(ash)
            res = solve_jwci(ham, self.n_roots, n_electrons=ash.n_elec)
        else:
            ham = build_jw_hamiltonian(ash, penalty=(self.mu, ash.n_elec))
            res = solve_jwci(ham, self.n_roots)
        self.active_hamiltonian_ = ash
        self.hamiltonian_ = ham
        self.result_ = res
        self.energies_ = res.energies
        self.e_tot_ = float(res.energies[0])
        return self

    def predict(self, integrals=None, scf=None):
        if integrals is not None:
            return self.fit(integrals, scf).e_tot_
        check_is_fitted(self, "e_tot_")
        return self.e_tot_
