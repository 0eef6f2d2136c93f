"""Two-site block DMRG with DVR grid points as sites.

The chain Hamiltonian is

    H = sum_i e_i n_i + u_i n_iu n_id + sum_{i<j} t_ij (E_ij + E_ji)
        + sum_{i<j} g_ij n_i n_j + const

with ``E_ij = sum_s c+_is c_js``.  An electron-number penalty
``mu (N - n_target)^2`` is folded into the on-site, density and constant
coefficients.

Fermion signs follow a Jordan-Wigner order by site index (up before down on
a site).  Each block stores its creation operators in its own local JW
convention (strings start at the block's leftmost site) together with the
block parity, so operators of a right-hand block pick up the left block's
parity when embedded in the superblock.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ContractError, check_positive_int
from .jwci import jw_site_ops
from .model import IntegralSet
from .numerics import ConvergenceError, lowest_eigs

__all__ = [
    "ChainHamiltonianTerms",
    "DmrgBlock",
    "DmrgResult",
    "chain_terms",
    "empty_block",
    "enlarge_block",
    "superblock_ground",
    "truncate",
    "dmrg_run",
    "DMRG",
]

logger = logging.getLogger(__name__)

_SITE = jw_site_ops()
_CDAG = (_SITE.a_up.T.copy(), _SITE.a_dn.T.copy())
_DOUBLE = _SITE.n_up @ _SITE.n_dn
_I4 = np.eye(4)


@dataclass(frozen=True)
class ChainHamiltonianTerms:
    """Coefficients of the chain Hamiltonian; ``hop`` and ``dens`` strictly upper."""

    onsite_e: np.ndarray
    hubbard_u: np.ndarray
    hop: np.ndarray
    dens: np.ndarray
    constant: float
    penalty: Optional[tuple[float, int]] = None

    @property
    def n_sites(self) -> int:
        return len(self.onsite_e)

    def site_hamiltonian(self, i: int) -> np.ndarray:
        return self.onsite_e[i] * _SITE.n + self.hubbard_u[i] * _DOUBLE

    def coupling(self, i: int, j: int) -> tuple[float, float]:
        a, b = (i, j) if i < j else (j, i)
        return self.hop[a, b], self.dens[a, b]

    def reversed(self) -> "ChainHamiltonianTerms":
        """Same Hamiltonian on the mirrored site order."""
        hop = self.hop + self.hop.T
        dens = self.dens + self.dens.T
        return ChainHamiltonianTerms(
            self.onsite_e[::-1].copy(),
            self.hubbard_u[::-1].copy(),
            np.triu(hop[::-1, ::-1], 1),
            np.triu(dens[::-1, ::-1], 1),
            self.constant,
            self.penalty,
        )


def chain_terms(ints: IntegralSet, penalty: Optional[tuple[float, int]] = None) -> ChainHamiltonianTerms:
    """Chain coefficients from DVR integrals, optionally with ``(mu, n_target)``.

    The on-site repulsion is ``g_ii n_up n_dn``.  Folding ``mu (N - N0)^2``
    uses ``n_i^2 = n_i + 2 n_iu n_id``: on-site energies shift by
    ``mu - 2 mu N0``, on-site repulsion by ``2 mu``, densities by ``2 mu``
    and the constant by ``mu N0^2``.
    """
    onsite = np.diag(ints.t) + ints.v
    u = np.diag(ints.g).copy()
    hop = np.triu(ints.t, 1)
    dens = np.triu(ints.g, 1)
    const = ints.e_nn
    if penalty is not None:
        mu, n0 = float(penalty[0]), int(penalty[1])
        onsite = onsite + mu - 2.0 * mu * n0
        u = u + 2.0 * mu
        dens = dens + 2.0 * mu * np.triu(np.ones_like(dens), 1)
        const = const + mu * n0 * n0
        penalty = (mu, n0)
    return ChainHamiltonianTerms(onsite, u, hop, dens, float(const), penalty)


@dataclass
class DmrgBlock:
    """Renormalized block of consecutive sites.

    ``cdag[i]`` holds ``(c+_{i,up}, c+_{i,dn})`` and ``num[i]`` holds ``n_i``
    for every absorbed site ``i``, all in the block basis.  ``u`` is the
    truncation matrix that produced this basis from the enlarged block.
    """

    side: str
    sites: tuple
    h: np.ndarray
    parity: np.ndarray
    cdag: dict = field(default_factory=dict)
    num: dict = field(default_factory=dict)
    u: Optional[np.ndarray] = None

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def basis_dim(self) -> int:
        return self.h.shape[0]

    def number_operator(self) -> np.ndarray:
        out = np.zeros_like(self.h)
        for n in self.num.values():
            out = out + n
        return out


def empty_block(side: str) -> DmrgBlock:
    if side not in ("left", "right"):
        raise ContractError("side must be 'left' or 'right'")
    return DmrgBlock(side, (), np.zeros((1, 1)), np.ones((1, 1)))


def enlarge_block(block: DmrgBlock, site: int, terms: ChainHamiltonianTerms) -> DmrgBlock:
    """Absorb ``site`` at the inner edge of ``block``.

    A left block gains the site on its right (basis ``|b> (x) |s>``); a
    right block gains it on its left (basis ``|s> (x) |b>``).
    """
    m = block.basis_dim
    im = np.eye(m)
    hs = terms.site_hamiltonian(site)
    if block.side == "left":
        if block.sites and site != block.sites[-1] + 1:
            raise ContractError(f"site {site} is not adjacent to left block {block.sites}")
        if not block.sites and site != 0:
            raise ContractError("a left block starts at site 0")
        h = np.kron(block.h, _I4) + np.kron(im, hs)
        for s in (0, 1):
            hop_op = sum(
                (terms.coupling(i, site)[0] * block.cdag[i][s] for i in block.sites), np.zeros((m, m))
            )
            term = np.kron(hop_op @ block.parity, _CDAG[s].T)
            h += term + term.T
        dens_op = sum((terms.coupling(i, site)[1] * block.num[i] for i in block.sites), np.zeros((m, m)))
        h += np.kron(dens_op, _SITE.n)
        cdag = {i: tuple(np.kron(c, _I4) for c in ops) for i, ops in block.cdag.items()}
        num = {i: np.kron(n, _I4) for i, n in block.num.items()}
        cdag[site] = tuple(np.kron(block.parity, c) for c in _CDAG)
        num[site] = np.kron(im, _SITE.n)
        parity = np.kron(block.parity, _SITE.parity)
        sites = block.sites + (site,)
    else:
        if block.sites and site != block.sites[0] - 1:
            raise ContractError(f"site {site} is not adjacent to right block {block.sites}")
        if not block.sites and site != terms.n_sites - 1:
            raise ContractError("a right block starts at the last site")
        h = np.kron(hs, im) + np.kron(_I4, block.h)
        for s in (0, 1):
            hop_op = sum(
                (terms.coupling(site, j)[0] * block.cdag[j][s].T for j in block.sites), np.zeros((m, m))
            )
            term = np.kron(_CDAG[s] @ _SITE.parity, hop_op)
            h += term + term.T
        dens_op = sum((terms.coupling(site, j)[1] * block.num[j] for j in block.sites), np.zeros((m, m)))
        h += np.kron(_SITE.n, dens_op)
        cdag = {j: tuple(np.kron(_SITE.parity, c) for c in ops) for j, ops in block.cdag.items()}
        num = {j: np.kron(_I4, n) for j, n in block.num.items()}
        cdag[site] = tuple(np.kron(c, im) for c in _CDAG)
        num[site] = np.kron(_SITE.n, im)
        parity = np.kron(_SITE.parity, block.parity)
        sites = (site,) + block.sites
    return DmrgBlock(block.side, sites, 0.5 * (h + h.T), parity, cdag, num)


class _Superblock:
    """Matrix-free ``H`` on ``sys (x) env`` with vectors as ``(m_sys, m_env)`` matrices."""

    def __init__(self, sys: DmrgBlock, env: DmrgBlock, terms: ChainHamiltonianTerms):
        self.sys, self.env, self.terms = sys, env, terms
        self.shape = (sys.basis_dim, env.basis_dim)
        me = env.basis_dim
        lefts, rights = [], []
        for i in sys.sites:
            t_row = np.array([terms.coupling(i, j)[0] for j in env.sites])
            g_row = np.array([terms.coupling(i, j)[1] for j in env.sites])
            for s in (0, 1):
                if np.any(t_row):
                    a = sys.cdag[i][s] @ sys.parity
                    b = sum((t * env.cdag[j][s].T for t, j in zip(t_row, env.sites)), np.zeros((me, me)))
                    lefts += [a, a.T]
                    rights += [b, b.T]
            if np.any(g_row):
                lefts.append(sys.num[i])
                rights.append(sum((g * env.num[j] for g, j in zip(g_row, env.sites)), np.zeros((me, me))))
        self.lefts = np.array(lefts) if lefts else np.zeros((0,) + (sys.basis_dim,) * 2)
        self.rights_t = np.array([r.T for r in rights]) if rights else np.zeros((0, me, me))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        psi = x.reshape(self.shape)
        out = self.sys.h @ psi + psi @ self.env.h.T
        if len(self.lefts):
            out += np.matmul(np.matmul(self.lefts, psi), self.rights_t).sum(axis=0)
        return out.ravel() + self.terms.constant * x

    def diagonal(self) -> np.ndarray:
        d = np.diag(self.sys.h)[:, None] + np.diag(self.env.h)[None, :]
        if len(self.lefts):
            d = d + np.einsum("kaa,kbb->ab", self.lefts, self.rights_t)
        return d.ravel() + self.terms.constant

    def number(self, psi: np.ndarray) -> np.ndarray:
        """``N psi`` for a ``(m_sys, m_env)`` wavefunction matrix."""
        return self.sys.number_operator() @ psi + psi @ self.env.number_operator().T


def superblock_ground(
    sys: DmrgBlock,
    env: DmrgBlock,
    terms: ChainHamiltonianTerms,
    tol: float = 1e-9,
    max_iter: int = 400,
    guess: Optional[np.ndarray] = None,
):
    """Ground energy (``terms.constant`` included) and ``(m_sys, m_env)`` wavefunction."""
    if sys.n_sites + env.n_sites > terms.n_sites:
        raise ContractError("blocks cover more sites than the chain has")
    sb = _Superblock(sys, env, terms)
    dim = sb.shape[0] * sb.shape[1]
    if dim <= 64:
        full = np.column_stack([sb.matvec(e) for e in np.eye(dim)])
        w, v = scipy.linalg.eigh(0.5 * (full + full.T))
        e0, psi = w[0], v[:, 0]
    else:
        pairs = lowest_eigs(
            sb.matvec,
            dim,
            k=1,
            tol=tol,
            max_iter=max_iter,
            diag=sb.diagonal(),
            v0=None if guess is None else guess.ravel(),
        )
        if not pairs.converged:
            raise ConvergenceError(
                f"superblock eigensolver stalled at residual {pairs.residuals[0]:.2e} "
                f"(sys sites {sys.sites[0]}..{sys.sites[-1]}, dim {dim})",
                best=pairs,
            )
        e0, psi = pairs.values[0], pairs.vectors[:, 0]
    psi = psi / np.linalg.norm(psi)
    return float(e0), psi.reshape(sb.shape)


def truncate(block: DmrgBlock, psi: np.ndarray, d_max: int) -> tuple[DmrgBlock, float]:
    """Keep the ``d_max`` dominant reduced-density-matrix eigenvectors of ``block``.

    ``psi`` is the ``(m_sys, m_env)`` superblock wavefunction; a left block
    is the row space, a right block the column space.
    """
    rho = psi @ psi.T if block.side == "left" else psi.T @ psi
    if rho.shape[0] != block.basis_dim:
        raise ContractError("wavefunction does not match the block dimension")
    rho = 0.5 * (rho + rho.T)
    # diagonalize within parity sectors so kept states stay parity eigenstates
    pw, pv = scipy.linalg.eigh(block.parity)
    ws, vs = [], []
    for sign in (-1.0, 1.0):
        sub = pv[:, np.abs(pw - sign) < 0.5]
        if sub.shape[1]:
            w_s, v_s = scipy.linalg.eigh(sub.T @ rho @ sub)
            ws.append(w_s)
            vs.append(sub @ v_s)
    w, v = np.concatenate(ws), np.hstack(vs)
    order = np.argsort(-w, kind="stable")
    keep = order[: min(d_max, len(w))]
    u = v[:, keep]
    err = float(np.clip(1.0 - np.sum(w[keep]) / max(np.sum(w), 1e-300), 0.0, 1.0))

    def rot(op):
        return u.T @ op @ u

    new = DmrgBlock(
        block.side,
        block.sites,
        rot(block.h),
        rot(block.parity),
        {i: tuple(rot(c) for c in ops) for i, ops in block.cdag.items()},
        {i: rot(n) for i, n in block.num.items()},
        u,
    )
    return new, err


@dataclass(frozen=True)
class DmrgResult:
    energy: float
    sweep_energies: np.ndarray
    truncation_errors: np.ndarray
    n_expectation: float
    n_variance: float
    d_used: int
    warmup_energies: np.ndarray
    n_flagged: bool = False


def _guess_right(psi, new_left: DmrgBlock, old_right: DmrgBlock):
    """Carry ``psi`` from position k to k+1.

    ``new_left`` is left[k+1] (just truncated) and ``old_right`` the block
    the environment index of ``psi`` lives in.
    """
    if new_left.u is None or old_right.u is None:
        return None
    mr = old_right.basis_dim
    if psi.shape != (new_left.u.shape[0], 4 * mr):
        return None
    x = new_left.u.T @ psi  # rows a', cols (s, b)
    x = x.reshape(-1, mr) @ old_right.u.T  # rows (a', s), cols (s', c)
    return x


def _guess_left(psi, new_right: DmrgBlock, old_left: DmrgBlock):
    """Carry ``psi`` from position k to k-1 (mirror of :func:`_guess_right`)."""
    if new_right.u is None or old_left.u is None:
        return None
    ml = old_left.basis_dim
    if psi.shape != (4 * ml, new_right.u.shape[0]):
        return None
    y = psi @ new_right.u  # rows (a, s), cols b'
    y = y.reshape(ml, -1)  # rows a, cols (s, b')
    return old_left.u @ y


def dmrg_run(
    terms: ChainHamiltonianTerms,
    d_schedule: Sequence[int] = (12,),
    n_sweeps: int = 4,
    lanczos_tol: float = 1e-9,
    e_conv: float = 1e-9,
    n_tol: float = 0.01,
) -> DmrgResult:
    """Infinite-system warmup followed by finite-system sweeps.

    ``d_schedule[k]`` is the bond dimension of sweep ``k`` (the last entry is
    reused); the warmup uses ``d_schedule[0]``.  Each sweep is a left-moving
    and a right-moving pass; iteration stops after ``n_sweeps`` or when the
    lowest energies of two successive sweeps differ by less than ``e_conv``.
    """
    l = terms.n_sites
    if l < 4 or l % 2:
        raise ContractError(f"chain length must be even and >= 4, got {l}")
    d_schedule = [check_positive_int(d, "bond dimension") for d in d_schedule]
    if not d_schedule or any(b < a for a, b in zip(d_schedule, d_schedule[1:])):
        raise ContractError("d_schedule must be a non-empty non-decreasing sequence")

    left = {0: empty_block("left")}
    right = {0: empty_block("right")}
    trunc_errors: list[float] = []
    warm = []
    best = {"e": np.inf}

    def record(e, psi, sys_enl, env_enl):
        if e < best["e"]:
            sb = _Superblock(sys_enl, env_enl, terms)
            n_psi = sb.number(psi)
            n_mean = float(np.sum(psi * n_psi))
            n_sq = float(np.sum(n_psi * n_psi))
            best.update(e=e, n=n_mean, var=max(n_sq - n_mean**2, 0.0))

    d = d_schedule[0]
    for k in range(l // 2):
        sys_enl = enlarge_block(left[k], k, terms)
        env_enl = enlarge_block(right[k], l - 1 - k, terms)
        e, psi = superblock_ground(sys_enl, env_enl, terms, tol=lanczos_tol)
        warm.append(e)
        left[k + 1], err_l = truncate(sys_enl, psi, d)
        right[k + 1], err_r = truncate(env_enl, psi, d)
        trunc_errors += [err_l, err_r]
        logger.debug("warmup %2d sites  E = %.10f", 2 * (k + 1), e)
    record(e, psi, sys_enl, env_enl)

    # position k: sys = left[k] + site k, env = site k+1 + right[l-k-2];
    # both enlarged blocks are re-truncated at every position
    sweep_energies = []
    pos, prev_psi = l // 2 - 1, psi
    for sweep in range(n_sweeps):
        d = d_schedule[min(sweep, len(d_schedule) - 1)]
        sweep_min = np.inf
        for path in (range(pos - 1, 0, -1), range(2, l - 2)):
            for k in path:
                if k == pos + 1:
                    guess = _guess_right(prev_psi, left[k], right[l - k - 1])
                elif k == pos - 1:
                    guess = _guess_left(prev_psi, right[l - k - 2], left[k + 1])
                else:
                    guess = None
                sys_enl = enlarge_block(left[k], k, terms)
                env_enl = enlarge_block(right[l - k - 2], k + 1, terms)
                if guess is not None and guess.shape != (sys_enl.basis_dim, env_enl.basis_dim):
                    guess = None
                e, psi = superblock_ground(sys_enl, env_enl, terms, tol=lanczos_tol, guess=guess)
                record(e, psi, sys_enl, env_enl)
                sweep_min = min(sweep_min, e)
                left[k + 1], err_l = truncate(sys_enl, psi, d)
                right[l - k - 1], err_r = truncate(env_enl, psi, d)
                trunc_errors += [err_l, err_r]
                pos, prev_psi = k, psi
        if not np.isfinite(sweep_min):
            # L = 4: the warmup midpoint is the only bipartition
            break
        sweep_energies.append(sweep_min)
        logger.info("sweep %d (D=%d)  E = %.10f", sweep + 1, d, sweep_min)
        if sweep > 0 and abs(sweep_energies[-2] - sweep_energies[-1]) < e_conv:
            break

    target = terms.penalty[1] if terms.penalty is not None else None
    flagged = target is not None and abs(best["n"] - target) > n_tol
    if flagged:
        logger.warning("<N> = %.4f is off target %d; the penalty may be too weak", best["n"], target)
    return DmrgResult(
        energy=float(best["e"]),
        sweep_energies=np.array(sweep_energies),
        truncation_errors=np.array(trunc_errors),
        n_expectation=best["n"],
        n_variance=best["var"],
        d_used=d_schedule[-1],
        warmup_energies=np.array(warm),
        n_flagged=flagged,
    )


class DMRG(BaseEstimator):
    """DMRG on the DVR chain; ``fit(integrals)`` needs no Hartree-Fock step."""

    def __init__(self, n_electrons=4, bond_dim=12, d_schedule=None, n_sweeps=4, mu=1.0,
                 lanczos_tol=1e-9):
        self.n_electrons = n_electrons
        self.bond_dim = bond_dim
        self.d_schedule = d_schedule
        self.n_sweeps = n_sweeps
        self.mu = mu
        self.lanczos_tol = lanczos_tol

    def fit(self, integrals: IntegralSet):
        penalty = None if not self.mu else (self.mu, self.n_electrons)
        terms = chain_terms(integrals, penalty)
        schedule = self.d_schedule if self.d_schedule is not None else (self.bond_dim,)
        res = dmrg_run(terms, schedule, self.n_sweeps, self.lanczos_tol)
        self.terms_ = terms
        self.result_ = res
        self.e_tot_ = res.energy
        return self

    def predict(self, integrals: IntegralSet = None) -> float:
        if integrals is not None:
            return self.fit(integrals).e_tot_
        check_is_fitted(self, "e_tot_")
        return self.e_tot_
