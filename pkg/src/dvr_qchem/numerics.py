"""Symmetric eigensolvers shared by the SCF, CI and DMRG drivers.

Two entry points:

* :func:`dense_sym_eig` -- full spectrum of a small dense symmetric matrix.
* :func:`lowest_eigs` -- a few lowest eigenpairs of a matrix-free symmetric
  operator, by a Davidson iteration with full re-orthogonalization.  Without a
  diagonal the correction vectors are plain residuals and the method reduces
  to a block Lanczos (Krylov) iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from ._validation import ContractError, check_symmetric

__all__ = [
    "EigenPairs",
    "ConvergenceError",
    "dense_sym_eig",
    "lowest_eigs",
]


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues in ascending order with column-paired eigenvectors.

    ``converged`` is False when an iterative solve stopped at ``max_iter``;
    the arrays then hold the best iterate and ``residuals`` tells how far off
    it is.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True
    n_iter: int = 0

    def __len__(self) -> int:
        return len(self.values)


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance.

    The best available iterate is kept on ``best`` so callers can still
    inspect or report it.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


def dense_sym_eig(a) -> EigenPairs:
    """Full eigendecomposition of a real symmetric matrix.

    Raises :class:`ContractError` for non-square or asymmetric input
    (relative tolerance 1e-12).
    """
    a = check_symmetric(a, rtol=1e-12, name="A")
    w, v = scipy.linalg.eigh(a)
    return EigenPairs(values=w, vectors=v, residuals=np.zeros(len(w)))


def _orthonormalize_against(basis: np.ndarray, new: np.ndarray, drop_tol: float) -> np.ndarray:
    """Two-pass classical Gram-Schmidt of ``new`` columns against ``basis``.

    Columns that lose more than ``1 - drop_tol`` of their norm are discarded.
    """
    kept = []
    for col in new.T:
        nrm0 = np.linalg.norm(col)
        if nrm0 == 0.0:
            continue
        col = col / nrm0
        for _ in range(2):
            if basis.shape[1]:
                col = col - basis @ (basis.T @ col)
            for q in kept:
                col = col - q * (q @ col)
        nrm = np.linalg.norm(col)
        if nrm > drop_tol:
            kept.append(col / nrm)
    if not kept:
        return np.zeros((basis.shape[0], 0))
    return np.column_stack(kept)


def _start_vectors(dim: int, k: int, diag, v0, seed: int) -> np.ndarray:
    cols = []
    if v0 is not None:
        v0 = np.asarray(v0, dtype=float)
        cols.extend(v0.reshape(dim, -1).T)
    rng = np.random.default_rng(seed)
    if diag is not None:
        for idx in np.argsort(diag, kind="stable")[: max(k - len(cols), 0)]:
            # a bare unit vector can be an exact eigenvector of a symmetry
            # sector that does not hold the ground state; a small random
            # admixture keeps every sector reachable
            e = 1e-3 * rng.standard_normal(dim) / np.sqrt(dim)
            e[idx] += 1.0
            cols.append(e)
    # one random direction always joins the block so that symmetric start
    # vectors cannot hide part of the spectrum
    while len(cols) < k + 1:
        cols.append(rng.standard_normal(dim))
    return np.column_stack(cols)


def lowest_eigs(
    apply_h: Callable[[np.ndarray], np.ndarray],
    dim: int,
    k: int = 1,
    tol: float = 1e-10,
    max_iter: int = 500,
    diag: Optional[np.ndarray] = None,
    v0: Optional[np.ndarray] = None,
    max_subspace: Optional[int] = None,
    seed: int = 1234,
) -> EigenPairs:
    """Lowest ``k`` eigenpairs of a symmetric linear operator.

    Parameters
    ----------
    apply_h : callable
        ``v -> H v`` for a 1D vector of length ``dim``.
    dim : int
        Dimension of the vector space.
    k : int
        Number of lowest eigenpairs wanted.
    tol : float
        Convergence threshold on each residual norm ``||H v - lambda v||``.
    max_iter : int
        Maximum number of Davidson iterations (each adds up to ``k`` vectors).
    diag : array, optional
        Diagonal of ``H``; enables the ``(diag - theta)^-1`` preconditioner and
        seeds start vectors at the smallest diagonal entries.
    v0 : array, optional
        Initial guess (one vector or ``dim x m`` block), e.g. from a previous
        DMRG step.
    max_subspace : int, optional
        Subspace size that triggers a thick restart.
    seed : int
        Seed for the pseudo-random start vector.

    Returns
    -------
    EigenPairs
        ``converged`` is False if ``max_iter`` was exhausted; the arrays then
        hold the best Ritz pairs.
    """
    if dim < 1:
        raise ContractError("dim must be positive")
    if not 1 <= k <= dim:
        raise ContractError(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    if diag is not None:
        diag = np.asarray(diag, dtype=float)
        if diag.shape != (dim,):
            raise ContractError("diag must have length dim")
    if max_subspace is None:
        max_subspace = max(8 * k, 40)
    max_subspace = min(max(max_subspace, 2 * k + 2), dim)

    v = _orthonormalize_against(np.zeros((dim, 0)), _start_vectors(dim, k, diag, v0, seed), 1e-8)
    hv = np.column_stack([apply_h(col) for col in v.T])
    theta = np.zeros(k)
    x = v[:, :k]
    res_norms = np.full(k, np.inf)

    it = 0
    for it in range(1, max_iter + 1):
        sub = v.T @ hv
        sub = 0.5 * (sub + sub.T)
        w, s = scipy.linalg.eigh(sub)
        nk = min(k, len(w))
        theta = w[:nk]
        x = v @ s[:, :nk]
        hx = hv @ s[:, :nk]
        r = hx - x * theta
        res_norms = np.linalg.norm(r, axis=0)
        if nk == k and np.all(res_norms <= tol):
            return EigenPairs(theta, x, res_norms, True, it)
        if v.shape[1] == dim:
            # the subspace is the whole space: Ritz pairs are exact
            return EigenPairs(theta, x, res_norms, True, it)

        todo = [j for j in range(nk) if res_norms[j] > tol]
        corr = r[:, todo]
        if diag is not None:
            denom = diag[:, None] - theta[todo][None, :]
            small = np.abs(denom) < 1e-4
            denom[small] = np.copysign(1e-4, denom[small] + 0.0)
            corr = corr / denom

        if v.shape[1] + len(todo) > max_subspace:
            # thick restart on the current Ritz vectors
            keep = min(max(2 * k, k + 1), len(w))
            v = v @ s[:, :keep]
            hv = hv @ s[:, :keep]

        # a preconditioned correction that is almost inside the subspace
        # carries only rounding noise; fall back to the plain residual
        new = _orthonormalize_against(v, corr, 1e-4 if diag is not None else 1e-10)
        if new.shape[1] == 0 and diag is not None:
            new = _orthonormalize_against(v, r[:, todo], 1e-10)
        if new.shape[1] == 0:
            rng = np.random.default_rng(seed + it)
            new = _orthonormalize_against(v, rng.standard_normal((dim, 1)), 1e-10)
        if new.shape[1] == 0:
            break
        v = np.hstack([v, new])
        hv = np.hstack([hv, np.column_stack([apply_h(col) for col in new.T])])

    return EigenPairs(theta, x, res_norms, bool(np.all(res_norms <= tol)), it)
