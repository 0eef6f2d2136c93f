"""
Sine and sinc discrete variable representations in one dimension.

All lengths are in bohr and energies in hartree (unit mass, hbar = 1).
Indices are 0-based: ``basis.grid[i]`` is the point of function ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from ._validation import ContractError, check_index, check_positive_int

__all__ = [
    "DvrBasis",
    "build_sine_dvr",
    "build_sinc_dvr",
    "kinetic_matrix",
    "basis_value",
    "coefficients_from_samples",
    "interpolate",
    "sine_fbr_transform",
    "position_operator_dvr",
]


@dataclass(frozen=True)
class DvrBasis:
    """A uniform one-dimensional DVR.

    Attributes
    ----------
    kind : {'sine', 'sinc'}
    grid : ndarray
        Grid points x_i in bohr, strictly increasing and uniform.
    spacing : float
        Grid spacing in bohr.
    domain : tuple or None
        Open interval (a, b) of a sine DVR; None for sinc.
    weights : ndarray
        Quadrature weights, all equal to ``spacing``.
    """

    kind: str
    grid: np.ndarray
    spacing: float
    domain: Optional[Tuple[float, float]]
    weights: np.ndarray

    def __post_init__(self):
        self.grid.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.grid)

    def translated(self, shift: float) -> "DvrBasis":
        """Same basis rigidly shifted by ``shift`` bohr."""
        domain = None if self.domain is None else (self.domain[0] + shift, self.domain[1] + shift)
        return DvrBasis(self.kind, self.grid + shift, self.spacing, domain, self.weights.copy())


def build_sine_dvr(a: float, b: float, n: int) -> DvrBasis:
    """Particle-in-a-box DVR with ``n`` interior points on ``(a, b)``.

    The end points carry the hard-wall boundary condition and are excluded:
    ``x_j = a + j * dx`` for ``j = 1..n`` with ``dx = (b - a) / (n + 1)``.
    """
    n = check_positive_int(n, "n")
    if not b > a:
        raise ContractError(f"invalid domain: need b > a, got ({a}, {b})")
    dx = (b - a) / (n + 1)
    grid = a + dx * np.arange(1, n + 1)
    return DvrBasis("sine", grid, dx, (float(a), float(b)), np.full(n, dx))


def build_sinc_dvr(x0: float, dx: float, n: int) -> DvrBasis:
    """Sinc DVR on ``x_i = x0 + i * dx``, ``i = 0..n-1``."""
    n = check_positive_int(n, "n")
    if not dx > 0:
        raise ContractError(f"invalid spacing dx={dx}")
    grid = x0 + dx * np.arange(n)
    return DvrBasis("sinc", grid, float(dx), None, np.full(n, float(dx)))


def _sine_kinetic(n: int, length: float) -> np.ndarray:
    # Colbert-Miller closed form for the (a, b) box with n + 1 intervals
    m = n + 1
    i = np.arange(1, n + 1)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    pref = np.pi**2 / (4.0 * length**2)
    t = np.empty((n, n))
    off = ii != jj
    d = ii[off] - jj[off]
    s = ii[off] + jj[off]
    t[off] = pref * (-1.0) ** d * (
        1.0 / np.sin(np.pi * d / (2 * m)) ** 2 - 1.0 / np.sin(np.pi * s / (2 * m)) ** 2
    )
    t[np.diag_indices(n)] = pref * ((2.0 * m**2 + 1.0) / 3.0 - 1.0 / np.sin(np.pi * i / m) ** 2)
    return 0.5 * (t + t.T)


def _sinc_kinetic(n: int, dx: float) -> np.ndarray:
    i = np.arange(n)
    d = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        t = (-1.0) ** np.abs(d) / (d.astype(float) ** 2 * dx**2)
    t[np.diag_indices(n)] = np.pi**2 / (6.0 * dx**2)
    return t


def kinetic_matrix(basis: DvrBasis) -> np.ndarray:
    """Exact matrix of ``-1/2 d^2/dx^2`` in the DVR (hartree)."""
    if basis.kind == "sine":
        a, b = basis.domain
        return _sine_kinetic(basis.n, b - a)
    if basis.kind == "sinc":
        return _sinc_kinetic(basis.n, basis.spacing)
    raise ContractError(f"unknown DVR kind {basis.kind!r}")


def sine_fbr_transform(n: int) -> np.ndarray:
    """Orthogonal DVR <-> box-eigenstate transform.

    ``U[j, k] = sqrt(2/(n+1)) sin((j+1)(k+1) pi/(n+1))``; column ``k`` holds the
    DVR coefficients of the ``k``-th box eigenfunction.
    """
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, j) * np.pi / (n + 1))


def _sine_values(basis: DvrBasis, idx, x) -> np.ndarray:
    a, b = basis.domain
    length = b - a
    n = basis.n
    u = sine_fbr_transform(n)[idx]
    k = np.arange(1, n + 1)
    x = np.asarray(x, dtype=float)
    modes = np.sqrt(2.0 / length) * np.sin(np.multiply.outer(x - a, k) * np.pi / length)
    vals = modes @ u.T
    inside = (x > a) & (x < b)
    return np.where(inside[..., None] if vals.ndim > x.ndim else inside, vals, 0.0)


def basis_value(basis: DvrBasis, i: int, x):
    """Value of DVR function ``i`` at ``x`` (scalar or array)."""
    i = check_index(i, basis.n, "basis index")
    x_arr = np.asarray(x, dtype=float)
    if basis.kind == "sinc":
        out = np.sinc((x_arr - basis.grid[i]) / basis.spacing) / np.sqrt(basis.spacing)
    elif basis.kind == "sine":
        out = _sine_values(basis, i, x_arr)
    else:
        raise ContractError(f"unknown DVR kind {basis.kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def coefficients_from_samples(basis: DvrBasis, samples) -> np.ndarray:
    """Expansion coefficients ``c_j = sqrt(w_j) psi(x_j)`` from grid samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != basis.n:
        raise ContractError(f"expected {basis.n} samples, got {samples.shape[0]}")
    w = np.sqrt(basis.weights)
    return samples * (w if samples.ndim == 1 else w[:, None])


def interpolate(basis: DvrBasis, coeffs, x) -> np.ndarray:
    """Evaluate ``sum_j c_j phi_j(x)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    if basis.kind == "sinc":
        phi = np.sinc((x[..., None] - basis.grid) / basis.spacing) / np.sqrt(basis.spacing)
    else:
        phi = _sine_values(basis, np.arange(basis.n), x)
    return phi @ coeffs


def position_operator_dvr(xmat) -> tuple[np.ndarray, np.ndarray]:
    """Build a DVR by diagonalizing a position-like matrix in a finite basis.

    Parameters
    ----------
    xmat : (n, n) array
        Matrix of the coordinate (or a monotone function of it) in an
        orthonormal spectral basis.

    Returns
    -------
    points : ndarray
        Ascending eigenvalues.
    transform : ndarray
        Columns are the DVR functions in the spectral basis, with signs fixed
        so that each column sum is positive.
    """
    w, v = scipy.linalg.eigh(np.asarray(xmat, dtype=float))
    signs = np.sign(v.sum(axis=0))
    signs[signs == 0] = 1.0
    return w, v * signs
