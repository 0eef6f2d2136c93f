import numpy as np
import pytest
from _oracles import ANGSTROM, sinc_kinetic_momentum, sine_kinetic_spectral

from dvr_qchem import ContractError, build_sinc_dvr, build_sine_dvr, kinetic_matrix
from dvr_qchem.dvr import (
    basis_value,
    coefficients_from_samples,
    interpolate,
    position_operator_dvr,
    sine_fbr_transform,
)


def test_sine_grid_rule():
    b = build_sine_dvr(0, 4, 3)
    np.testing.assert_allclose(b.grid, [1, 2, 3])
    assert b.spacing == 1.0
    b = build_sine_dvr(-1, 1, 1)
    np.testing.assert_allclose(b.grid, [0.0])
    assert b.spacing == 1.0
    np.testing.assert_allclose(b.weights, b.spacing)


def test_sine_grid_converted_box():
    half = 15 * ANGSTROM
    b = build_sine_dvr(-half, half, 32)
    assert b.n == 32
    assert -half < b.grid[0] and b.grid[-1] < half
    assert np.max(np.abs(np.diff(b.grid) - b.spacing)) < 1e-12
    assert b.spacing == pytest.approx(2 * half / 33)


def test_sinc_grid_rule():
    np.testing.assert_allclose(build_sinc_dvr(0, 1, 3).grid, [0, 1, 2])
    np.testing.assert_allclose(build_sinc_dvr(-1, 0.5, 5).grid, [-1, -0.5, 0, 0.5, 1])


@pytest.mark.parametrize("args", [(1.0, 1.0, 3), (1.0, 0.0, 3), (0.0, 1.0, 0)])
def test_sine_invalid_domain(args):
    with pytest.raises(ContractError):
        build_sine_dvr(*args)


def test_sinc_invalid_spacing():
    with pytest.raises(ContractError):
        build_sinc_dvr(0.0, 0.0, 3)
    with pytest.raises(ContractError):
        build_sinc_dvr(0.0, -1.0, 3)


@pytest.mark.parametrize("n,a,b", [(5, 0.0, 1.0), (12, -3.0, 7.5), (33, -15.0, 15.0)])
def test_sine_kinetic_matches_spectral_sum(n, a, b):
    t = kinetic_matrix(build_sine_dvr(a, b, n))
    np.testing.assert_allclose(t, sine_kinetic_spectral(n, b - a), atol=1e-10 * np.max(np.abs(t)))
    np.testing.assert_array_equal(t, t.T)


def test_sine_box_spectrum():
    levels = np.linalg.eigvalsh(kinetic_matrix(build_sine_dvr(0, np.pi, 64)))[:5]
    exact = 0.5 * np.arange(1, 6) ** 2
    assert np.max(np.abs(levels - exact) / exact) <= 1e-6


def test_sine_box_levels_exact_for_every_n():
    for n in (2, 4, 8, 16):
        levels = np.linalg.eigvalsh(kinetic_matrix(build_sine_dvr(0, 2, n)))
        exact = (np.arange(1, n + 1) * np.pi / 2) ** 2 / 2
        np.testing.assert_allclose(levels, exact, rtol=1e-12)


def test_sine_harmonic_ground_level_converges():
    errs = []
    for n in (8, 16, 32):
        b = build_sine_dvr(-8, 8, n)
        errs.append(abs(np.linalg.eigvalsh(kinetic_matrix(b) + np.diag(b.grid**2 / 2))[0] - 0.5))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-10


@pytest.mark.parametrize("n,dx", [(7, 1.0), (10, 0.35), (16, 1.7)])
def test_sinc_kinetic_matches_momentum_quadrature(n, dx):
    t = kinetic_matrix(build_sinc_dvr(-1.0, dx, n))
    np.testing.assert_allclose(t, sinc_kinetic_momentum(n, dx), rtol=0, atol=1e-8)


def test_sinc_diagonal_by_real_space_quadrature():
    # 1/2 int phi'(x)^2 dx on a long dense grid; phi' ~ cos(pi x)/x, so |x| > X adds 1/(2X)
    x = np.linspace(-2000, 2000, 4_000_001)
    u = np.pi * x
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(np.abs(u) > 1e-8, (u * np.cos(u) - np.sin(u)) / (u * x), 0.0)
    val = 0.5 * np.trapezoid(d**2, x)
    tail = 1.0 / (2 * 2000)
    assert val + tail == pytest.approx(np.pi**2 / 6, abs=1e-4)
    assert kinetic_matrix(build_sinc_dvr(0, 1, 3))[0, 0] == pytest.approx(np.pi**2 / 6, rel=1e-14)


@pytest.mark.parametrize("basis", [build_sine_dvr(-2, 3, 7), build_sinc_dvr(-1, 0.4, 6)])
def test_kinetic_psd(basis):
    assert np.linalg.eigvalsh(kinetic_matrix(basis))[0] >= -1e-10


@pytest.mark.parametrize("basis", [build_sine_dvr(-2, 3, 7), build_sinc_dvr(-1, 0.4, 6)])
def test_interpolation_property(basis):
    vals = np.array([[basis_value(basis, i, xj) for xj in basis.grid] for i in range(basis.n)])
    np.testing.assert_allclose(vals * np.sqrt(basis.weights)[None, :], np.eye(basis.n), atol=1e-12)


def test_sinc_value_at_own_point():
    b = build_sinc_dvr(0.0, 0.5, 4)
    assert basis_value(b, 2, b.grid[2]) == pytest.approx(1 / np.sqrt(0.5))
    assert basis_value(b, 2, b.grid[1]) == pytest.approx(0.0, abs=1e-15)


def test_basis_value_index_check():
    with pytest.raises(ContractError):
        basis_value(build_sine_dvr(0, 1, 3), 3, 0.5)


def test_sine_overlap_quadrature():
    b = build_sine_dvr(-1.0, 2.0, 6)
    x = np.linspace(-1.0, 2.0, 200_001)
    phi = np.array([basis_value(b, i, x) for i in range(b.n)])
    s = np.trapezoid(phi[:, None, :] * phi[None, :, :], x, axis=2)
    np.testing.assert_allclose(s, np.eye(b.n), atol=1e-6)


def test_sinc_overlap_quadrature():
    # dense trapezoid on [-X, X]; beyond X the product phi_i phi_j averages to
    # (-1)^(i+j) / (2 pi^2 (x - x_i)(x - x_j)), whose integral is closed form
    b = build_sinc_dvr(-1.0, 1.0, 3)
    big = 1e4
    x = np.linspace(-big, big, 1_000_001)
    phi = np.array([basis_value(b, i, x) for i in range(b.n)])

    def tail(a, c):
        if a == c:
            return 1 / (big - a) + 1 / (big + a)
        return (np.log((big - c) / (big - a)) + np.log((big + a) / (big + c))) / (a - c)

    s = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            sign = (-1) ** (i + j)
            s[i, j] = np.trapezoid(phi[i] * phi[j], x) + sign * tail(b.grid[i], b.grid[j]) / (2 * np.pi**2)
    np.testing.assert_allclose(s, np.eye(3), atol=1e-6)


def test_coefficients_from_samples():
    b = build_sine_dvr(0, 1, 4)
    np.testing.assert_array_equal(coefficients_from_samples(b, np.zeros(4)), np.zeros(4))
    samples = np.zeros(4)
    samples[2] = 1 / np.sqrt(b.weights[2])
    np.testing.assert_allclose(coefficients_from_samples(b, samples), np.eye(4)[2])
    with pytest.raises(ContractError):
        coefficients_from_samples(b, np.zeros(3))


def test_gaussian_band_limited_reconstruction():
    b = build_sinc_dvr(-10.0, 0.25, 81)
    gauss = lambda x: np.exp(-(x**2) / 2)
    c = coefficients_from_samples(b, gauss(b.grid))
    x = np.linspace(-3, 3, 101) + 0.0731
    np.testing.assert_allclose(interpolate(b, c, x), gauss(x), atol=1e-4)


def test_fbr_transform_diagonalizes_kinetic():
    n, length = 9, 3.0
    u = sine_fbr_transform(n)
    t = kinetic_matrix(build_sine_dvr(0, length, n))
    k = np.arange(1, n + 1)
    np.testing.assert_allclose(u.T @ t @ u, np.diag((k * np.pi / length) ** 2 / 2), atol=1e-10)


def test_position_operator_route_reproduces_sine_grid():
    # cos(pi (x-a)/L) in the box eigenbasis is tridiagonal 1/2; its eigenvalues
    # map back to the uniform sine-DVR grid
    n, a, b = 8, -1.0, 3.0
    cmat = 0.5 * (np.eye(n, k=1) + np.eye(n, k=-1))
    w, vecs = position_operator_dvr(cmat)
    pts = np.sort(a + (b - a) / np.pi * np.arccos(w))
    np.testing.assert_allclose(pts, build_sine_dvr(a, b, n).grid, atol=1e-12)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)
    assert np.all(vecs.sum(axis=0) > 0)


def test_position_operator_route_harmonic_nodes():
    # x in the oscillator eigenbasis has Gauss-Hermite nodes as eigenvalues
    n = 10
    off = np.sqrt(np.arange(1, n) / 2.0)
    xmat = np.diag(off, 1) + np.diag(off, -1)
    w, _ = position_operator_dvr(xmat)
    nodes, _ = np.polynomial.hermite.hermgauss(n)
    np.testing.assert_allclose(w, np.sort(nodes), atol=1e-12)


def test_translated_basis():
    b = build_sine_dvr(0, 4, 3).translated(1.5)
    np.testing.assert_allclose(b.grid, [2.5, 3.5, 4.5])
    assert b.domain == (1.5, 5.5)
