import numpy as np
import pytest
from _oracles import fci_from_dvr
from sklearn.base import clone

from dvr_qchem import (
    RHF,
    AufbauDegeneracyError,
    ChainGeometry,
    ContractError,
    IntegralSet,
    build_integrals,
    build_sine_dvr,
    scf_solve,
)
from dvr_qchem.scf import fock_matrix, hf_energy


@pytest.fixture(scope="module")
def h2_ints():
    return build_integrals(build_sine_dvr(-4, 4, 4), ChainGeometry([-1.0, 1.0], [1, 1], 2))


def _brute_fock_loops(ints, d, eri):
    n = ints.n
    f = ints.hcore.copy()
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    f[i, j] += d[k, l] * (2 * eri[i, j, k, l] - eri[i, l, k, j])
    return f


def test_fock_zero_density(h2_ints):
    np.testing.assert_array_equal(fock_matrix(h2_ints, np.zeros((4, 4))), h2_ints.hcore)


def test_fock_single_function():
    ints = build_integrals(build_sine_dvr(-1, 1, 1), ChainGeometry([0.0], [1], 2))
    f = fock_matrix(ints, np.ones((1, 1)))
    assert f[0, 0] == pytest.approx(ints.hcore[0, 0] + ints.g[0, 0])
    d = np.ones((1, 1))
    assert hf_energy(ints, d, f) == pytest.approx(2 * ints.hcore[0, 0] + ints.g[0, 0] + ints.e_nn)


def test_fock_matches_four_index_loop():
    rng = np.random.default_rng(11)
    ints = build_integrals(build_sine_dvr(-3, 3, 5), ChainGeometry([0.2], [1], 2))
    d = rng.normal(size=(5, 5))
    d = d + d.T
    np.testing.assert_allclose(fock_matrix(ints, d), _brute_fock_loops(ints, d, _diag_eri(ints)), atol=1e-12)


def _diag_eri(ints):
    n = ints.n
    eri = np.zeros((n, n, n, n))
    for i in range(n):
        for k in range(n):
            eri[i, i, k, k] = ints.g[i, k]
    return eri


def test_fock_dimension_check(h2_ints):
    with pytest.raises(ContractError):
        fock_matrix(h2_ints, np.zeros((3, 3)))


def test_energy_of_empty_density(h2_ints):
    d = np.zeros((4, 4))
    assert hf_energy(h2_ints, d, fock_matrix(h2_ints, d)) == pytest.approx(h2_ints.e_nn)


def test_zero_electrons(h2_ints):
    res = scf_solve(h2_ints, 0)
    assert res.converged and res.iterations == 1
    assert res.e_hf == pytest.approx(h2_ints.e_nn)
    np.testing.assert_array_equal(res.density, 0.0)


def test_single_orbital_closed_shell():
    ints = build_integrals(build_sine_dvr(-1, 1, 1), ChainGeometry([0.0], [1], 2))
    res = scf_solve(ints, 2)
    assert res.converged and res.iterations <= 2
    assert res.e_hf == pytest.approx(2 * ints.hcore[0, 0] + ints.g[0, 0] + ints.e_nn, abs=1e-12)


def test_rejects_odd_or_too_many(h2_ints):
    with pytest.raises(ContractError):
        scf_solve(h2_ints, 3)
    with pytest.raises(ContractError):
        scf_solve(h2_ints, 10)


@pytest.mark.parametrize("diis", [False, True])
def test_invariants_at_convergence(diis):
    ints = build_integrals(build_sine_dvr(-6, 6, 16), ChainGeometry([-2.0, 0.0, 2.0], [1, 1, 2], 4))
    res = scf_solve(ints, 4, diis=diis, max_iter=500)
    assert res.converged
    c, d, f = res.mo_coeff, res.density, res.fock
    np.testing.assert_allclose(c.T @ c, np.eye(16), atol=1e-10)
    assert np.max(np.abs(d @ d - d)) < 1e-8
    assert np.trace(d) == pytest.approx(2.0)
    assert np.max(np.abs(f @ d - d @ f)) < 1e-8
    assert np.all(np.diff(res.orbital_energies) >= 0)
    occ = c[:, :2]
    alt = sum(res.orbital_energies[p] + occ[:, p] @ ints.hcore @ occ[:, p] for p in range(2)) + ints.e_nn
    assert res.e_hf == pytest.approx(alt, abs=1e-9)


def test_mixing_and_diis_agree():
    ints = build_integrals(build_sine_dvr(-6, 6, 16), ChainGeometry([-2.0, 0.0, 2.0], [1, 1, 2], 4))
    a = scf_solve(ints, 4, max_iter=500).e_hf
    b = scf_solve(ints, 4, diis=True).e_hf
    assert a == pytest.approx(b, abs=1e-9)


# ground energies from the 2N-mode Fock-space oracle, frozen
FCI_CASES = [
    ((-4, 4, 4), [-1.0, 1.0], [1, 1], 2, -1.7337489118591336),
    ((-3, 3, 5), [0.3], [1], 2, -0.746262438528651),
    ((-5, 5, 4), [-1.5, 0.0, 1.5], [1, 1, 2], 4, -4.165207155143863),
    ((-4, 4, 6), [-1.2, 1.2], [1, 1], 2, -1.6557944830038451),
]


@pytest.mark.parametrize("box,pos,chg,n_e,e_fci", FCI_CASES)
def test_hf_above_full_ci(box, pos, chg, n_e, e_fci):
    ints = build_integrals(build_sine_dvr(*box), ChainGeometry(pos, chg, n_e))
    res = scf_solve(ints, n_e, diis=True)
    assert res.converged
    assert res.e_hf >= e_fci - 1e-10


def test_frozen_fci_values_reproduce_live_oracle():
    box, pos, chg, n_e, e_fci = FCI_CASES[0]
    ints = build_integrals(build_sine_dvr(*box), ChainGeometry(pos, chg, n_e))
    assert fci_from_dvr(ints.t, ints.v, ints.g, ints.e_nn, n_e) == pytest.approx(e_fci, abs=1e-10)


def test_degenerate_frontier_aborts():
    basis = build_sine_dvr(0, 1, 3)
    ints = IntegralSet(np.diag([0.0, 1.0, 1.0]), np.zeros(3), np.full((3, 3), 1e-3), 0.0, basis)
    with pytest.raises(AufbauDegeneracyError):
        scf_solve(ints, 4)


def test_nonconvergence_is_reported(h2_ints):
    res = scf_solve(h2_ints, 2, max_iter=1, comm_tol=1e-15, e_tol=1e-16)
    assert not res.converged


def test_rhf_estimator(h2_ints):
    est = RHF(n_electrons=2, diis=True)
    assert est.get_params()["n_electrons"] == 2
    e = est.fit(h2_ints).predict()
    assert e == pytest.approx(scf_solve(h2_ints, 2, diis=True).e_hf, abs=1e-10)
    assert est.mo_coeff_.shape == (4, 4)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(ContractError):
        RHF().fit(h2_ints)
