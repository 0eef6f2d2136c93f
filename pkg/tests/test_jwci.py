import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from _oracles import determinant_vector, fock_space_hamiltonian, interleaved, random_integrals

from dvr_qchem import (
    JWCI,
    ChainGeometry,
    ContractError,
    build_active_hamiltonian,
    build_integrals,
    build_jw_hamiltonian,
    build_sine_dvr,
    scf_solve,
    solve_casci,
    solve_jwci,
)
from dvr_qchem.active_space import ActiveSpaceHamiltonian
from dvr_qchem.detci import enumerate_dets
from dvr_qchem.jwci import JW_MAX_SITES, det_to_jw, embed_fermion_op, jw_site_ops

OPS = jw_site_ops()
E = np.eye(4)


def random_ash(seed, l, n_elec, e_core=0.0):
    h, eri = random_integrals(np.random.default_rng(seed), l)
    return ActiveSpaceHamiltonian(l, n_elec, e_core, h, eri)


def test_site_matrices_verbatim():
    np.testing.assert_array_equal(OPS.a_up, [[0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0]])
    np.testing.assert_array_equal(OPS.a_dn, [[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, -1], [0, 0, 0, 0]])
    np.testing.assert_array_equal(OPS.parity, np.diag([1, -1, -1, 1]))


def test_site_actions():
    # basis index 2 n_up + n_dn: |0>, |dn>, |up>, |updn>
    np.testing.assert_array_equal(OPS.a_up @ E[2], E[0])
    np.testing.assert_array_equal(OPS.a_dn @ E[3], -E[2])
    np.testing.assert_array_equal(OPS.a_up @ E[3], E[1])
    np.testing.assert_array_equal(OPS.a_dn @ E[1], E[0])
    np.testing.assert_array_equal(OPS.n, np.diag([0, 1, 1, 2]))
    np.testing.assert_array_equal(OPS.n_up @ OPS.n_dn, np.diag([0, 0, 0, 1]))


def test_site_anticommutation():
    ops = (OPS.a_up, OPS.a_dn)
    for s, t in itertools.product(range(2), repeat=2):
        a, b = ops[s], ops[t]
        np.testing.assert_array_equal(a @ b.T + b.T @ a, E if s == t else 0 * E)
        np.testing.assert_array_equal(a @ b + b @ a, 0 * E)


@pytest.mark.parametrize("l", [1, 2, 3])
def test_embedded_anticommutation(l):
    modes = [(i, s) for i in range(l) for s in (0, 1)]
    c = {m: embed_fermion_op(OPS, *m, False, l) for m in modes}
    cd = {m: embed_fermion_op(OPS, *m, True, l) for m in modes}
    eye = sp.identity(4**l)
    for m, n in itertools.product(modes, repeat=2):
        assert abs(c[m] @ cd[n] + cd[n] @ c[m] - (eye if m == n else 0 * eye)).max() == 0
        assert abs(c[m] @ c[n] + c[n] @ c[m]).max() == 0


def test_embedded_number_operator():
    l = 3
    n_tot = sum(embed_fermion_op(OPS, i, s, True, l) @ embed_fermion_op(OPS, i, s, False, l)
                for i in range(l) for s in (0, 1))
    idx = np.arange(4**l)
    digits = [(idx // 4 ** (l - 1 - j)) % 4 for j in range(l)]
    expected = sum((d >> 1) + (d & 1) for d in digits)
    np.testing.assert_array_equal(n_tot.diagonal(), expected)
    assert abs(n_tot - sp.diags(n_tot.diagonal())).max() == 0


def test_embed_rejects_bad_arguments():
    with pytest.raises(ContractError):
        embed_fermion_op(OPS, 3, 0, False, 3)
    with pytest.raises(ContractError):
        embed_fermion_op(OPS, 0, 2, False, 3)


@pytest.mark.parametrize("l,seed", [(2, 0), (3, 1)])
def test_hamiltonian_equals_generic_fock_space(l, seed):
    ash = random_ash(seed, l, 2, e_core=0.25)
    ours = build_jw_hamiltonian(ash).sparse
    ref, _ = fock_space_hamiltonian(ash.h_eff, ash.eri, ash.e_core, order=interleaved)
    assert abs(ours - ref).max() < 1e-12


def test_matrix_free_matches_sparse():
    # the matrix-free path is used above six sites; force it on a small chain
    ham = build_jw_hamiltonian(random_ash(2, 3, 2), penalty=(0.5, 2))
    v = np.random.default_rng(3).normal(size=ham.dim)
    dense = ham.sparse @ v
    import dvr_qchem.jwci as jw

    old = jw._MATERIALIZE_MAX_SITES
    jw._MATERIALIZE_MAX_SITES = 0
    try:
        np.testing.assert_allclose(ham.matvec(v), dense, atol=1e-11)
    finally:
        jw._MATERIALIZE_MAX_SITES = old


def test_commutes_with_number_and_spin():
    ham = build_jw_hamiltonian(random_ash(4, 3, 2))
    n_up, n_dn = ham.occupations
    h = ham.sparse
    for q in (sp.diags((n_up + n_dn).astype(float)), sp.diags(0.5 * (n_up - n_dn))):
        assert abs(h @ q - q @ h).max() < 1e-12


def test_single_site_hubbard_spectrum():
    eps, u, core = -0.8, 1.3, 0.4
    ash = ActiveSpaceHamiltonian(1, 2, core, np.array([[eps]]), np.array([[[[u]]]]))
    ham = build_jw_hamiltonian(ash)
    np.testing.assert_allclose(ham.sparse.toarray(), np.diag([core, core + eps, core + eps, core + 2 * eps + u]), atol=1e-14)


def test_ground_state_is_lowest_sector_minimum():
    ash = random_ash(5, 3, 2)
    ham = build_jw_hamiltonian(ash)
    full = np.linalg.eigvalsh(ham.sparse.toarray())[0]
    sectors = [solve_jwci(ham, n_electrons=n).energies[0] for n in range(7)]
    assert full == pytest.approx(min(sectors), abs=1e-10)


def test_penalty_selects_electron_number():
    ash = random_ash(6, 3, 2)
    ham = build_jw_hamiltonian(ash, penalty=(10.0, 2))
    res = solve_jwci(ham)
    assert res.n_expectation[0] == pytest.approx(2.0, abs=1e-8)
    ref = solve_jwci(build_jw_hamiltonian(ash), n_electrons=2).energies[0]
    assert res.energies[0] == pytest.approx(ref, abs=1e-10)


def test_agrees_with_determinant_ci():
    for seed, (l, n_e) in enumerate([(3, 2), (4, 4), (4, 3)]):
        ash = random_ash(10 + seed, l, n_e)
        e_det = solve_casci(ash, s_z=0.5 * (n_e % 2)).energies[0]
        e_jw = solve_jwci(build_jw_hamiltonian(ash), n_electrons=n_e, s_z=0.5 * (n_e % 2)).energies[0]
        assert e_jw == pytest.approx(e_det, abs=1e-10)


def test_det_to_jw_sign_and_index():
    l = 3
    for a, b in enumerate_dets(l, 2, 1).dets:
        idx, sign = det_to_jw((a, b), l)
        vec = determinant_vector([p for p in range(l) if a >> p & 1], [p for p in range(l) if b >> p & 1], l)
        expected = np.zeros(4**l)
        expected[idx] = sign
        np.testing.assert_array_equal(vec, expected)


def test_ci_vector_maps_onto_jw_state():
    ash = random_ash(20, 3, 2)
    ci = solve_casci(ash)
    jw = solve_jwci(build_jw_hamiltonian(ash), n_electrons=2, s_z=0.0)
    mapped = np.zeros(64)
    for coef, det in zip(ci.coefficients[:, 0], ci.basis.dets):
        idx, sign = det_to_jw(det, 3)
        mapped[idx] += sign * coef
    assert abs(mapped @ jw.states[:, 0]) == pytest.approx(1.0, abs=1e-8)


def test_site_limit():
    l = JW_MAX_SITES + 1
    ash = ActiveSpaceHamiltonian(l, 2, 0.0, np.zeros((l, l)), np.zeros((l,) * 4))
    with pytest.raises(ContractError, match="DMRG"):
        build_jw_hamiltonian(ash)


def test_jwci_estimator():
    ints = build_integrals(build_sine_dvr(-4, 4, 6), ChainGeometry([-1.0, 1.0], [1, 1], 2))
    scf = scf_solve(ints, 2, diis=True)
    e_cas = solve_casci(build_active_hamiltonian(scf, ints, 4, 2)).energies[0]
    est = JWCI(n_active_orb=4, n_active_elec=2)
    assert est.fit(ints, scf).predict() == pytest.approx(e_cas, abs=1e-10)
    assert JWCI(4, 2, mu=5.0).fit(ints, scf).e_tot_ == pytest.approx(e_cas, abs=1e-8)
    assert est.get_params()["mu"] is None
