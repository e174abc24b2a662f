import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamem.lindblad import (
    BackendToleranceError,
    PairObservable,
    SpectroscopyConfig,
    density_matrices,
    evolve_series,
    liouvillian_eigensystem,
    liouvillian_matrix,
    perturbative_prediction,
    sparse_liouvillian,
    vec,
)
from hamem.operators import HamiltonianSpec, build_hamiltonian, build_noise, custom_noise, diagonalize
from hamem.signals import DampedMode, synth_series
from oracles import (
    PAULI,
    random_density_check,
    random_hermitian,
    reference_series,
    single_qubit_closed_form,
    site_op,
    superop_by_basis,
)


def _random_noise(rng, n, k=2, scale=0.1):
    d = 2**n
    ls = [scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) for _ in range(k)]
    h1 = random_hermitian(rng, d, scale)
    return custom_noise(ls, h1)


def test_unitary_dyad_eigenvalue():
    lv = liouvillian_matrix(PAULI["Z"])
    dyad = vec(np.array([[0, 1], [0, 0]], dtype=complex))  # |e0><e1|
    # |e0><e1| evolves as exp(-i(E0 - E1)t) = exp(i(E1 - E0)t)
    np.testing.assert_allclose(lv @ dyad, -2j * dyad, atol=1e-15)


def test_pure_dephasing_spectrum():
    kappa = 0.3
    nm = custom_noise([np.sqrt(kappa) * PAULI["Z"]])
    ev = np.linalg.eigvals(liouvillian_matrix(np.zeros((2, 2)), nm))
    np.testing.assert_allclose(np.sort(ev.real), [-2 * kappa, -2 * kappa, 0, 0], atol=1e-14)
    np.testing.assert_allclose(ev.imag, 0, atol=1e-14)


@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_liouvillian_matches_basis_oracle_and_preserves_trace(n, seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 2**n)
    nm = _random_noise(rng, n)
    lv = liouvillian_matrix(h, nm)
    ref = superop_by_basis(h + nm.h_err, nm.lindblads)
    np.testing.assert_allclose(lv, ref, atol=1e-12)
    np.testing.assert_allclose(vec(np.eye(2**n)).conj() @ lv, 0, atol=1e-12)


def test_liouvillian_dimension_mismatch():
    with pytest.raises(ValueError):
        liouvillian_matrix(np.eye(4), build_noise("paper-default", 0.1, 0.0, 1))


@pytest.mark.parametrize("backend", ["stepper", "spectral"])
def test_noiseless_pair_series(ring3, backend):
    h, sp = ring3
    cfg = SpectroscopyConfig(0.01, 200)
    for a, b in [(0, 1), (2, 6), (3, 7)]:
        obs = PairObservable.from_spectrum(sp, a, b)
        y = evolve_series(h, None, obs.initial_state(), obs, cfg, backend)
        expect = np.exp(1j * sp.gap(a, b) * cfg.dt * np.arange(cfg.L))
        np.testing.assert_allclose(y.samples, expect, atol=1e-9)
        assert y.samples[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("backend", ["stepper", "spectral"])
def test_single_qubit_closed_form(backend):
    kappa, beta, nu_z, dt, L = 0.05, 0.01, 1.0, 0.01, 300
    h = np.pi * nu_z * PAULI["Z"]
    # a = |0> (E = +pi), b = |1> (E = -pi)
    obs = PairObservable(np.array([1, 0], complex), np.array([0, 1], complex))
    nm = build_noise("paper-default", kappa, beta, 1)
    y = evolve_series(h, nm, obs.initial_state(), obs, SpectroscopyConfig(dt, L), backend)
    _, expect = single_qubit_closed_form(kappa, beta, nu_z, dt, L)
    np.testing.assert_allclose(y.samples, expect, atol=1e-9)


def test_backends_agree_ring3(ring3):
    h, sp = ring3
    nm = build_noise("paper-default", 1e-3, 0.01, 3)
    cfg = SpectroscopyConfig(0.01, 300)
    for a, b in [(0, 5), (1, 4)]:
        obs = PairObservable.from_spectrum(sp, a, b)
        ys = [evolve_series(h, nm, obs.initial_state(), obs, cfg, be).samples for be in ("stepper", "spectral")]
        assert np.abs(ys[0] - ys[1]).max() <= 1e-8


def test_backends_agree_xx_chain_n4():
    h = build_hamiltonian(HamiltonianSpec("xx-chain", 4, g=0.5))
    sp = diagonalize(h)
    nm = build_noise("amplitude-damping", 2e-2, 0.01, 4)
    obs = PairObservable.from_spectrum(sp, 2, 9)
    cfg = SpectroscopyConfig(0.02, 200)
    ys = [evolve_series(h, nm, obs.initial_state(), obs, cfg, be).samples for be in ("stepper", "spectral")]
    assert np.abs(ys[0] - ys[1]).max() <= 1e-8


def test_series_matches_independent_integrator(rng):
    n = 2
    h = random_hermitian(rng, 4)
    nm = _random_noise(rng, n, scale=0.2)
    sp = diagonalize(h)
    obs = PairObservable.from_spectrum(sp, 0, 3)
    cfg = SpectroscopyConfig(0.05, 80)
    ref = reference_series(h + nm.h_err, nm.lindblads, obs.initial_state(), obs.matrix(), cfg.dt, cfg.L)
    for be in ("stepper", "spectral"):
        y = evolve_series(h, nm, obs.initial_state(), obs, cfg, be)
        np.testing.assert_allclose(y.samples, ref, atol=1e-10)


def test_arbitrary_observable(rng):
    h = random_hermitian(rng, 4)
    psi = np.array([1, 1, 0, 1j]) / np.sqrt(3)
    o = random_hermitian(rng, 4)
    nm = _random_noise(rng, 2)
    y = evolve_series(h, nm, psi, o, SpectroscopyConfig(0.1, 20))
    ref = reference_series(h + nm.h_err, nm.lindblads, psi, o, 0.1, 20)
    np.testing.assert_allclose(y.samples, ref, atol=1e-10)


def test_physicality_along_evolution(ring3):
    h, sp = ring3
    nm = build_noise("paper-default", 0.05, 0.01, 3)
    obs = PairObservable.from_spectrum(sp, 1, 6)
    L = 300
    for rho in density_matrices(h, nm, obs.initial_state(), 0.01, [0, L // 2, L - 1]):
        random_density_check(rho)


def test_spectral_backend_reports_tolerance_failure():
    # exceptional point of a driven, damped qubit: the eigenbasis is defective
    g = 1.0
    h = (g / 8) * PAULI["X"]
    nm = custom_noise([np.sqrt(g) * np.array([[0, 1], [0, 0]])])
    psi = np.array([1, 0], complex)
    cfg = SpectroscopyConfig(0.1, 50)
    with pytest.raises(BackendToleranceError) as info:
        evolve_series(h, nm, psi, PAULI["Z"], cfg, "spectral")
    assert info.value.error_estimate > 1e-9
    y = evolve_series(h, nm, psi, PAULI["Z"], cfg, "stepper")
    ref = reference_series(h, nm.lindblads, psi, PAULI["Z"], 0.1, 50)
    np.testing.assert_allclose(y.samples, ref, atol=1e-10)


def test_input_validation():
    with pytest.raises(ValueError):
        evolve_series(PAULI["Z"], None, np.array([1, 1]), PAULI["Z"], SpectroscopyConfig(0.1, 4))
    with pytest.raises(ValueError):
        evolve_series(PAULI["Z"], None, np.array([1, 0]), PAULI["Z"], SpectroscopyConfig(0.1, 4), "rk4")
    with pytest.raises(ValueError):
        SpectroscopyConfig(0.0, 10)
    with pytest.raises(ValueError):
        SpectroscopyConfig(0.1, 1)
    with pytest.raises(ValueError):
        PairObservable(np.array([1, 1]), np.array([1, 0]))


def test_alias_warning_threshold():
    energies = np.array([-1.0, 0.5, 2.0])  # width 3
    assert not SpectroscopyConfig(np.pi / 3 * 0.999, 10).aliased(energies)
    assert SpectroscopyConfig(np.pi / 3, 10).aliased(energies)
    with pytest.warns(UserWarning, match="alias"):
        SpectroscopyConfig(1.1, 10).check_alias(energies)


def test_eigensystem_noiseless(ring3):
    h, sp = ring3
    es = liouvillian_eigensystem(liouvillian_matrix(h))
    e = sp.energies
    expect = (1j * (e[None, :] - e[:, None])).ravel()
    got = es.eigenvalues
    # compare as multisets, sorted by imaginary then real part
    got = got[np.lexsort((got.real, got.imag))]
    expect = expect[np.lexsort((expect.real, expect.imag))]
    np.testing.assert_allclose(got, expect, atol=1e-8)


def test_eigensystem_residuals(ring3):
    h, _ = ring3
    lv = liouvillian_matrix(h, build_noise("paper-default", 0.05, 0.01, 3))
    es = liouvillian_eigensystem(lv)
    assert es.residuals(lv).max() <= 1e-8 * np.linalg.norm(lv, 2)
    v = np.random.default_rng(0).normal(size=lv.shape[0]) + 0j
    np.testing.assert_allclose(es.right @ es.project(v), v, atol=1e-10)


def test_eigensystem_dephasing_modes_are_dyads():
    nm = custom_noise([np.sqrt(0.2) * PAULI["Z"]])
    es = liouvillian_eigensystem(liouvillian_matrix(0.7 * PAULI["Z"], nm))
    # every right mode has exactly one nonzero entry, i.e. a basis dyad
    support = np.sort(np.argmax(np.abs(es.right), axis=0))
    np.testing.assert_array_equal(support, np.arange(4))
    assert np.all(np.sort(np.abs(es.right), axis=0)[-2] < 1e-12)


def test_first_order_single_qubit_default_noise():
    kappa = 0.02
    sp = diagonalize(np.pi * PAULI["Z"])
    # a = |0>, b = |1> in the computational basis; sorted index 1 is |0>
    pred = perturbative_prediction(sp, build_noise("paper-default", kappa, 0.0, 1), 1, 0, dt=0.01)
    assert pred.lambda1 == pytest.approx((-1 + 1j) * kappa, abs=1e-15)
    assert pred.lambda0 == pytest.approx(-2j * np.pi)
    assert pred.r_ab == pytest.approx(np.exp(-kappa * 0.01))
    assert pred.phase_bias == pytest.approx(kappa * 0.01)


def test_first_order_amplitude_damping():
    kappa = 0.03
    sp = diagonalize(np.pi * PAULI["Z"])
    pred = perturbative_prediction(sp, build_noise("amplitude-damping", kappa, 0.0, 1), 1, 0, dt=0.01)
    assert pred.lambda1 == pytest.approx(-kappa / 2, abs=1e-15)
    assert pred.phase_bias == 0.0


def test_zero_noise_prediction(ring3):
    _, sp = ring3
    pred = perturbative_prediction(sp, build_noise("paper-default", 0.0, 0.01, 3), 0, 4, dt=0.01)
    assert pred.lambda1 == 0 and pred.lambda2 == 0
    assert pred.r_ab == 1.0 and pred.phase_bias == 0.0


@pytest.mark.filterwarnings("ignore:1 second-order terms")
def test_first_order_matches_matrix_element_oracle(ring3, rng):
    from oracles import dissipator_element

    _, sp = ring3
    nm = _random_noise(rng, 3, scale=0.05)
    a, b = 1, 5
    pred = perturbative_prediction(sp, nm, a, b, dt=0.01)
    phi_a, phi_b = sp.state(a), sp.state(b)
    ref = dissipator_element(nm.h_err, nm.lindblads, phi_a, phi_b, phi_a, phi_b)
    assert pred.lambda1 == pytest.approx(ref, abs=1e-14)


def test_perturbation_orders_against_exact_eigenvalue(ring3):
    """First order leaves an O(kappa^2) residual, second order O(kappa^3)."""
    h, sp = ring3
    a, b = 0, 5
    e_ba = sp.gap(a, b)
    res1, res2 = [], []
    for kappa in (1e-1, 1e-2):
        nm = build_noise("paper-default", kappa, 0.01, 3)
        pred = perturbative_prediction(sp, nm, a, b, dt=0.01)
        ev = np.linalg.eigvals(liouvillian_matrix(h, nm))
        exact = ev[np.argmin(np.abs(ev - (1j * e_ba + pred.lambda1)))]
        res1.append(abs(exact - pred.first_order))
        res2.append(abs(exact - pred.second_order))
    assert res1[0] / res1[1] > 80  # ~100 for quadratic
    assert res2[0] / res2[1] > 800  # ~1000 for cubic
    assert res2[1] < res1[1]


def test_gap_guard_counts_exclusions():
    # two decoupled identical qubits: the gap of (|00>,|01>) is shared by (|10>,|11>)
    h = np.pi * (site_op(PAULI["Z"], 0, 2) + site_op(PAULI["Z"], 1, 2))
    sp = diagonalize(h + 1e-3 * site_op(PAULI["Z"], 0, 2))
    nm = build_noise("paper-default", 1e-3, 0.0, 2)
    pred = perturbative_prediction(sp, nm, 0, 1, dt=0.01, gap_threshold=1e-2)
    assert pred.excluded_terms >= 1


def test_synth_series_examples():
    np.testing.assert_allclose(synth_series([DampedMode(1, 1, 0)], 0.1, 5).samples, 1)
    y = synth_series([DampedMode(1, 0.9, np.pi / 4)], 0.1, 3).samples
    np.testing.assert_allclose(y, [1, 0.9 * np.exp(1j * np.pi / 4), 0.81 * np.exp(1j * np.pi / 2)])
    m1, m2 = [DampedMode(1, 0.9, 0.2)], [DampedMode(0.3j, 0.7, -1.0)]
    np.testing.assert_allclose(
        synth_series(m1 + m2, 0.1, 20).samples,
        synth_series(m1, 0.1, 20).samples + synth_series(m2, 0.1, 20).samples,
    )
    with pytest.raises(ValueError):
        synth_series([DampedMode(1, -0.5, 0)], 0.1, 3)


def test_sparse_liouvillian_matches_dense(rng):
    h = random_hermitian(rng, 8)
    nm = _random_noise(rng, 3)
    np.testing.assert_allclose(sparse_liouvillian(h, nm).toarray(), liouvillian_matrix(h, nm), atol=1e-14)
    np.testing.assert_allclose(sparse_liouvillian(h).toarray(), liouvillian_matrix(h), atol=1e-14)
    with pytest.raises(ValueError):
        sparse_liouvillian(np.array([[0, 1], [0, 0]]))


def test_large_dim_stepper_matches_spectral():
    # n=5 takes the sparse exponential-action path of the stepper
    h = build_hamiltonian(HamiltonianSpec("ring", 5, nu_z=4, nu_x=1, J=4))
    sp = diagonalize(h)
    obs = PairObservable.from_spectrum(sp, 2, 20)
    nm = build_noise("paper-default", 0.05, 0.01, 5)
    cfg = SpectroscopyConfig(0.01, 120)
    a = evolve_series(h, nm, obs.initial_state(), obs, cfg, "stepper").samples
    b = evolve_series(h, nm, obs.initial_state(), obs, cfg, "spectral").samples
    assert np.abs(a - b).max() <= 1e-9 * np.abs(b).max()
