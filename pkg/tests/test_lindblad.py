import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from conftest import SM, SZ, brute_partial_transpose, site_op
from superradiance import lindblad
from superradiance.analysis import refined_minimum
from superradiance.dicke import JMLabel, dicke_state, rho_jm
from superradiance.errors import CapacityError, ParameterError
from superradiance.lindblad import (build_generator, emitter_moments, integrate,
                                    negativity, observables, pair_correlations,
                                    partial_transpose, purity, reduce_to_emitters, run_exact)
from superradiance.model import (DickeState, FullyInverted, FullySeparableHalfInverted,
                                 PhotonFock, SystemParams, TimeGrid, single_emitter_rate)


def dense_lindbladian(params, n_max, rho):
    """Textbook master equation with dense matrices."""
    n = params.n_emitters
    nf = n_max + 1
    a = np.kron(np.eye(2 ** n), np.diag(np.sqrt(np.arange(1, nf)), 1))
    sms = [np.kron(site_op(SM, i, n), np.eye(nf)) for i in range(n)]
    szs = [np.kron(site_op(SZ, i, n), np.eye(nf)) for i in range(n)]
    g = params.coupling_g
    H = params.detuning_delta / 2 * sum(szs) + g * sum(s.T @ a + s @ a.T for s in sms)

    def D(c, r):
        cd = c.conj().T
        return c @ r @ cd - 0.5 * (cd @ c @ r + r @ cd @ c)

    out = -1j * (H @ rho - rho @ H) + params.cavity_loss_kappa * D(a, rho)
    out += params.emitter_decay_gamma * sum(D(s, rho) for s in sms)
    out += params.pure_dephasing_gamma_phi / 2 * sum(D(z, rho) for z in szs)
    return out


def random_density(dim, rng):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("n, n_max, rates", [
    (1, 2, (0.7, 0.3, 0.2, 0.0)),
    (2, 2, (2.0, 1.0, 0.5, 0.4)),
    (3, 1, (20.0, 1.0, 0.0, 0.0)),
])
def test_generator_matches_textbook(n, n_max, rates):
    params = SystemParams(n, 0.8, *rates)
    gen = build_generator(params, n_max)
    rho = random_density(gen.dim, np.random.default_rng(n))
    expected = dense_lindbladian(params, n_max, rho)
    assert np.abs(gen(rho) - expected).max() < 1e-12
    L = gen.superoperator()
    assert np.abs(L @ rho.ravel() - expected.ravel()).max() < 1e-12


def test_restricted_superoperator_matches_full():
    params = SystemParams.from_ratios(2, 3.0, 1.0, 0.5)
    gen = build_generator(params, 3)
    idx = gen.balanced_indices()
    rho = lindblad.initial_density_matrix(DickeState(1), 2, 3)
    full = gen.superoperator() @ rho.ravel()
    restricted = gen.superoperator(idx) @ rho.ravel()[idx]
    assert np.abs(full[idx] - restricted).max() < 1e-14
    outside = np.ones(len(full), bool)
    outside[idx] = False
    assert np.abs(full[outside]).max() == 0


def test_generator_preserves_trace_and_hermiticity():
    params = SystemParams.from_ratios(2, 1.0, 0.5, 0.3, 0.2)
    gen = build_generator(params, 3)
    rho = random_density(gen.dim, np.random.default_rng(0))
    d = gen(rho)
    assert abs(np.trace(d)) < 1e-13
    assert np.abs(d - d.conj().T).max() < 1e-13


def test_capacity_guard():
    with pytest.raises(CapacityError):
        build_generator(SystemParams.from_ratios(8, 1, 1), 20)
    with pytest.raises(ParameterError):
        build_generator(SystemParams.from_ratios(2, 1, 1), -1)


def test_ground_state_is_stationary():
    params = SystemParams.from_ratios(1, 0.0, 0.0)
    gen = build_generator(params, 1)
    rho = np.zeros((gen.dim, gen.dim), complex)
    rho[0, 0] = 1.0
    assert np.abs(gen(rho)).max() == 0
    snaps = list(integrate(gen, rho, TimeGrid(3.0, 7)))
    assert all(np.array_equal(r, rho) for _, r in snaps)


def _singlet_with_photons(n_max, n_photons):
    singlet = rho_jm(JMLabel(2, 0, 0))
    field = np.zeros((n_max + 1, n_max + 1))
    field[n_photons, n_photons] = 1
    return np.kron(singlet, field).astype(complex)


def test_photon_decay_through_dark_emitters():
    # the singlet does not couple to the mode, so the photon just leaks out
    params = SystemParams.from_ratios(2, 0.7, 0.0)
    gen = build_generator(params, 2)
    grid = TimeGrid(5.0, 26)
    for t, rho in integrate(gen, _singlet_with_photons(2, 1), grid):
        n = lindblad.photon_distribution(rho, 2) @ np.arange(3)
        assert abs(n - np.exp(-0.7 * t)) < 1e-6


def test_dark_state_without_loss_is_frozen():
    gen = build_generator(SystemParams.from_ratios(2, 0.0, 0.0), 2)
    rho0 = _singlet_with_photons(2, 1)
    assert np.abs(gen(rho0)).max() < 1e-14


def test_vacuum_rabi_oscillation_n2():
    # |G, 1> couples to |D_{2,1}, 0> with matrix element sqrt(2) g
    params = SystemParams.from_ratios(2, 0.0, 0.0)
    grid = TimeGrid(6.0, 121)
    run = run_exact(params, PhotonFock(1), grid)
    h = np.array([[0, np.sqrt(2)], [np.sqrt(2), 0]])
    vals, vecs = np.linalg.eigh(h)
    for t, n, overlap in zip(grid.times, run.column("n"), run.column("dicke_overlap")):
        amp = vecs @ (np.exp(-1j * vals * t) * vecs[0])
        assert abs(n - abs(amp[0]) ** 2) < 1e-7
        assert abs(overlap - abs(amp[1]) ** 2) < 1e-7
    # period of the photon number, from a parabola through its first revival
    window = (grid.times > 1.5) & (grid.times < 3.0)
    _, t_peak = refined_minimum(grid.times[window], -run.column("n")[window])
    assert t_peak == pytest.approx(np.pi / np.sqrt(2), rel=1e-3)


def test_detuned_single_emitter_rabi():
    delta = 1.5
    params = SystemParams.from_ratios(1, 0.0, 0.0, detuning_over_g=delta)
    grid = TimeGrid(5.0, 51)
    run = run_exact(params, FullyInverted(), grid)
    omega = np.sqrt(delta ** 2 + 4)
    expected = 4 / omega ** 2 * np.sin(omega * grid.times / 2) ** 2
    assert np.abs(run.column("n") - expected).max() < 1e-7


@pytest.mark.parametrize("gamma_phi", [0.0, 0.5])
def test_purcell_decay_single_emitter(gamma_phi):
    params = SystemParams.from_ratios(1, 20.0, 1.0, gamma_phi)
    grid = TimeGrid(5.0, 101)
    run = run_exact(params, FullyInverted(), grid)
    p_exc = (1 + run.column("sz")) / 2
    window = (grid.times > 1.0) & (grid.times < 4.0)
    slope = -np.polyfit(grid.times[window], np.log(p_exc[window]), 1)[0]
    expected = 1.0 + single_emitter_rate(params)
    assert slope == pytest.approx(expected, rel=0.02)


def test_excitation_balance_pointwise():
    params = SystemParams.from_ratios(3, 4.0, 0.5, 0.7)
    gen = build_generator(params, 7)
    exc = np.diag(gen.excitations().astype(float))
    num = gen.num.toarray()
    n_exc = exc - num
    rho0 = lindblad.initial_density_matrix(FullyInverted(), 3, 7)
    for _, rho in integrate(gen, rho0, TimeGrid(2.0, 11)):
        lhs = np.trace(exc @ gen(rho)).real
        rhs = -4.0 * np.trace(num @ rho).real - 0.5 * np.trace(n_exc @ rho).real
        assert abs(lhs - rhs) < 1e-6


def test_closed_system_conserves_j2_and_excitation():
    params = SystemParams.from_ratios(3, 0.0, 0.0)
    run = run_exact(params, FullyInverted(), TimeGrid(4.0, 41))
    assert np.ptp(run.j2) < 1e-6
    exc = 3 * (1 + run.column("sz")) / 2 + run.column("n")
    assert np.ptp(exc) < 1e-6


def test_quality_bookkeeping_fig1_parameters():
    run = run_exact(SystemParams.from_ratios(4, 20, 1), FullyInverted(), TimeGrid(3.0, 61))
    assert run.max_trace_drift <= 1e-8
    assert run.min_eigenvalue >= -1e-8
    assert run.cutoff_ok and not run.flags
    for rho_q in run.emitter_states:
        assert np.abs(rho_q - rho_q.conj().T).max() < 1e-9
    purity_vals = run.column("purity")
    assert np.all((purity_vals > 0) & (purity_vals <= 1 + 1e-12))
    overlap = run.column("dicke_overlap")
    assert np.all((overlap >= -1e-12) & (overlap <= 1 + 1e-12))
    assert np.all(np.abs(run.column("c0")) <= 0.5) and np.all(np.abs(run.column("czz")) <= 1)
    # pair symmetry: every ordered pair carries the same C0
    c0, _ = pair_correlations(run.emitter_states[20], 4)
    off = c0[~np.eye(4, dtype=bool)]
    assert np.ptp(off.real) < 1e-8 and np.ptp(off.imag) < 1e-8


def test_emitted_excitation_bookkeeping():
    # everything initially stored in the emitters eventually leaves through kappa or gamma
    params = SystemParams.from_ratios(4, 20, 1)
    grid = TimeGrid(16.0, 1601)
    run = run_exact(params, FullyInverted(), grid)
    flux = 20 * run.column("n") + 1.0 * 4 * (1 + run.column("sz")) / 2
    emitted = trapezoid(flux, grid.times)
    assert emitted == pytest.approx(4.0, rel=0.01)


def test_photon_rate_identity_exact():
    params = SystemParams.from_ratios(3, 20, 1, 0.3)
    run = run_exact(params, FullyInverted(), TimeGrid(2.0, 41))
    resid = run.dn_dt + params.cavity_loss_kappa * run.column("n") - run.emission_flux
    assert np.abs(resid).max() < 1e-10


def test_cutoff_flag_and_auto_extension():
    params = SystemParams.from_ratios(2, 0.1, 0.1)
    tight = run_exact(params, PhotonFock(2), TimeGrid(1.0, 11), n_max=2)
    assert not tight.cutoff_ok and tight.flags
    auto = run_exact(params, PhotonFock(1), TimeGrid(1.0, 11))
    assert auto.cutoff_ok and auto.n_max == lindblad.default_cutoff(2, 1)


def test_initial_photon_above_cutoff():
    with pytest.raises(ParameterError):
        lindblad.initial_density_matrix(PhotonFock(5), 2, 3)


# --- reduced states and observables ------------------------------------------------

def test_reduce_product_state():
    rng = np.random.default_rng(3)
    rho_q = random_density(4, rng)
    field = np.zeros((3, 3))
    field[0, 0] = 1
    assert np.array_equal(reduce_to_emitters(np.kron(rho_q, field), 2), rho_q)


def test_reduce_entangled_single_emitter():
    psi = np.zeros(4)
    psi[0b10] = psi[0b01] = 1 / np.sqrt(2)  # |e,0> + |g,1>
    assert np.allclose(reduce_to_emitters(np.outer(psi, psi), 1), np.eye(2) / 2)


def test_reduced_purity_oracle():
    params = SystemParams.from_ratios(2, 2.0, 0.5)
    gen = build_generator(params, 4)
    rho0 = lindblad.initial_density_matrix(FullyInverted(), 2, 4)
    _, rho = list(integrate(gen, rho0, TimeGrid(0.8, 3)))[-1]
    t = rho.reshape(2, 2, 5, 2, 2, 5)
    red = np.zeros((4, 4), complex)
    for f in range(5):
        red += t[:, :, f, :, :, f].reshape(4, 4)
    assert purity(reduce_to_emitters(rho, 2)) == pytest.approx(np.trace(red @ red).real, abs=1e-14)


def _with_vacuum(rho_q, n_max=2):
    field = np.zeros((n_max + 1, n_max + 1))
    field[0, 0] = 1
    return np.kron(rho_q, field)


def test_observables_dicke():
    psi = dicke_state(4, 2)
    rec = observables(_with_vacuum(np.outer(psi, psi)), 4)
    assert rec.c0 == pytest.approx(1 / 3, abs=1e-14)
    assert rec.czz == pytest.approx(-1 / 3, abs=1e-14)
    assert rec.dicke_overlap == pytest.approx(1.0)
    assert rec.purity == pytest.approx(1.0)
    assert rec.sz == pytest.approx(0.0, abs=1e-14)


def test_observables_inverted_and_mixed():
    rec = observables(lindblad.initial_density_matrix(FullyInverted(), 3, 2), 3)
    assert (rec.sz, rec.c0, rec.czz, rec.n) == (1.0, 0, 1.0, 0.0)
    rec = observables(lindblad.initial_density_matrix(FullySeparableHalfInverted(), 3, 2), 3)
    assert rec.sz == pytest.approx(0.0) and rec.czz == pytest.approx(0.0)
    assert abs(rec.c0) < 1e-15 and rec.purity == pytest.approx(2 ** -3)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2 ** 16))
def test_moment_identities_match_pair_matrices(n, seed):
    rho_q = random_density(2 ** n, np.random.default_rng(seed))
    sz, c0, czz = emitter_moments(rho_q, n)
    c0_m, czz_m = pair_correlations(rho_q, n)
    mask = ~np.eye(n, dtype=bool)
    assert c0 == pytest.approx(c0_m[mask].mean(), abs=1e-12)
    assert czz == pytest.approx(czz_m[mask].mean(), abs=1e-12)
    szs = [np.trace(rho_q @ site_op(SZ, i, n)).real for i in range(n)]
    assert sz == pytest.approx(np.mean(szs), abs=1e-12)


# --- negativity ------------------------------------------------------------------------

def test_negativity_product_state():
    a, b = random_density(2, np.random.default_rng(1)), random_density(4, np.random.default_rng(2))
    assert negativity(np.kron(a, b), [0], 3) < 1e-12


def test_negativity_singlet():
    assert negativity(rho_jm(JMLabel(2, 0, 0)), [0]) == pytest.approx(0.5, abs=1e-12)
    assert negativity(rho_jm(JMLabel(2, 0, 0)), [1]) == pytest.approx(0.5, abs=1e-12)


def test_negativity_half_inverted_dicke_sector():
    rho = rho_jm(JMLabel(4, 4, 0))
    vals = np.linalg.eigvalsh(brute_partial_transpose(rho, 4, [0, 1]))
    expected = -vals[vals < 0].sum()
    value = negativity(rho, [0, 1], 4)
    assert value == pytest.approx(expected, abs=1e-12)
    assert value > 0
    for subset in ([0], [2], [0, 2], [1, 2, 3]):
        assert negativity(rho, subset, 4) > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2 ** 16), st.data())
def test_partial_transpose_matches_brute_force(n, seed, data):
    subset = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n - 1, unique=True))
    rho = random_density(2 ** n, np.random.default_rng(seed))
    assert np.allclose(partial_transpose(rho, n, subset), brute_partial_transpose(rho, n, subset))


@pytest.mark.parametrize("subset", [[], [0, 1], [2], [-1]])
def test_negativity_rejects_bad_bipartitions(subset):
    with pytest.raises(ParameterError):
        negativity(np.eye(4) / 4, subset, 2)


def test_negativity_capacity():
    with pytest.raises(CapacityError):
        negativity(np.eye(2 ** 9) / 2 ** 9, [0], 9)


def test_clipped_eigenvalues():
    rho = np.diag([1.0 + 5e-9, -5e-9])
    assert np.all(lindblad.clipped_eigenvalues(rho) >= 0)
    from superradiance.errors import NumericalQualityError
    with pytest.raises(NumericalQualityError):
        lindblad.clipped_eigenvalues(np.diag([1.1, -0.1]))
