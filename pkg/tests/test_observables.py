import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import FockOracle
from wgdelay import observables as ob
from wgdelay.collision import ModelParams, Simulation, dicke_vector, prepare_all_excited, prepare_product
from wgdelay.errors import ConfigurationError, InputError, UnsupportedSizeError
from wgdelay.mps import SiteKind, emitter_density_matrix
from wgdelay.tensor_core import TruncationPolicy


def pure(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def basis(n, *excited):
    v = np.zeros(2**n)
    v[sum(1 << (n - e) for e in excited)] = 1
    return v


def random_rho(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


# -- emitter quantities ---------------------------------------------------------------


def test_excitation_number_and_sectors_of_simple_states():
    assert ob.excitation_number_from_rho(pure(basis(4, 1, 2, 3, 4))) == pytest.approx(4)
    assert ob.excitation_number_from_rho(pure(dicke_vector(4, 2))) == pytest.approx(2)
    assert ob.sector_populations(pure(basis(4, 1, 2, 3, 4))) == pytest.approx([0, 0, 0, 0, 1])
    assert ob.sector_populations(pure(dicke_vector(4, 2))) == pytest.approx([0, 0, 1, 0, 0])


@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_sector_populations_sum_to_one(n, seed):
    p = ob.sector_populations(random_rho(np.random.default_rng(seed), 2**n))
    assert abs(sum(p) - 1) < 1e-10 and min(p) >= -1e-12


def test_singlet_states_are_orthonormal_spin_singlets():
    s = ob.singlet_states()
    assert np.allclose(s @ s.conj().T, np.eye(2))
    lower = sum(np.kron(np.kron(np.eye(2**i), [[0, 1], [0, 0]]), np.eye(2 ** (3 - i))) for i in range(4))
    for v in s:
        assert np.allclose(lower @ v, 0)
        assert np.allclose(lower.T @ v, 0)
    assert ob.singlet_projections(pure(s[0])) == pytest.approx((1, 0))
    assert ob.singlet_projections(pure(basis(4, 1, 2, 3, 4))) == pytest.approx((0, 0))
    with pytest.raises(UnsupportedSizeError):
        ob.singlet_projections(np.eye(4) / 4)


def test_entropy_values():
    assert ob.emitter_field_entropy(pure(basis(3, 1))) == pytest.approx(0, abs=1e-12)
    mixed = np.kron(np.eye(2) / 2, pure(basis(2, 1)))
    assert ob.emitter_field_entropy(mixed) == pytest.approx(1)


def test_negativity_values():
    bell = np.zeros(4)
    bell[[1, 2]] = 1
    assert ob.logarithmic_negativity(pure(bell)) == pytest.approx(1)
    prod = np.kron(pure([1, 1]), pure([1, 1j]))
    assert ob.logarithmic_negativity(prod) == pytest.approx(0, abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_negativity_vanishes_for_product_states(seed):
    rng = np.random.default_rng(seed)
    rho = np.kron(random_rho(rng, 4), random_rho(rng, 4))
    assert ob.logarithmic_negativity(rho) <= 1e-9


def test_survival_requires_definite_excitation_number():
    ref = dicke_vector(4, 2)
    assert ob.survival_probability(pure(ref), ref) == pytest.approx(1)
    with pytest.raises(InputError):
        ob.survival_probability(pure(ref), ref + basis(4, 1))


def test_rate_of_exponential_and_guard():
    t = np.linspace(0, 2, 201)
    r = ob.instantaneous_rate(t, np.exp(-1.5 * t))
    assert np.allclose(r[1:-1], 1.5, atol=1e-4)
    r = ob.instantaneous_rate(t, np.where(t > 1, 0.0, 1.0))
    assert np.all(np.isnan(r[t > 1.02]))
    with pytest.raises(InputError):
        ob.instantaneous_rate([0, 1], [1, 1])


# -- field quantities -----------------------------------------------------------------


def sim_with_bin(vec, n_max=3):
    """N = 2, ell = 1 at step 0 with emitters in the ground state and bin -1 set to ``vec``."""
    p = ModelParams(n_emitters=2, ell=1, tau=0.01, n_max=n_max, t_max=0.02)
    state = prepare_product(p, [np.array([1, 0, 0, 0])])
    pos = state.kinds.index(SiteKind.photon_bin(-1))
    state.tensors[pos] = np.asarray(vec, dtype=complex).reshape(1, -1, 1)
    state.assign_charges(state.charges)
    return Simulation(p, state)


def fock_vec(r, l, n_max=3):
    v = np.zeros((n_max + 1) ** 2)
    v[r * (n_max + 1) + l] = 1
    return v


def test_vacuum_profiles_are_zero():
    sim = Simulation(ModelParams(n_emitters=2, ell=2, tau=0.02, n_max=3, t_max=0.1))
    assert np.all(ob.field_energy_density(sim).total == 0)
    assert np.all(ob.autocorrelation(sim, 2).total == 0)


def test_two_photon_fock_bin():
    sim = sim_with_bin(fock_vec(2, 0))
    dens = ob.field_energy_density(sim)
    g2 = ob.autocorrelation(sim, 2)
    i = int(np.flatnonzero(dens.m == 1)[0])  # right mover of bin -1 at age 1
    assert dens.right[i] == pytest.approx(2)
    assert g2.right[i] == pytest.approx(2)
    assert ob.autocorrelation(sim, 3).right[i] == pytest.approx(0)
    assert ob.normalized_autocorrelation(g2, dens, 2).right[i] == pytest.approx(0.5)


def test_single_photon_is_antibunched():
    sim = sim_with_bin(fock_vec(0, 1))
    dens = ob.field_energy_density(sim)
    g = ob.normalized_autocorrelation(ob.autocorrelation(sim, 2), dens, 2)
    i = int(np.flatnonzero(dens.m == 0)[0])  # left mover of bin -1 sits on emitter 1
    assert dens.left[i] == pytest.approx(1)
    assert g.left[i] == pytest.approx(0)
    assert np.all(np.isnan(g.left[dens.left < ob.G_FLOOR]))


def test_coherent_bin_has_poissonian_g2():
    alpha = 0.05
    c = np.array([alpha**k / math.sqrt(math.factorial(k)) for k in range(4)])
    c = c / np.linalg.norm(c)
    vec = np.zeros(16, dtype=complex)
    vec[[k * 4 for k in range(4)]] = c  # right mover only
    sim = sim_with_bin(vec)
    dens = ob.field_energy_density(sim)
    g = ob.normalized_autocorrelation(ob.autocorrelation(sim, 2), dens, 2)
    i = int(np.flatnonzero(dens.m == 1)[0])
    k = np.arange(4)
    oracle = np.sum(k * (k - 1) * c**2) / np.sum(k * c**2) ** 2
    assert g.right[i] == pytest.approx(oracle, rel=1e-12)
    assert g.right[i] == pytest.approx(1, abs=1e-3)


def test_correlation_order_needs_photon_levels():
    sim = Simulation(ModelParams(n_emitters=2, ell=1, tau=0.01, t_max=0.02))
    with pytest.raises(ConfigurationError, match="n_max >= 2"):
        ob.autocorrelation(sim, 2)


def test_first_order_correlation_is_the_density():
    p = ModelParams(n_emitters=2, ell=2, tau=0.04, n_max=3, t_max=0.4, policy=TruncationPolicy.exact())
    sim = Simulation(p)
    for _ in range(8):
        sim.advance()
    dens = ob.field_energy_density(sim)
    assert np.allclose(ob.autocorrelation(sim, 1).total, dens.total, atol=1e-10)


def test_conservation_and_profile_length():
    p = ModelParams(n_emitters=4, ell=2, tau=0.04, t_max=0.4, policy=TruncationPolicy(16, 1e-12))
    sim = Simulation(p)
    while not sim.done:
        sim.advance()
        prof = ob.field_energy_density(sim)
        assert prof.m.size == 2 * sim.n + 3 * p.ell + 1
        assert np.all(prof.total >= -1e-9)
        total = ob.excitation_number(sim) + prof.total.sum()
        assert abs(total - 4) <= 1e-6 + 8 * sim.state.cumulative_discarded


def test_future_snapshot_marks_live_bins_unknown():
    p = ModelParams(n_emitters=2, ell=2, tau=0.04, t_max=0.4)
    sim = Simulation(p)
    for _ in range(6):
        sim.advance()
    prof = ob.field_energy_density(sim, at_step=9)
    known = np.isfinite(prof.total)
    assert not known.all() and known.any()
    with pytest.raises(InputError):
        ob.field_energy_density(sim, at_step=3)


@pytest.mark.parametrize("ell", [1, 2])
def test_field_and_entropies_match_oracle(ell):
    p = ModelParams(n_emitters=2, ell=ell, tau=0.02 * ell, t_max=0.02 * 14, phi=0.9, policy=TruncationPolicy.exact())
    sim = Simulation(p)
    o = FockOracle(2, ell, p.n_steps, p.gamma * p.dt, phi=0.9)
    o.set_emitters(sim.initial_emitters)
    while not sim.done:
        sim.advance()
        o.advance()
        prof = ob.field_energy_density(sim)
        for k in range(o.k_lo, sim.n):
            age = sim.n - k
            ir = int(np.flatnonzero(prof.m == age)[0])
            il = int(np.flatnonzero(prof.m == ell - age)[0])
            assert prof.right[ir] == pytest.approx(o.mode_moment(o.mode_of[("R", k)], 1), abs=1e-10)
            assert prof.left[il] == pytest.approx(o.mode_moment(o.mode_of[("L", k)], 1), abs=1e-10)
        s_ref = o.bipartite_entropy(o.trapping_modes(sim.n))
        assert ob.in_out_entropy(sim) == pytest.approx(s_ref, abs=1e-9)
        assert ob.trapping_region_entropy(sim) == pytest.approx(s_ref, abs=1e-9)


def test_observer_records_and_rates():
    p = ModelParams(n_emitters=4, ell=2, tau=0.04, t_max=0.4, policy=TruncationPolicy(32, 1e-12))
    obs = ob.Observer()
    sim = Simulation(p)
    obs(sim)
    while not sim.done:
        sim.advance()
        obs(sim)
    recs = obs.finalize()
    assert len(recs) == p.n_steps + 1
    assert recs[0].survival == pytest.approx(1) and recs[0].singlets == pytest.approx((0, 0))
    assert all(r.rate is not None for r in recs)
    assert recs[0].rate == pytest.approx(1, rel=0.05)
    row = recs[3].row(4)
    assert len(row) == len(ob.csv_columns(4))
