import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_lindblad_reference
from wgdelay import markov
from wgdelay.collision import dicke_vector
from wgdelay.errors import InputError, IntegrationError
from wgdelay.observables import excitation_number_from_rho, instantaneous_rate, logarithmic_negativity


def random_rho(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@given(st.integers(1, 4), st.floats(0.0, 2 * math.pi), st.integers(0, 2**31 - 1))
def test_jump_form_equals_double_sum(n, k0d, seed):
    spec = markov.build_spec(n, 1.0, k0d)
    rho = random_rho(np.random.default_rng(seed), 2**n)
    assert np.allclose(markov.lindblad_rhs(spec, rho), markov.lindblad_rhs_double_sum(spec, rho), atol=1e-12)


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_generator_is_trace_preserving_and_hermitian(n, seed):
    spec = markov.build_spec(n, 0.7, 1.9)
    rho = random_rho(np.random.default_rng(seed), 2**n)
    d = markov.lindblad_rhs(spec, rho)
    assert abs(np.trace(d)) < 1e-12
    assert np.allclose(d, d.conj().T)


def test_kossakowski_is_positive_semidefinite():
    for k0d in (0.3, math.pi / 2, 2 * math.pi):
        assert np.linalg.eigvalsh(markov.kossakowski_matrix(5, 1.0, k0d))[0] > -1e-12


def test_kossakowski_spectrum():
    # mirror spacing: all-ones matrix, a single nonzero eigenvalue
    assert np.allclose(np.linalg.eigvalsh(markov.kossakowski_matrix(4, 1.0, 2 * math.pi)), [0, 0, 0, 2])
    # quarter-wavelength pair: two nonzero eigenvalues
    assert np.allclose(np.linalg.eigvalsh(markov.kossakowski_matrix(2, 1.0, math.pi / 2)), [0.5, 0.5])


def test_mirror_configuration_equals_dicke_mode():
    general = markov.build_spec(3, 1.0, 2 * math.pi)
    dicke = markov.build_spec(3, 1.0, mode="dicke")
    rho = random_rho(np.random.default_rng(0), 8)
    assert np.allclose(markov.lindblad_rhs(general, rho), markov.lindblad_rhs(dicke, rho), atol=1e-12)


def test_single_emitter_decays_exponentially():
    t = np.linspace(0, 5, 51)
    traj = markov.evolve(markov.build_spec(1), markov.all_excited(1), t)
    assert np.max(np.abs(traj[:, 1, 1].real - np.exp(-t))) < 1e-6


def test_matches_liouvillian_exponential():
    t = np.array([0.0, 0.25, 0.5, 1.0, 2.0])
    traj = markov.evolve(markov.build_spec(3, mode="dicke"), markov.all_excited(3), t)
    got = [excitation_number_from_rho(r) for r in traj]
    assert np.allclose(got, dense_lindblad_reference(3, t), atol=1e-7)


def test_dicke_state_initial_rate():
    t = np.linspace(0, 0.05, 11)
    ref = dicke_vector(4, 2)
    traj = markov.evolve(markov.build_spec(4, mode="dicke"), markov.pure(ref), t)
    recs = markov.dicke_observables(traj, t, ref)
    assert abs(recs[0].survival_rate - 6.0) < 0.18
    assert recs[0].survival == pytest.approx(1.0)


def test_all_excited_markov_decay_has_no_emitter_entanglement():
    t = np.linspace(0, 6, 61)
    traj = markov.evolve(markov.build_spec(4, mode="dicke"), markov.all_excited(4), t)
    assert max(logarithmic_negativity(r) for r in traj) <= 1e-9
    rate = instantaneous_rate(t, [excitation_number_from_rho(r) for r in traj])
    assert abs(rate[0] - 1.0) < 0.1


def test_evolve_validates_input():
    spec = markov.build_spec(2)
    with pytest.raises(InputError):
        markov.evolve(spec, np.eye(3), [0, 1])
    with pytest.raises(InputError):
        markov.evolve(spec, np.diag([2.0, 0, 0, -1.0]), [0, 1])
    with pytest.raises(InputError):
        markov.evolve(spec, markov.all_excited(2), [1, 0])
    with pytest.raises(IntegrationError):
        markov.evolve(spec, markov.all_excited(2), [0, 100.0], max_substeps=10)
    with pytest.raises(InputError):
        markov.build_spec(0)
