import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import basis_state, random_triple
from qergodic import rng as rngmod
from qergodic.dynamics import evolve_many, macro_trajectory, time_averaged_density, time_grid, time_stats_closed_form
from qergodic.equilibrium import (
    ObservableSet,
    build_equilibrium_decomposition,
    equilibration_check,
    equilibrium_time_fraction,
    is_thermal_equilibrium,
    macro_equivalence,
    thermalization_check,
)
from qergodic.errors import DegenerateInputError, DimensionMismatchError
from qergodic.sampling import MacroDecomposition, aligned_decomposition, random_decomposition, uniform_sphere_states
from qergodic.spectra import Spectrum, sample_nonresonant_spectrum
from qergodic.typicality import normality_statistics

PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


# -- decompositions -------------------------------------------------------------


def test_build_dims():
    dec = build_equilibrium_decomposition(100, 0.99, 1, rngmod.stream(0))
    assert dec.dims == (99, 1) and dec.eq_index == 0
    assert build_equilibrium_decomposition(10, 1.0, 3, rngmod.stream(0)).dims == (10,)


def test_build_many_small_blocks_valid():
    dec = build_equilibrium_decomposition(1000, 0.99, 10, rngmod.stream(1))
    assert dec.dims == (990,) + (1,) * 10
    assert dec.validate() == []


def test_build_infeasible():
    with pytest.raises(DegenerateInputError):
        build_equilibrium_decomposition(100, 0.9, 3, rngmod.stream(0))
    with pytest.raises(DegenerateInputError):
        build_equilibrium_decomposition(10, 0.01, 1, rngmod.stream(0))
    with pytest.raises(ValueError):
        build_equilibrium_decomposition(10, 0.0, 1, rngmod.stream(0))


def test_observable_set_rejects_non_hermitian():
    with pytest.raises(ValueError):
        ObservableSet(["A"], [np.array([[0, 1], [0, 0]])])
    obs = ObservableSet.from_dict({"Z": np.diag([1.0, -1.0])})
    assert len(obs) == 1 and obs.labels == ["Z"]


# -- equilibrium predicates ---------------------------------------------------------


def test_equilibrium_predicate_examples():
    dec = build_equilibrium_decomposition(50, 0.9, 1, rngmod.stream(2))
    assert is_thermal_equilibrium(dec.block_state(0, 3), dec)
    assert not is_thermal_equilibrium(dec.block_state(1, 0), dec)


def test_equilibrium_predicate_needs_eq_index():
    with pytest.raises(ValueError):
        is_thermal_equilibrium(PLUS, aligned_decomposition([1, 1]))


def test_most_random_states_in_equilibrium():
    # Markov: P(<P_eq> < 0.9) = P(1 - <P_eq> > 0.1) <= 0.01 / 0.1
    dec = build_equilibrium_decomposition(100, 0.99, 1, rngmod.stream(3))
    states = uniform_sphere_states(100, 10_000, rngmod.stream(4))
    p_eq = np.abs(dec.block(0).conj().T @ states) ** 2
    frac = float(np.mean(p_eq.sum(axis=0) >= 0.9))
    assert frac >= 0.9
    assert all(is_thermal_equilibrium(states[:, i], dec) == (p_eq[:, i].sum() >= 0.9) for i in range(50))


def test_time_fraction_examples():
    spec = sample_nonresonant_spectrum(8, rng=rngmod.stream(5))
    whole = build_equilibrium_decomposition(8, 1.0, 1, rngmod.stream(6))
    assert equilibrium_time_fraction(basis_state(8, 2), whole, spec, samples=50) == 1.0
    aligned = MacroDecomposition((6, 2), np.eye(8, dtype=complex), eq_index=0)
    assert equilibrium_time_fraction(basis_state(8, 7), aligned, spec, samples=50) == 0.0


def test_time_fraction_haar_block_states():
    spec, _, psi = random_triple(200, [198, 2], seed=7)
    dec = build_equilibrium_decomposition(200, 0.99, 1, rngmod.stream(7, 0, rngmod.DECOMPOSITION))
    for s in (psi, dec.block_state(1, 0), dec.block_state(1, 1)):
        assert equilibrium_time_fraction(s, dec, spec, samples=500) >= 0.9


def test_normality_implies_equilibrium_pointwise():
    # |p_eq - d_eq/D| < eps sqrt(d_eq/(nD)) and d_eq/D >= threshold + that bound
    D, dims, eps, threshold = 200, [198, 2], 0.1, 0.9
    assert 198 / 200 >= threshold + eps * np.sqrt(198 / (2 * D))
    spec, _, psi = random_triple(D, dims, seed=8)
    dec = build_equilibrium_decomposition(D, 0.99, 1, rngmod.stream(9))
    times = time_grid(1e4, 300)
    states = evolve_many(dec.block_state(1, 0), spec, times)
    flags = normality_statistics(macro_trajectory(dec.block_state(1, 0), dec, spec, times), dims, eps)["vNdef"]
    assert flags.any()
    for i in np.flatnonzero(flags):
        assert is_thermal_equilibrium(states[:, i], dec, threshold)


# -- equilibration and thermalization ---------------------------------------------


def test_identity_observable_always_fine():
    spec, _, psi = random_triple(6, [6], seed=10)
    obs = ObservableSet(["I"], [np.eye(6)])
    for check in (equilibration_check, thermalization_check):
        v = check(psi, obs, spec, samples=100)[0]
        assert v.fraction_good_times == 1.0 and v.verdict and v.deviation_scale == 0.0


def test_equilibration_reference_is_time_mean():
    spec, dec, psi = random_triple(12, [3, 4, 5], seed=11)
    obs = ObservableSet.macro_projectors(dec)
    verdicts = equilibration_check(psi, obs, spec, samples=50)
    mean = time_stats_closed_form(psi, dec, spec).time_mean
    assert np.allclose([v.reference for v in verdicts], mean, atol=1e-10)
    assert [v.label for v in verdicts] == ["P_0", "P_1", "P_2"]


def test_fourier_projector_fails_to_equilibrate():
    spec = Spectrum(np.array([0.0, 1.0]))
    P1 = np.full((2, 2), 0.5, dtype=complex)
    v = equilibration_check(PLUS, ObservableSet(["P1"], [P1]), spec, epsilon_rel=0.1, T=1e3, samples=10_000)[0]
    # <P1>(t) = (1 + cos t)/2: within 0.1 of 1/2 only while |cos t| <= 0.2
    assert abs(v.fraction_good_times - 2 * np.arcsin(0.2) / np.pi) < 0.01
    assert not v.verdict


def test_eigenstate_projector_fails_to_thermalize():
    D = 5
    spec = sample_nonresonant_spectrum(D, rng=rngmod.stream(12))
    A = np.zeros((D, D))
    A[0, 0] = 1.0
    obs = ObservableSet(["phi1"], [A])
    therm = thermalization_check(basis_state(D, 0), obs, spec, samples=100)[0]
    equi = equilibration_check(basis_state(D, 0), obs, spec, samples=100)[0]
    assert therm.reference == pytest.approx(1 / D) and not therm.verdict
    assert equi.verdict


def test_macro_algebra_thermalizes_under_haar():
    spec, dec, psi = random_triple(400, [200, 200], seed=3)
    obs = ObservableSet.macro_projectors(dec)
    for s in (psi, dec.block_state(0), dec.block_state(1, 7)):
        assert all(v.verdict for v in thermalization_check(s, obs, spec, samples=500))


def test_observable_dimension_checked():
    spec, _, psi = random_triple(4, [4], seed=0)
    with pytest.raises(DimensionMismatchError):
        thermalization_check(psi, ObservableSet(["I3"], [np.eye(3)]), spec)


def test_verdict_row_layout():
    spec, dec, psi = random_triple(4, [2, 2], seed=0)
    v = thermalization_check(psi, ObservableSet.macro_projectors(dec), spec, samples=10)[0]
    assert len(v.row()) == len(v.CSV_HEADER)


# -- macroscopic equivalence ----------------------------------------------------------


def test_macro_equivalence_examples():
    D = 12
    dec = random_decomposition([3, 9], rngmod.stream(13))
    mc = np.eye(D) / D
    psi = dec.block_state(0, 1)
    pure = np.outer(psi, psi.conj())
    assert macro_equivalence(pure, pure, dec)
    # block 0: |1 - 3/12| = 0.75 > tol * 0.25 unless tol >= D/d_1 - 1 = 3
    assert not macro_equivalence(pure, mc, dec, tol_rel=2.9)
    assert macro_equivalence(pure, mc, dec, tol_rel=3.0 + 1e-9)
    with pytest.raises(DimensionMismatchError):
        macro_equivalence(pure, np.eye(3) / 3, dec)


def test_time_average_looks_microcanonical():
    spec, dec, psi = random_triple(400, [100] * 4, seed=14)
    assert macro_equivalence(time_averaged_density(psi, spec), np.eye(400) / 400, dec, 0.2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 2.0))
def test_macro_equivalence_reflexive_symmetric(seed, tol):
    g = rngmod.stream(seed)
    dec = random_decomposition([2, 3, 5], g)
    a, b = uniform_sphere_states(10, 2, g).T
    r1, r2 = np.outer(a, a.conj()), np.outer(b, b.conj())
    assert macro_equivalence(r1, r1, dec, tol)
    assert macro_equivalence(r1, r2, dec, tol) == macro_equivalence(r2, r1, dec, tol)
