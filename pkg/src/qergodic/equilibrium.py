"""Thermal equilibrium of individual states, equilibration and thermalization.

Observables are Hermitian matrices written in the energy eigenbasis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    CHUNK,
    _require_resonance_free,
    default_horizon,
    evolve_many,
    macro_probabilities,
    macro_trajectory,
    time_averaged_density,
    time_grid,
)
from .errors import DegenerateInputError, DimensionMismatchError
from .sampling import random_decomposition

__all__ = [
    "ObservableSet",
    "ObservableVerdict",
    "build_equilibrium_decomposition",
    "is_thermal_equilibrium",
    "equilibrium_time_fraction",
    "equilibration_check",
    "thermalization_check",
    "macro_equivalence",
]

HERMITIAN_TOL = 1e-10
GOOD_FRACTION = 0.9


@dataclass
class ObservableSet:
    """Labelled Hermitian observables on the shell."""

    labels: list
    matrices: list = field(repr=False)

    def __post_init__(self):
        if len(self.labels) != len(self.matrices):
            raise ValueError("one label per observable")
        mats = [np.asarray(a, dtype=complex) for a in self.matrices]
        for label, a in zip(self.labels, mats):
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError(f"observable {label!r} is not square")
            if float(np.max(np.abs(a - a.conj().T))) > HERMITIAN_TOL:
                raise ValueError(f"observable {label!r} is not Hermitian")
        self.matrices = mats

    @classmethod
    def from_dict(cls, observables):
        return cls(list(observables), list(observables.values()))

    @classmethod
    def macro_projectors(cls, decomp):
        return cls([f"P_{nu}" for nu in range(decomp.n)], [decomp.projector(nu) for nu in range(decomp.n)])

    def __len__(self):
        return len(self.labels)


def build_equilibrium_decomposition(D, eq_fraction, n_small, rng=None):
    """Haar decomposition with one dominant equilibrium macro-space (index 0).

    ``d_eq = round(eq_fraction * D)``; the remaining dimensions are split
    evenly over ``n_small`` blocks. When ``d_eq == D`` the result is a single
    block.
    """
    if not 0 < eq_fraction <= 1:
        raise ValueError("eq_fraction must lie in (0, 1]")
    d_eq = int(round(eq_fraction * D))
    if d_eq < 1 or d_eq > D:
        raise DegenerateInputError(f"d_eq = {d_eq} is infeasible for D = {D}")
    rest = D - d_eq
    if rest == 0:
        dims = [D]
    else:
        if n_small < 1 or rest % n_small:
            raise DegenerateInputError(f"{rest} remaining dimensions do not split into {n_small} blocks")
        dims = [d_eq] + [rest // n_small] * n_small
    return random_decomposition(dims, rng, eq_index=0)


def _eq_index(decomp):
    if decomp.eq_index is None:
        raise ValueError("decomposition has no equilibrium macro-space (eq_index unset)")
    return decomp.eq_index


def is_thermal_equilibrium(psi, decomp, threshold=0.9):
    """``<psi|P_eq|psi> >= threshold``."""
    return bool(macro_probabilities(psi, decomp)[_eq_index(decomp)] >= threshold)


def equilibrium_time_fraction(psi0, decomp, spectrum, threshold=0.9, T=None, samples=1000):
    """Fraction of grid times at which the evolved state is in thermal equilibrium."""
    eq = _eq_index(decomp)
    T = default_horizon(spectrum) if T is None else float(T)
    p = macro_trajectory(psi0, decomp, spectrum, time_grid(T, samples))
    return float(np.mean(p[eq] >= threshold))


@dataclass
class ObservableVerdict:
    label: str
    reference: float
    fraction_good_times: float
    deviation_scale: float
    mc_scale: float
    verdict: bool

    CSV_HEADER = ("label", "fraction_good_times", "deviation_scale", "verdict")

    def row(self):
        return (self.label, self.fraction_good_times, self.deviation_scale, self.verdict)


def _spread(a):
    lam = np.linalg.eigvalsh(a)
    return float(lam[-1] - lam[0])


def _expectations(psi0, a, spectrum, times):
    out = np.empty(times.size)
    for s in range(0, times.size, CHUNK):
        psi = evolve_many(psi0, spectrum, times[s:s + CHUNK])
        out[s:s + CHUNK] = np.real(np.sum(psi.conj() * (a @ psi), axis=0))
    return out


def _check_against(psi0, observables, spectrum, references, epsilon_rel, T, samples, good_fraction):
    T = default_horizon(spectrum) if T is None else float(T)
    times = time_grid(T, samples)
    D = np.asarray(psi0).size
    verdicts = []
    for label, a, ref in zip(observables.labels, observables.matrices, references):
        if a.shape != (D, D):
            raise DimensionMismatchError(f"observable {label!r} has shape {a.shape}, expected {(D, D)}")
        spread = _spread(a)
        dev = np.abs(_expectations(psi0, a, spectrum, times) - ref)
        # spread == 0 means A is a multiple of I; any deviation is round-off
        tol = epsilon_rel * spread if spread > 0 else 1e-12
        frac = float(np.mean(dev <= tol))
        mc_scale = float(np.sqrt(np.real(np.trace(a @ a)) / D))
        verdicts.append(ObservableVerdict(label, float(ref), frac, spread, mc_scale, frac >= good_fraction))
    return verdicts


def equilibration_check(psi0, observables, spectrum, epsilon_rel=0.1, T=None, samples=1000,
                        good_fraction=GOOD_FRACTION):
    """Per observable: does ``<psi_t|A|psi_t>`` stay near ``tr(omega A)`` most of the time?

    ``omega`` is the time-averaged density matrix. "Near" means within
    ``epsilon_rel`` times the spread (max minus min eigenvalue) of ``A``; the
    verdict requires a good-time fraction of at least ``good_fraction``.
    """
    spectrum = _require_resonance_free(spectrum)
    omega = time_averaged_density(psi0, spectrum)
    refs = [float(np.real(np.trace(omega @ a))) for a in observables.matrices]
    return _check_against(psi0, observables, spectrum, refs, epsilon_rel, T, samples, good_fraction)


def thermalization_check(psi0, observables, spectrum, epsilon_rel=0.1, T=None, samples=1000,
                         good_fraction=GOOD_FRACTION):
    """As :func:`equilibration_check` but against the micro-canonical value ``tr(A) / D``."""
    spectrum = _require_resonance_free(spectrum)
    refs = [float(np.real(np.trace(a))) / a.shape[0] for a in observables.matrices]
    return _check_against(psi0, observables, spectrum, refs, epsilon_rel, T, samples, good_fraction)


def macro_equivalence(rho, rho_prime, decomp, tol_rel=0.2):
    """``|tr(rho P_nu) - tr(rho' P_nu)| <= tol_rel * d_nu / D`` for every nu."""
    rho = np.asarray(rho)
    rho_prime = np.asarray(rho_prime)
    if rho.shape != rho_prime.shape or rho.shape != (decomp.D, decomp.D):
        raise DimensionMismatchError("density matrices and decomposition must share dimension D")
    b = decomp.basis
    # tr(rho P_nu) = sum over block columns of <b_k|rho|b_k>
    diff = np.real(np.sum(b.conj() * ((rho - rho_prime) @ b), axis=0))
    per_block = np.add.reduceat(diff, decomp.offsets[:-1])
    return bool(np.all(np.abs(per_block) <= tol_rel * decomp.fractions()))
