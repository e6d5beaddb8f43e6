"""Macro-state entropies of a pure state and their long-time behaviour.

``k`` is Boltzmann's constant in the chosen units (default 1, natural units),
``log`` is natural, and ``0 log 0 = 0`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import _require_resonance_free, default_horizon, macro_probabilities, macro_trajectory, time_grid
from .errors import InvalidDensityError
from .rng import as_generator

__all__ = [
    "entropy_S",
    "entropy_from_probabilities",
    "entropy_vN",
    "entropy_qB",
    "entropy_approx",
    "expr2_prediction",
    "EntropyTrajectory",
    "h_theorem_trajectory",
    "superposition_state",
    "MeasurementSummary",
    "superposition_measurement_entropy",
]

K_DEFAULT = 1.0
NEGATIVE_EIGENVALUE_TOL = 1e-8


def _xlogy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x * np.log(np.where(x > 0, y, 1.0))
    return np.where(x > 0, out, 0.0)


def entropy_from_probabilities(p, dims, k=K_DEFAULT):
    """``-k sum_nu p_nu log(p_nu / d_nu)``; ``p`` is (n,) or (n, m)."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    d = np.asarray(dims, dtype=float)
    if p.ndim > 1:
        d = d.reshape((-1,) + (1,) * (p.ndim - 1))
    return -k * np.sum(_xlogy(p, p / d), axis=0)


def entropy_S(psi, decomp, k=K_DEFAULT):
    """Entropy of a wave function relative to the macro-decomposition."""
    return float(entropy_from_probabilities(macro_probabilities(psi, decomp), decomp.dims, k))


def entropy_vN(rho, k=K_DEFAULT):
    """``-k tr(rho log rho)`` from the eigenvalues of ``rho``.

    Raises
    ------
    InvalidDensityError
        If an eigenvalue is below -1e-8.
    """
    rho = np.asarray(rho)
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    if lam.min() < -NEGATIVE_EIGENVALUE_TOL:
        raise InvalidDensityError(f"eigenvalue {lam.min():.3g} is negative")
    lam = np.clip(lam, 0.0, None)
    return float(-k * np.sum(_xlogy(lam, lam)))


def entropy_qB(nu, decomp, k=K_DEFAULT):
    """Quantum Boltzmann entropy ``k log d_nu`` of macro-state ``nu``."""
    if not 0 <= nu < decomp.n:
        raise IndexError(f"macro index {nu} out of range 0..{decomp.n - 1}")
    return float(k * np.log(decomp.dims[nu]))


def entropy_approx(psi, decomp, k=K_DEFAULT):
    """Probability-weighted Boltzmann entropy ``k sum_nu p_nu log d_nu``.

    Returns ``(value, mixing)`` where ``mixing = -k sum p log p >= 0`` is the
    term the approximation drops, so ``entropy_S == value + mixing``.
    """
    p = np.clip(macro_probabilities(psi, decomp), 0.0, 1.0)
    value = float(k * np.dot(p, np.log(np.asarray(decomp.dims, float))))
    mixing = float(-k * np.sum(_xlogy(p, p)))
    return value, mixing


def expr2_prediction(dims, k=K_DEFAULT):
    """Typical long-run entropy ``k sum_nu (d_nu/D) log d_nu``."""
    d = np.asarray(dims, dtype=float)
    return float(k * np.sum(d / d.sum() * np.log(d)))


@dataclass
class EntropyTrajectory:
    times: np.ndarray
    S_values: np.ndarray
    S_max: float
    theta: float
    k: float
    expr2: float

    @property
    def fraction_near_max(self):
        return float(np.mean(self.S_values >= self.theta * self.S_max))

    @property
    def mean_S(self):
        return float(np.mean(self.S_values))

    CSV_HEADER = ("t", "S", "S_over_klogD")

    def rows(self):
        ratio = self.S_values / self.S_max if self.S_max > 0 else np.ones_like(self.S_values)
        return list(zip(self.times.tolist(), self.S_values.tolist(), ratio.tolist()))


def h_theorem_trajectory(psi0, decomp, spectrum, T=None, samples=10_000, theta=0.9, k=K_DEFAULT):
    """Entropy along the orbit on a uniform grid over [0, T).

    Only the fraction of times near ``k log D`` is summarised; the trajectory
    is not expected to increase monotonically.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    spectrum = _require_resonance_free(spectrum)
    T = default_horizon(spectrum) if T is None else float(T)
    times = time_grid(T, samples)
    p = macro_trajectory(psi0, decomp, spectrum, times)
    S = entropy_from_probabilities(p, decomp.dims, k)
    return EntropyTrajectory(times, S, float(k * np.log(decomp.D)), theta, k, expr2_prediction(decomp.dims, k))


def superposition_state(amplitudes, decomp, rng=None):
    """``sum_nu c_nu psi_nu`` with unit ``psi_nu`` in macro-space ``nu``.

    Each ``psi_nu`` is the first basis vector of its block, or a uniformly
    random unit vector inside the block when ``rng`` is given.
    """
    c = np.asarray(amplitudes, dtype=complex)
    if c.size != decomp.n:
        raise ValueError("need one amplitude per macro-space")
    c = c / np.linalg.norm(c)
    psi = np.zeros(decomp.D, dtype=complex)
    gen = None if rng is None else as_generator(rng)
    for nu in range(decomp.n):
        block = decomp.block(nu)
        if gen is None:
            v = block[:, 0]
        else:
            g = gen.standard_normal(block.shape[1]) + 1j * gen.standard_normal(block.shape[1])
            v = block @ (g / np.linalg.norm(g))
        psi += c[nu] * v
    return psi


@dataclass
class MeasurementSummary:
    """Entropy before and after a collapsing macro-measurement."""

    probabilities: np.ndarray
    S_psi: float
    collapsed_entropies: np.ndarray
    decrease_probability: float
    expected_collapsed_entropy: float
    empirical_decrease_fraction: float
    empirical_mean_entropy: float
    trials: int


def superposition_measurement_entropy(psi, decomp, rng=None, trials=10_000, k=K_DEFAULT):
    """Simulate measuring all macro-observables on a superposition.

    Outcome ``nu`` occurs with probability ``p_nu`` and leaves entropy
    ``k log d_nu``. The exact probability that this is below ``S(psi)``, and
    the exact mean ``sum p_nu k log d_nu``, are reported next to their
    Monte Carlo estimates.
    """
    p = np.clip(macro_probabilities(psi, decomp), 0.0, None)
    p = p / p.sum()
    S = entropy_S(psi, decomp, k)
    collapsed = k * np.log(np.asarray(decomp.dims, float))
    # strict decrease, ignoring round-off when psi already lies in one block
    lower = collapsed < S - 1e-12 * max(1.0, abs(S))
    rng = as_generator(rng)
    outcomes = rng.choice(decomp.n, size=trials, p=p)
    return MeasurementSummary(
        probabilities=p,
        S_psi=S,
        collapsed_entropies=collapsed,
        decrease_probability=float(p[lower].sum()),
        expected_collapsed_entropy=float(np.dot(p, collapsed)),
        empirical_decrease_fraction=float(lower[outcomes].mean()),
        empirical_mean_entropy=float(collapsed[outcomes].mean()),
        trials=int(trials),
    )
