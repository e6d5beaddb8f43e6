"""Schroedinger evolution in the energy eigenbasis and its time averages.

The propagator is diagonal, ``c_a(t) = exp(-i E_a t) c_a(0)`` with hbar = 1,
so nothing here ever forms a matrix exponential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, PreconditionError
from .spectra import Spectrum, energies

__all__ = [
    "TimeStats",
    "evolve",
    "evolve_many",
    "macro_probabilities",
    "macro_trajectory",
    "macro_trajectories",
    "time_grid",
    "default_horizon",
    "time_averaged_density",
    "time_stats_closed_form",
    "time_stats_quadrature",
    "recurrence_search",
    "torus_invariant_check",
    "phase_average",
    "phase_average_bound",
    "check_density",
]

# columns of psi_t evaluated per batch; fixed so reductions never depend on scheduling
CHUNK = 4096
DENSITY_TOL = 1e-10


def _check_length(psi, e):
    if psi.shape[0] != e.size:
        raise DimensionMismatchError(f"state has {psi.shape[0]} amplitudes, spectrum has {e.size} levels")


def evolve(psi0, spectrum, t):
    """State at time ``t``."""
    e = energies(spectrum)
    psi0 = np.asarray(psi0, dtype=complex)
    _check_length(psi0, e)
    return np.exp(-1j * e * t) * psi0


def evolve_many(psi0, spectrum, times):
    """States at each of ``times`` as the columns of a (D, len(times)) array."""
    e = energies(spectrum)
    psi0 = np.asarray(psi0, dtype=complex)
    _check_length(psi0, e)
    times = np.asarray(times, dtype=float)
    return np.exp(-1j * np.outer(e, times)) * psi0[:, None]


def macro_probabilities(psi, decomp):
    """``||P_nu psi||^2`` for every macro-space.

    ``psi`` may be a single state (D,) giving shape (n,), or states as columns
    (D, m) giving shape (n, m).
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] != decomp.D:
        raise DimensionMismatchError(f"state dimension {psi.shape[0]} != D = {decomp.D}")
    amp = np.abs(decomp.basis.conj().T @ psi) ** 2
    return np.add.reduceat(amp, decomp.offsets[:-1], axis=0)


def time_grid(T, samples):
    """Left-endpoint uniform grid ``t_k = k T / samples`` on [0, T)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return np.arange(samples) * (float(T) / samples)


def default_horizon(spectrum, factor=100.0):
    """``factor / (min level gap)``; the stand-in for T -> infinity."""
    if isinstance(spectrum, Spectrum):
        gap = spectrum.min_level_gap()
    else:
        e = np.sort(energies(spectrum))
        gap = np.min(np.diff(e)) if e.size > 1 else np.inf
    if not np.isfinite(gap):
        return float(factor)
    if gap <= 0:
        raise PreconditionError("degenerate spectrum has no finite horizon")
    return float(factor / gap)


def macro_trajectory(psi0, decomp, spectrum, times):
    """``||P_nu psi_t||^2`` on ``times`` as an (n, len(times)) array."""
    times = np.asarray(times, dtype=float)
    out = np.empty((decomp.n, times.size))
    for s in range(0, times.size, CHUNK):
        out[:, s:s + CHUNK] = macro_probabilities(evolve_many(psi0, spectrum, times[s:s + CHUNK]), decomp)
    return out


def macro_trajectories(states, decomp, spectrum, times):
    """Macro probabilities of many initial states at many times.

    ``states`` holds initial states as columns (D, m). Returns (len(times), n, m).
    Cost is one D x D x m product per time point.
    """
    e = energies(spectrum)
    states = np.asarray(states, dtype=complex)
    _check_length(states, e)
    bh = decomp.basis.conj().T
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, decomp.n, states.shape[1]))
    for i, t in enumerate(times):
        amp = np.abs(bh @ (np.exp(-1j * e * t)[:, None] * states)) ** 2
        out[i] = np.add.reduceat(amp, decomp.offsets[:-1], axis=0)
    return out


def check_density(rho, tol=DENSITY_TOL):
    """List the density-matrix invariants that ``rho`` violates."""
    rho = np.asarray(rho)
    problems = []
    if float(np.max(np.abs(rho - rho.conj().T))) > tol:
        problems.append("not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        problems.append("trace != 1")
    if float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2))) < -tol:
        problems.append("negative eigenvalue")
    return problems


def time_averaged_density(psi0, spectrum):
    """Long-time average of ``|psi_t><psi_t|``: ``diag(|c_a|^2)``.

    Valid only for a non-degenerate spectrum, where every off-diagonal phase
    ``exp(-i (E_a - E_b) t)`` averages to zero.
    """
    e = energies(spectrum)
    psi0 = np.asarray(psi0, dtype=complex)
    _check_length(psi0, e)
    tol = spectrum.resonance_tolerance if isinstance(spectrum, Spectrum) else 0.0
    if e.size > 1 and np.min(np.diff(np.sort(e))) <= tol:
        raise PreconditionError("time-averaged density needs a non-degenerate spectrum")
    return np.diag(np.abs(psi0) ** 2).astype(complex)


@dataclass
class TimeStats:
    """Per-macro-space time mean and time variance of ``||P_nu psi_t||^2``.

    ``expr4`` is the time average of ``(||P_nu psi_t||^2 - d_nu/D)^2``, i.e.
    variance plus squared bias of the mean.
    """

    dims: tuple
    time_mean: np.ndarray
    time_variance: np.ndarray
    expr4: np.ndarray
    method: str
    T: float | None = None
    samples: int | None = None
    F: np.ndarray | None = field(default=None, repr=False)

    CSV_HEADER = ("nu", "d_nu", "time_mean", "time_variance", "expr4", "F_nu", "method", "T", "samples")

    def rows(self):
        """One tuple per macro-space, in CSV_HEADER order."""
        out = []
        for nu, d in enumerate(self.dims):
            out.append((
                nu, d, float(self.time_mean[nu]), float(self.time_variance[nu]), float(self.expr4[nu]),
                None if self.F is None else float(self.F[nu]),
                self.method, self.T, self.samples,
            ))
        return out


def _require_resonance_free(spectrum):
    if not isinstance(spectrum, Spectrum):
        spectrum = Spectrum.from_values(spectrum)
    if spectrum.D > 1 and not spectrum.resonance_free:
        raise PreconditionError(
            f"spectrum has resonances at tolerance {spectrum.resonance_tolerance:g}"
        )
    return spectrum


def time_stats_closed_form(psi0, decomp, spectrum):
    """Exact long-time mean and variance of ``||P_nu psi_t||^2``.

    With weights ``w_a = |c_a|^2``::

        mean_nu = sum_a w_a <a|P_nu|a>
        var_nu  = sum_{a != b} w_a w_b |<a|P_nu|b>|^2

    The variance formula uses the no-resonance condition: only the pairings
    (a, b) = (a', b') survive the time average of the cross terms.

    Raises
    ------
    PreconditionError
        If the spectrum has resonances at its stored tolerance.
    """
    spectrum = _require_resonance_free(spectrum)
    psi0 = np.asarray(psi0, dtype=complex)
    _check_length(psi0, spectrum.eigenvalues)
    if decomp.D != psi0.size:
        raise DimensionMismatchError("decomposition and state dimensions differ")
    w = np.abs(psi0) ** 2
    diag = decomp.diagonal_weights()  # (n, D)
    mean = diag @ w
    sw = np.sqrt(w)[:, None]
    var = np.empty(decomp.n)
    for nu in range(decomp.n):
        x = sw * decomp.block(nu)
        # ||W^1/2 P W^1/2||_F^2 = ||X^H X||_F^2, a d x d product
        g = x.conj().T @ x
        full = float(np.sum(np.abs(g) ** 2))
        var[nu] = max(full - float(np.sum((w * diag[nu]) ** 2)), 0.0)
    bias = mean - decomp.fractions()
    return TimeStats(decomp.dims, mean, var, var + bias**2, "closed_form")


def time_stats_quadrature(psi0, decomp, spectrum, T, samples):
    """Grid estimate of the same quantities over ``t in [0, T)``.

    Independent of :func:`time_stats_closed_form`: it evolves the state and
    averages on a uniform grid. A single sample returns the values at t = 0.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    p = macro_trajectory(psi0, decomp, spectrum, time_grid(T, samples))
    mean = p.mean(axis=1)
    var = ((p - mean[:, None]) ** 2).mean(axis=1)
    expr4 = ((p - decomp.fractions()[:, None]) ** 2).mean(axis=1)
    return TimeStats(decomp.dims, mean, var, expr4, "quadrature", float(T), int(samples))


def recurrence_search(spectrum, t_max, step):
    """Scan ``t_k = k * step`` in (0, t_max] for the return closest to the identity.

    The distance of ``U_t = diag(exp(-i E_a t))`` from I in operator norm is
    ``max_a |exp(-i E_a t) - 1| = max_a 2 |sin(E_a t / 2)|``.

    Returns
    -------
    t_star : float
        First grid time attaining the minimum.
    deviation : float
    """
    if step <= 0 or t_max <= 0:
        raise ValueError("step and t_max must be positive")
    e = energies(spectrum)
    n_steps = int(np.floor(t_max / step * (1 + 1e-12)))
    if n_steps < 1:
        raise ValueError("grid (0, t_max] contains no point")
    best_t, best_dev = None, np.inf
    chunk = max(1, 2**20 // max(e.size, 1))
    for start in range(1, n_steps + 1, chunk):
        k = np.arange(start, min(start + chunk, n_steps + 1))
        t = k * step
        dev = np.max(2.0 * np.abs(np.sin(np.outer(t, e) / 2.0)), axis=1)
        i = int(np.argmin(dev))
        if dev[i] < best_dev:
            best_dev, best_t = float(dev[i]), float(t[i])
    return best_t, best_dev


def torus_invariant_check(psi0, spectrum, times):
    """Largest drift of the radii ``|c_a(t)|`` from ``|c_a(0)|`` over ``times``."""
    psi0 = np.asarray(psi0, dtype=complex)
    r0 = np.abs(psi0)
    worst = 0.0
    times = np.asarray(times, dtype=float)
    for s in range(0, max(times.size, 1), CHUNK):
        r = np.abs(evolve_many(psi0, spectrum, times[s:s + CHUNK]))
        if r.size:
            worst = max(worst, float(np.max(np.abs(r - r0[:, None]))))
    return worst


def phase_average(delta, T, samples=None):
    """Average of ``exp(-i delta t)`` over [0, T].

    Exact integral when ``samples`` is None, otherwise the uniform-grid mean.
    """
    if samples is None:
        if delta == 0:
            return 1.0 + 0j
        return (1 - np.exp(-1j * delta * T)) / (1j * delta * T)
    return complex(np.mean(np.exp(-1j * delta * time_grid(T, samples))))


def phase_average_bound(delta, T):
    """``2 / (T |delta|)``, bounding ``|phase_average(delta, T)|``."""
    return 2.0 / (T * abs(delta))
