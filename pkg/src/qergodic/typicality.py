"""The F statistic, the theorem's hypotheses, and epsilon-delta' normality checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .dynamics import (
    default_horizon,
    macro_trajectories,
    macro_trajectory,
    time_grid,
    time_stats_closed_form,
    _require_resonance_free,
)
from .errors import DimensionMismatchError
from .sampling import (
    aligned_decomposition,
    random_decomposition,
    uniform_sphere_state,
    uniform_sphere_states,
)

__all__ = [
    "compute_F",
    "check_theorem_condition",
    "check_dimension_condition",
    "theorem_threshold",
    "normality_statistics",
    "NormalityReport",
    "normality_verdict",
    "ConcentrationReport",
    "concentration_experiment",
    "QuantifierSummary",
    "quantifier_experiment",
    "SweepRecord",
    "sweep_trial",
]


def compute_F(decomp, D=None):
    """Per-macro-space F statistic.

    ``F_nu = max_{a != b} |<a|P_nu|b>|^2 + max_a (<a|P_nu|a> - d_nu/D)^2``
    in the energy eigenbasis. Bounds the time average of
    ``(||P_nu psi_t||^2 - d_nu/D)^2`` for every initial state.
    """
    if D is not None and D != decomp.D:
        raise DimensionMismatchError(f"D={D} does not match decomposition dimension {decomp.D}")
    D = decomp.D
    out = np.empty(decomp.n)
    for nu in range(decomp.n):
        P = decomp.projector(nu)
        a2 = np.abs(P) ** 2
        diag = np.real(np.diagonal(P)).copy()
        np.fill_diagonal(a2, 0.0)
        off = float(a2.max()) if D > 1 else 0.0
        out[nu] = off + float(np.max((diag - decomp.dims[nu] / D) ** 2))
    return out


def theorem_threshold(dims, epsilon, delta_prime):
    """Right-hand side ``eps^2 (d_nu / (n D)) (delta' / n)`` per macro-space."""
    d = np.asarray(dims, dtype=float)
    n, D = d.size, d.sum()
    return epsilon**2 * (d / (n * D)) * (delta_prime / n)


def check_theorem_condition(decomp, spectrum, epsilon, delta_prime):
    """Does ``F_nu`` lie below the theorem's threshold for every macro-space?

    Returns ``(ok, margins)`` with ``margins = threshold - F``.
    """
    _require_resonance_free(spectrum)
    margins = theorem_threshold(decomp.dims, epsilon, delta_prime) - compute_F(decomp)
    return bool(np.all(margins > 0)), margins


def check_dimension_condition(D, dims, epsilon, delta_prime, delta, C1=10.0):
    """``max(C1, 10 n^2 / (eps^2 delta' delta)) log D < d_nu < D / C1`` for all nu.

    ``C1`` is a universal constant whose value is not known; 10 is a default.
    """
    if C1 <= 0:
        raise ValueError("C1 must be positive")
    dims = np.asarray(dims, dtype=float)
    n = dims.size
    lower = max(C1, 10.0 * n**2 / (epsilon**2 * delta_prime * delta)) * np.log(D)
    return bool(np.all((lower < dims) & (dims < D / C1)))


def normality_statistics(p, dims, epsilon):
    """Per-time goodness flags for the three normality criteria.

    ``p`` has the macro index on axis -2 when it is 2-D or more: shape (n,)
    or (..., n, m). Returns boolean arrays with that axis removed:

    ``vNdef``
        ``|x_nu| < eps sqrt(d_nu / (n D))`` for all nu.
    ``vNdeforig``
        ``sum_nu x_nu^2 D / d_nu < eps^2``. By Cauchy-Schwarz this is the
        worst case over all real combinations ``A = sum alpha_nu P_nu`` of
        ``|<A>_psi - tr(rho_mc A)|^2 / tr(rho_mc A^2)``, so the single
        quadratic form decides the condition for the whole algebra.
    ``strong``
        ``|x_nu| < eps d_nu / D`` for all nu.

    where ``x_nu = p_nu - d_nu / D``. Also returns the quadratic statistic.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(dims, dtype=float)
    n, D = d.size, d.sum()
    axis = 0 if p.ndim == 1 else -2
    shape = (n,) if p.ndim == 1 else (n, 1)
    frac = (d / D).reshape(shape)
    x = p - frac
    quad = np.sum(x**2 / frac, axis=axis)
    vndef = np.all(np.abs(x) < epsilon * np.sqrt(frac / n), axis=axis)
    strong = np.all(np.abs(x) < epsilon * frac, axis=axis)
    return {"vNdef": vndef, "vNdeforig": quad < epsilon**2, "strong": strong, "quadratic": quad}


def worst_case_deviation(p, dims):
    """Largest ``(<A> - tr(rho_mc A))^2 / tr(rho_mc A^2)`` over ``A = sum alpha_nu P_nu``.

    Returns ``(value, alpha)``: the closed form and a maximising weight vector
    ``alpha_nu = x_nu D / d_nu``.
    """
    d = np.asarray(dims, dtype=float)
    frac = d / d.sum()
    x = np.asarray(p, dtype=float) - frac
    return float(np.sum(x**2 / frac)), x / frac


def algebra_deviation(p, dims, alpha):
    """``(sum alpha x)^2 / sum alpha^2 d/D`` for one combination ``alpha``."""
    d = np.asarray(dims, dtype=float)
    frac = d / d.sum()
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(p, dtype=float) - frac
    return float(np.dot(alpha, x) ** 2 / np.dot(alpha**2, frac))


@dataclass
class NormalityReport:
    """Normality verdicts for one (H, decomposition, psi0) triple."""

    F: np.ndarray
    expr4: np.ndarray
    time_mean: np.ndarray
    time_variance: np.ndarray
    epsilon: float
    delta_prime: float
    fraction_vNdef: float
    fraction_vNdeforig: float
    fraction_strong: float
    T: float
    samples: int

    @property
    def fraction_of_good_times(self):
        return self.fraction_vNdeforig

    @property
    def verdict_vNdef(self):
        return self.fraction_vNdef >= 1 - self.delta_prime

    @property
    def verdict_vNdeforig(self):
        return self.fraction_vNdeforig >= 1 - self.delta_prime

    @property
    def verdict_strong(self):
        return self.fraction_strong >= 1 - self.delta_prime


def normality_verdict(psi0, decomp, spectrum, epsilon, delta_prime, T=None, samples=1000):
    """Decide epsilon-delta'-normality of ``psi0`` on a uniform time grid.

    ``T`` defaults to 100 / (min level gap). Time statistics are exact
    (closed form); the fractions of good times come from the grid.
    """
    if not (0 < epsilon < 1 and 0 < delta_prime < 1):
        raise ValueError("epsilon and delta_prime must lie in (0, 1)")
    spectrum = _require_resonance_free(spectrum)
    stats = time_stats_closed_form(psi0, decomp, spectrum)
    T = default_horizon(spectrum) if T is None else float(T)
    p = macro_trajectory(psi0, decomp, spectrum, time_grid(T, samples))
    flags = normality_statistics(p, decomp.dims, epsilon)
    return NormalityReport(
        F=compute_F(decomp),
        expr4=stats.expr4,
        time_mean=stats.time_mean,
        time_variance=stats.time_variance,
        epsilon=epsilon,
        delta_prime=delta_prime,
        fraction_vNdef=float(flags["vNdef"].mean()),
        fraction_vNdeforig=float(flags["vNdeforig"].mean()),
        fraction_strong=float(flags["strong"].mean()),
        T=T,
        samples=int(samples),
    )


@dataclass
class ConcentrationReport:
    """Sphere statistics of ``||P_nu phi||^2`` for uniformly random ``phi``."""

    dims: tuple
    D: int
    empirical_mean: np.ndarray
    empirical_variance: np.ndarray
    se_mean: np.ndarray
    se_variance: np.ndarray
    sample_count: int

    @property
    def expected_mean(self):
        return np.asarray(self.dims, float) / self.D

    @property
    def variance_bound(self):
        """``(1/d)(d/D)^2``, the strict upper bound on the variance."""
        d = np.asarray(self.dims, float)
        return (d / self.D) ** 2 / d

    @property
    def exact_variance(self):
        """``d (D - d) / (D^2 (D + 1))`` (Beta(d, D - d) variance)."""
        d = np.asarray(self.dims, float)
        D = self.D
        return d * (D - d) / (D**2 * (D + 1))

    def bound_holds(self):
        return bool(np.all(self.empirical_variance < self.variance_bound))

    CSV_HEADER = ("nu", "d_nu", "empirical_mean", "se_mean", "expected_mean", "empirical_variance",
                  "se_variance", "exact_variance", "variance_bound", "trials")

    def rows(self):
        return [
            (nu, d, float(self.empirical_mean[nu]), float(self.se_mean[nu]), float(self.expected_mean[nu]),
             float(self.empirical_variance[nu]), float(self.se_variance[nu]),
             float(self.exact_variance[nu]), float(self.variance_bound[nu]), self.sample_count)
            for nu, d in enumerate(self.dims)
        ]


def concentration_experiment(decomp, trials, rng=None, batch=2048):
    """Monte Carlo moments of ``||P_nu phi||^2`` over uniform sphere states."""
    if trials < 100:
        raise ValueError("need at least 100 trials")
    rng = rngmod.as_generator(rng)
    p = np.empty((decomp.n, trials))
    for s in range(0, trials, batch):
        m = min(batch, trials - s)
        p[:, s:s + m] = np.add.reduceat(
            np.abs(decomp.basis.conj().T @ uniform_sphere_states(decomp.D, m, rng)) ** 2,
            decomp.offsets[:-1], axis=0,
        )
    mean = p.mean(axis=1)
    var = p.var(axis=1, ddof=1)
    m4 = ((p - mean[:, None]) ** 4).mean(axis=1)
    return ConcentrationReport(
        dims=decomp.dims,
        D=decomp.D,
        empirical_mean=mean,
        empirical_variance=var,
        se_mean=np.sqrt(var / trials),
        se_variance=np.sqrt(np.maximum(m4 - var**2, 0.0) / trials),
        sample_count=int(trials),
    )


@dataclass
class QuantifierSummary:
    """Averages over random decompositions against one aligned decomposition."""

    dims: tuple
    n_decomps: int
    psi0_mode: str
    mean_F: np.ndarray
    mean_expr4: np.ndarray
    max_expr4: np.ndarray
    aligned_expr4: np.ndarray
    aligned_F: np.ndarray
    records: list = field(repr=False, default_factory=list)

    CSV_HEADER = ("source", "trial", "nu", "d_nu", "F_nu", "expr4")


def quantifier_experiment(spectrum, dims, n_decomps, psi0_mode="fixed_eigenstate", seed=0):
    """Contrast "most D: all psi0" with "all psi0: most D".

    For each of ``n_decomps`` Haar decompositions records F (whose average is
    the D-average of the psi0-independent bound) and expr4 for the chosen
    psi0 (whose average over D is small for every fixed psi0). The aligned
    decomposition shows a member for which psi0 = phi_1 is far from normal.

    ``psi0_mode`` is ``"fixed_eigenstate"`` (psi0 = phi_1 throughout) or
    ``"per_decomp_random"`` (a fresh uniform psi0 for each decomposition).
    """
    if n_decomps < 10:
        raise ValueError("n_decomps must be >= 10")
    mode = psi0_mode.replace("-", "_")
    if mode not in ("fixed_eigenstate", "per_decomp_random"):
        raise ValueError(f"unknown psi0_mode {psi0_mode!r}")
    spectrum = _require_resonance_free(spectrum)
    dims = tuple(int(d) for d in dims)
    D = sum(dims)
    if D != spectrum.D:
        raise DimensionMismatchError("dims do not sum to the spectrum size")
    phi1 = np.zeros(D, dtype=complex)
    phi1[0] = 1.0

    records = []
    Fs, e4s = [], []
    for trial in range(n_decomps):
        decomp = random_decomposition(dims, rngmod.stream(seed, trial, rngmod.DECOMPOSITION))
        psi0 = phi1 if mode == "fixed_eigenstate" else uniform_sphere_state(
            D, rngmod.stream(seed, trial, rngmod.STATES))
        F = compute_F(decomp)
        e4 = time_stats_closed_form(psi0, decomp, spectrum).expr4
        Fs.append(F)
        e4s.append(e4)
        records.extend(("haar", trial, nu, dims[nu], float(F[nu]), float(e4[nu])) for nu in range(len(dims)))

    aligned = aligned_decomposition(dims)
    aF = compute_F(aligned)
    ae4 = time_stats_closed_form(phi1, aligned, spectrum).expr4
    records.extend(("aligned", -1, nu, dims[nu], float(aF[nu]), float(ae4[nu])) for nu in range(len(dims)))
    Fs, e4s = np.array(Fs), np.array(e4s)
    return QuantifierSummary(
        dims=dims,
        n_decomps=n_decomps,
        psi0_mode=mode,
        mean_F=Fs.mean(axis=0),
        mean_expr4=e4s.mean(axis=0),
        max_expr4=e4s.max(axis=0),
        aligned_expr4=ae4,
        aligned_F=aF,
        records=records,
    )


@dataclass
class SweepRecord:
    """Outcome of one decomposition in a normal-typicality sweep."""

    D: int
    trial: int
    max_F: float
    n_random: int
    n_block: int
    min_fraction_random: float
    min_fraction_block: float
    min_fraction_vNdef: float
    min_fraction_strong: float
    theorem_condition: bool
    all_normal: bool

    CSV_HEADER = ("D", "trial", "max_F", "n_random", "n_block", "min_fraction_random", "min_fraction_block",
                  "min_fraction_vNdef", "min_fraction_strong", "theorem_condition", "all_normal")

    def row(self):
        return tuple(getattr(self, k) for k in self.CSV_HEADER)


def sweep_trial(spectrum, dims, seed, trial, epsilon, delta_prime, n_random=20, adversarial=True,
                T=None, samples=64):
    """Test one Haar decomposition against random and block-basis initial states.

    The decomposition is normal for the sweep when every tested psi0 has a
    vNdeforig good-time fraction of at least ``1 - delta_prime``. Block-basis
    states (the basis vectors of each macro-space) start as far from
    equilibrium as possible.
    """
    spectrum = _require_resonance_free(spectrum)
    decomp = random_decomposition(dims, rngmod.stream(seed, trial, rngmod.DECOMPOSITION))
    D = decomp.D
    T = default_horizon(spectrum) if T is None else float(T)
    times = time_grid(T, samples)

    def fractions(states):
        p = macro_trajectories(states, decomp, spectrum, times)  # (S, n, m)
        flags = normality_statistics(p, decomp.dims, epsilon)
        return {k: flags[k].mean(axis=0) for k in ("vNdef", "vNdeforig", "strong")}

    groups = []
    if n_random:
        groups.append(("random", fractions(uniform_sphere_states(D, n_random, rngmod.stream(seed, trial, rngmod.STATES)))))
    if adversarial:
        groups.append(("block", fractions(decomp.basis)))

    def min_of(key, name=None):
        vals = [g[key] for kind, g in groups if name in (None, kind)]
        return float(np.min(np.concatenate(vals))) if vals else 1.0

    F = compute_F(decomp)
    threshold = 1 - delta_prime
    fr_random = min_of("vNdeforig", "random")
    fr_block = min_of("vNdeforig", "block")
    return SweepRecord(
        D=D,
        trial=trial,
        max_F=float(F.max()),
        n_random=n_random,
        n_block=D if adversarial else 0,
        min_fraction_random=fr_random,
        min_fraction_block=fr_block,
        min_fraction_vNdef=min_of("vNdef"),
        min_fraction_strong=min_of("strong"),
        theorem_condition=bool(np.all(F < theorem_threshold(dims, epsilon, delta_prime))),
        all_normal=bool(fr_random >= threshold and fr_block >= threshold),
    )
