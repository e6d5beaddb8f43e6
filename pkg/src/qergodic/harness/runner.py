"""Run one configured experiment and write ``<out>/<kind>.csv`` plus ``manifest.json``."""

from __future__ import annotations

import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__
from .. import rng as rngmod
from ..dynamics import default_horizon, recurrence_search, time_stats_closed_form
from ..entropy import h_theorem_trajectory
from ..equilibrium import ObservableSet, build_equilibrium_decomposition, equilibrium_time_fraction, thermalization_check
from ..spectra import Spectrum, resonance_gap, sample_nonresonant_spectrum
from ..sampling import aligned_decomposition, random_decomposition, uniform_sphere_state
from ..typicality import (
    SweepRecord,
    check_dimension_condition,
    compute_F,
    concentration_experiment,
    normality_verdict,
    quantifier_experiment,
    sweep_trial,
)
from . import config as cfgmod
from .output import emit_csv, emit_manifest, ensure_dir

log = logging.getLogger(__name__)

WORKERS_ENV = "QERGODIC_WORKERS"

SEED_DERIVATION = (
    "Philox stream keyed by SeedSequence([master_seed, trial, purpose]); "
    "purpose 0=spectrum, 1=decomposition, 2=initial states, 3=measurement"
)


@dataclass
class ResultManifest:
    config: dict
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    version: str = __version__
    seed_derivation: str = SEED_DERIVATION

    @property
    def passed(self):
        return all(bool(v) for v in self.checks.values())

    def to_dict(self):
        return {
            "artifact_version": self.version,
            "config": self.config,
            "seed_derivation": self.seed_derivation,
            "checks": self.checks,
            "passed": self.passed,
            "metrics": self.metrics,
            "timings": self.timings,
            "files": self.files,
            "platform": {"python": platform.python_version(), "numpy": np.__version__},
        }


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _spectrum(cfg, D, trial=0):
    if cfg.eigenvalues is not None:
        return Spectrum.from_values(cfg.eigenvalues, cfg.resonance_tolerance)
    return sample_nonresonant_spectrum(
        D, tuple(cfg.energy_window), rngmod.stream(cfg.master_seed, trial, rngmod.SPECTRUM),
        cfg.resonance_tolerance, cfg.max_retries,
    )


def _horizon(cfg, spectrum):
    return cfg.T if cfg.T is not None else default_horizon(spectrum, cfg.horizon_factor)


def _initial_state(cfg, decomp, D, trial=0):
    if cfg.psi0 == "eigenstate":
        psi = np.zeros(D, dtype=complex)
        psi[0] = 1.0
        return psi
    if cfg.psi0 == "block":
        return decomp.block_state(0)
    if cfg.psi0 == "uniform_amplitude":
        return np.full(D, 1 / np.sqrt(D), dtype=complex)
    return uniform_sphere_state(D, rngmod.stream(cfg.master_seed, trial, rngmod.STATES))


def _decomposition(cfg, dims, trial=0):
    if cfg.decomposition == "aligned":
        return aligned_decomposition(dims)
    return random_decomposition(dims, rngmod.stream(cfg.master_seed, trial, rngmod.DECOMPOSITION))


# -- experiment kinds ----------------------------------------------------


def _run_normality(cfg, out, workers):
    dims = cfg.resolved_dims()
    D = sum(dims)
    spectrum = _spectrum(cfg, D)
    decomp = _decomposition(cfg, dims)
    psi0 = _initial_state(cfg, decomp, D)
    T = _horizon(cfg, spectrum)
    rep = normality_verdict(psi0, decomp, spectrum, cfg.epsilon, cfg.delta_prime, T, cfg.samples)
    stats = time_stats_closed_form(psi0, decomp, spectrum)
    stats.F = rep.F
    stats.T, stats.samples = T, cfg.samples
    path = emit_csv(os.path.join(out, "normality.csv"), stats.CSV_HEADER, stats.rows())
    checks = {
        "expr4_le_F": bool(np.all(rep.expr4 <= rep.F + 1e-10)),
        "normal_vNdeforig": rep.verdict_vNdeforig,
    }
    metrics = {
        "fraction_vNdeforig": rep.fraction_vNdeforig,
        "fraction_vNdef": rep.fraction_vNdef,
        "fraction_strong": rep.fraction_strong,
        "verdict_vNdef": rep.verdict_vNdef,
        "verdict_strong": rep.verdict_strong,
        "T": T,
        "resonance_gap": resonance_gap(spectrum) if D > 1 else None,
        "dimension_condition": check_dimension_condition(D, dims, cfg.epsilon, cfg.delta_prime, cfg.delta, cfg.C1),
    }
    return [path], checks, metrics


def _sweep_task(args):
    with threadpool_limits(1):
        return sweep_trial(*args)


def _run_sweep(cfg, out, workers):
    dims = cfg.resolved_dims()
    D = sum(dims)
    spectrum = _spectrum(cfg, D)
    T = _horizon(cfg, spectrum)
    tasks = [
        (spectrum, dims, cfg.master_seed, t, cfg.epsilon, cfg.delta_prime, cfg.n_random_states,
         cfg.adversarial, T, cfg.samples)
        for t in range(cfg.trials)
    ]
    if cfg.compare_D is not None:
        cdims = [cfg.compare_D // cfg.n] * cfg.n
        cspec = _spectrum(cfg, cfg.compare_D, trial=1)
        cT = cfg.T if cfg.T is not None else default_horizon(cspec, cfg.horizon_factor)
        tasks += [
            (cspec, cdims, cfg.master_seed, cfg.trials + t, cfg.epsilon, cfg.delta_prime, cfg.n_random_states,
             cfg.adversarial, cT, cfg.samples)
            for t in range(cfg.trials)
        ]
    records = _map(_sweep_task, tasks, workers)
    path = emit_csv(os.path.join(out, "sweep.csv"), SweepRecord.CSV_HEADER, [r.row() for r in records])

    main = [r for r in records if r.D == D]
    frac_normal = float(np.mean([r.all_normal for r in main]))
    checks = {"fraction_normal_decompositions": frac_normal >= cfg.normal_fraction_required}
    metrics = {
        "fraction_normal_decompositions": frac_normal,
        "median_max_F": float(np.median([r.max_F for r in main])),
        "theorem_condition_rate": float(np.mean([r.theorem_condition for r in main])),
        "T": T,
    }
    if cfg.compare_D is not None:
        other = [r for r in records if r.D == cfg.compare_D]
        metrics["compare_D"] = cfg.compare_D
        metrics["median_max_F_compare"] = float(np.median([r.max_F for r in other]))
        checks["max_F_decreases_with_D"] = (
            metrics["median_max_F"] < metrics["median_max_F_compare"]
            if D > cfg.compare_D else metrics["median_max_F"] > metrics["median_max_F_compare"]
        )
    return [path], checks, metrics


def _run_concentration(cfg, out, workers):
    dims = cfg.resolved_dims()
    decomp = _decomposition(cfg, dims)
    rep = concentration_experiment(decomp, cfg.trials, rngmod.stream(cfg.master_seed, 0, rngmod.STATES))
    path = emit_csv(os.path.join(out, "concentration.csv"), rep.CSV_HEADER, rep.rows())
    z = np.abs(rep.empirical_mean - rep.expected_mean) / np.where(rep.se_mean > 0, rep.se_mean, np.inf)
    single = rep.se_mean == 0
    mean_ok = np.where(single, np.abs(rep.empirical_mean - rep.expected_mean) < 1e-12, z <= cfg.mean_se_factor)
    rel = np.abs(rep.empirical_variance - rep.exact_variance) / np.where(rep.exact_variance > 0, rep.exact_variance, 1)
    var_ok = np.where(rep.exact_variance > 0, rel <= cfg.variance_rel_tol, rep.empirical_variance < 1e-20)
    checks = {
        "mean_within_se": bool(np.all(mean_ok)),
        "variance_below_bound": rep.bound_holds(),
        "variance_matches_exact": bool(np.all(var_ok)),
    }
    metrics = {"mean_z_scores": z, "variance_rel_error": rel}
    return [path], checks, metrics


def _run_entropy(cfg, out, workers):
    dims = cfg.resolved_dims()
    D = sum(dims)
    spectrum = _spectrum(cfg, D)
    decomp = _decomposition(cfg, dims)
    psi0 = _initial_state(cfg, decomp, D)
    T = _horizon(cfg, spectrum)
    traj = h_theorem_trajectory(psi0, decomp, spectrum, T, cfg.samples, cfg.theta, cfg.k)
    path = emit_csv(os.path.join(out, "entropy.csv"), traj.CSV_HEADER, traj.rows())
    n = len(dims)
    slack = np.log(1e3 * n) / np.log(D) if D > 1 else np.inf
    rel = abs(traj.mean_S - traj.expr2) / traj.expr2 if traj.expr2 > 0 else abs(traj.mean_S)
    checks = {
        "fraction_near_max": traj.fraction_near_max >= cfg.min_fraction,
        "mean_matches_expr2": bool(rel <= slack),
    }
    metrics = {
        "fraction_near_max": traj.fraction_near_max,
        "mean_S": traj.mean_S,
        "S_max": traj.S_max,
        "expr2_prediction": traj.expr2,
        "relative_gap": rel,
        "relative_slack": slack,
        "T": T,
    }
    return [path], checks, metrics


def _run_quantifier(cfg, out, workers):
    dims = cfg.resolved_dims()
    D = sum(dims)
    spectrum = _spectrum(cfg, D)
    s = quantifier_experiment(spectrum, dims, cfg.trials, cfg.psi0_mode, cfg.master_seed)
    path = emit_csv(os.path.join(out, "quantifier.csv"), s.CSV_HEADER, s.records)
    expected = (1 - dims[0] / D) ** 2
    checks = {
        "aligned_expr4_exact": abs(float(s.aligned_expr4[0]) - expected) < 1e-12,
        "haar_mean_expr4_small": float(np.max(s.mean_expr4)) < cfg.expr4_threshold,
    }
    metrics = {
        "aligned_expr4": s.aligned_expr4,
        "aligned_expr4_max": float(np.max(s.aligned_expr4)),
        "haar_mean_expr4": s.mean_expr4,
        "haar_mean_expr4_max": float(np.max(s.mean_expr4)),
        "haar_max_expr4": s.max_expr4,
        "haar_mean_F": s.mean_F,
    }
    return [path], checks, metrics


def _run_recurrence(cfg, out, workers):
    D = cfg.resolved_D()
    if cfg.eigenvalues is not None:
        spectrum = Spectrum.from_values(cfg.eigenvalues, cfg.resonance_tolerance)
    else:
        spectrum = _spectrum(cfg, D)
    t_star, dev = recurrence_search(spectrum, cfg.t_max, cfg.step)
    path = emit_csv(os.path.join(out, "recurrence.csv"), ("D", "t_max", "step", "t_star", "deviation"),
                    [(spectrum.D, cfg.t_max, cfg.step, t_star, dev)])
    return [path], {"deviation_below_tolerance": dev < cfg.recurrence_tolerance}, {
        "t_star": t_star, "deviation": dev, "eigenvalues": spectrum.eigenvalues}


def _run_equilibrium(cfg, out, workers):
    D = cfg.resolved_D()
    spectrum = _spectrum(cfg, D)
    decomp = build_equilibrium_decomposition(
        D, cfg.eq_fraction, cfg.n_small, rngmod.stream(cfg.master_seed, 0, rngmod.DECOMPOSITION))
    T = _horizon(cfg, spectrum)
    rows = []
    states = []
    gen = rngmod.stream(cfg.master_seed, 0, rngmod.STATES)
    for i in range(cfg.n_random_states):
        states.append(("random", i, uniform_sphere_state(D, gen)))
    if cfg.adversarial:
        for nu in range(decomp.n):
            if nu == decomp.eq_index:
                continue
            for k in range(decomp.dims[nu]):
                states.append((f"block_{nu}", k, decomp.block_state(nu, k)))
    for kind, i, psi in states:
        rows.append((kind, i, equilibrium_time_fraction(psi, decomp, spectrum, cfg.threshold, T, cfg.samples)))
    path = emit_csv(os.path.join(out, "equilibrium.csv"), ("state", "index", "fraction_in_equilibrium"), rows)
    fractions = [r[2] for r in rows]
    files = [path]
    if states:
        verdicts = thermalization_check(states[0][2], ObservableSet.macro_projectors(decomp), spectrum,
                                        cfg.epsilon_rel, T, cfg.samples)
        files.append(emit_csv(os.path.join(out, "equilibrium_observables.csv"),
                              verdicts[0].CSV_HEADER, [v.row() for v in verdicts]))
    checks = {"all_states_mostly_in_equilibrium": bool(min(fractions, default=1.0) >= cfg.min_fraction)}
    metrics = {"min_fraction": min(fractions, default=1.0), "dims": decomp.dims, "T": T}
    return files, checks, metrics


RUNNERS = {
    "normality": _run_normality,
    "sweep": _run_sweep,
    "concentration": _run_concentration,
    "entropy": _run_entropy,
    "quantifier": _run_quantifier,
    "recurrence": _run_recurrence,
    "equilibrium": _run_equilibrium,
}


def _map(fn, tasks, workers):
    """Ordered map; results are identical for any worker count."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def run(config, workers=None, out_dir=None):
    """Validate ``config``, execute it and write CSV data and the manifest.

    Returns the :class:`ResultManifest`. Raises ``ConfigError`` on invalid
    configuration.
    """
    cfgmod.check(config)
    workers = default_workers() if workers is None else max(1, int(workers))
    out = ensure_dir(out_dir or config.out_dir)
    log.info("running %s (seed %d, %d worker(s)) -> %s", config.kind, config.master_seed, workers, out)
    start = time.perf_counter()
    files, checks, metrics = RUNNERS[config.kind](config, out, workers)
    manifest = ResultManifest(
        config=config.to_dict(),
        checks={k: bool(v) for k, v in checks.items()},
        metrics=metrics,
        timings={"wall_seconds": time.perf_counter() - start, "workers": workers},
        files=[os.path.basename(f) for f in files],
    )
    emit_manifest(os.path.join(out, "manifest.json"), manifest.to_dict())
    return manifest
