"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

Run with ``pytest -m acceptance -s`` to see the report lines as they are produced;
they are also echoed in the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import random_triple
from qergodic import rng as rngmod
from qergodic.dynamics import time_stats_closed_form, time_stats_quadrature
from qergodic.entropy import (
    entropy_approx,
    entropy_from_probabilities,
    entropy_qB,
    entropy_S,
    entropy_vN,
    superposition_measurement_entropy,
)
from qergodic.harness import ExperimentConfig, run
from qergodic.harness.output import read_csv
from qergodic.sampling import random_decomposition, uniform_sphere_states
from qergodic.spectra import sample_nonresonant_spectrum
from qergodic.typicality import compute_F

pytestmark = pytest.mark.acceptance

SEED = 20240601
REPORT = []


def report(n, ok, detail, elapsed, budget=None):
    within = budget is None or elapsed < budget
    line = f"{'PASS' if ok and within else 'FAIL'} criterion {n}: {detail} [{elapsed:.1f} s"
    line += f" / budget {budget:.0f} s]" if budget else "]"
    REPORT.append(line)
    print("\n" + line)
    return ok and within


@pytest.fixture(scope="session")
def sweep_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep_w1")
    c = sweep_config()
    t0 = time.perf_counter()
    m = run(c, workers=1, out_dir=str(out))
    return out, m, time.perf_counter() - t0


def sweep_config():
    return ExperimentConfig(kind="sweep", master_seed=SEED, D=1000, n=10, trials=50, compare_D=250,
                            n_random_states=20, adversarial=True, samples=64, epsilon=0.2, delta_prime=0.1,
                            normal_fraction_required=0.95)


def test_c01_closed_form_matches_quadrature():
    t0 = time.perf_counter()
    worst_mean = worst_var = 0.0
    for trial in range(20):
        spec, dec, psi = random_triple(16, [4] * 4, SEED, trial)
        cf = time_stats_closed_form(psi, dec, spec)
        q = time_stats_quadrature(psi, dec, spec, 1e4 / spec.min_level_gap(), 100_000)
        worst_mean = max(worst_mean, float(np.max(np.abs(cf.time_mean - q.time_mean))))
        worst_var = max(worst_var, float(np.max(np.abs(cf.time_variance - q.time_variance))))
    ok = worst_mean <= 1e-3 and worst_var <= 1e-3
    assert report(1, ok, f"max |mean diff| {worst_mean:.2e}, max |var diff| {worst_var:.2e} (tol 1e-3)",
                  time.perf_counter() - t0, 60)


def test_c02_expr4_bounded_by_F():
    t0 = time.perf_counter()
    worst = -np.inf
    count = 0
    for D in (16, 64, 256):
        n = 4
        for trial in range(200):
            spec, dec, psi = random_triple(D, [D // n] * n, SEED + D, trial)
            gap = time_stats_closed_form(psi, dec, spec).expr4 - compute_F(dec)
            worst = max(worst, float(gap.max()))
            count += 1
    assert report(2, worst <= 1e-10, f"{count} triples, max(expr4 - F) = {worst:.3e}",
                  time.perf_counter() - t0, 120)


def test_c03_concentration(tmp_path):
    t0 = time.perf_counter()
    c = ExperimentConfig(kind="concentration", master_seed=SEED, D=512, dims=[64] * 8, trials=100_000)
    m = run(c, out_dir=str(tmp_path))
    rows = read_csv(tmp_path / "concentration.csv")
    header = rows[0]
    mean = np.array([float(r[header.index("empirical_mean")]) for r in rows[1:]])
    var = np.array([float(r[header.index("empirical_variance")]) for r in rows[1:]])
    se = np.array([float(r[header.index("se_mean")]) for r in rows[1:]])
    exact = 64 * (512 - 64) / (512**2 * 513)
    bound = (1 / 64) * (1 / 8) ** 2
    ok = (np.all(np.abs(mean - 1 / 8) <= 3 * se) and np.all(var < bound)
          and np.all(np.abs(var - exact) <= 0.05 * exact) and m.passed)
    detail = (f"max z {np.max(np.abs(mean - 1 / 8) / se):.2f}, max var {var.max():.4e} < bound {bound:.4e}, "
              f"max rel err vs exact {np.max(np.abs(var - exact)) / exact:.3f}")
    assert report(3, ok, detail, time.perf_counter() - t0, 60)


def test_c04_normal_typicality_sweep(sweep_run):
    out, m, elapsed = sweep_run
    rows = read_csv(out / "sweep.csv")
    header = rows[0]
    main = [r for r in rows[1:] if r[0] == "1000"]
    blocks = {int(r[header.index("n_block")]) for r in main}
    frac = m.metrics["fraction_normal_decompositions"]
    ok = (len(main) == 50 and blocks == {1000} and frac >= 0.95
          and m.metrics["median_max_F"] < m.metrics["median_max_F_compare"])
    detail = (f"{frac:.2%} of 50 decompositions normal for 20 random + 1000 block states; "
              f"median max F {m.metrics['median_max_F']:.3e} (D=1000) vs "
              f"{m.metrics['median_max_F_compare']:.3e} (D=250)")
    assert report(4, ok, detail, elapsed, 1800)


def test_c05_quantifier_order(tmp_path):
    t0 = time.perf_counter()
    c = ExperimentConfig(kind="quantifier", master_seed=SEED, D=30, n=3, trials=200, psi0_mode="fixed_eigenstate")
    m = run(c, out_dir=str(tmp_path))
    aligned = float(m.metrics["aligned_expr4"][0])
    haar = float(np.max(m.metrics["haar_mean_expr4"]))
    ok = abs(aligned - 4 / 9) < 1e-12 and haar < 0.02
    assert report(5, ok, f"aligned expr4 = {aligned:.6f} (4/9), Haar-average expr4 = {haar:.5f} (< 0.02)",
                  time.perf_counter() - t0, 60)


def test_c06_h_theorem(tmp_path):
    t0 = time.perf_counter()
    c = ExperimentConfig(kind="entropy", master_seed=SEED, D=1000, n=10, psi0="block", samples=10_000, theta=0.9,
                         min_fraction=0.9)
    m = run(c, out_dir=str(tmp_path))
    frac = m.metrics["fraction_near_max"]
    rel, slack = m.metrics["relative_gap"], m.metrics["relative_slack"]
    ok = frac >= 0.9 and rel <= slack
    detail = (f"S >= 0.9 k log D at {frac:.2%} of 10^4 times; mean S {m.metrics['mean_S']:.4f} vs "
              f"prediction {m.metrics['expr2_prediction']:.4f} (rel gap {rel:.3f} <= {slack:.3f})")
    assert report(6, ok, detail, time.perf_counter() - t0, 300)


def test_c07_recurrence(tmp_path):
    t0 = time.perf_counter()
    a = run(ExperimentConfig(kind="recurrence", master_seed=SEED, eigenvalues=[0, 1, 2, 3], t_max=10.0,
                             step=np.pi / 100), out_dir=str(tmp_path / "int"))
    # window [0, 2 pi] with unit step keeps every early grid time far from the identity,
    # so a small deviation is a genuine recurrence rather than t ~ 0
    b = run(ExperimentConfig(kind="recurrence", master_seed=SEED, D=5, t_max=1e6, step=1.0,
                             energy_window=[0.0, 2 * np.pi]), out_dir=str(tmp_path / "rand"))
    ok = (abs(a.metrics["t_star"] - 2 * np.pi) < 1e-12 and a.metrics["deviation"] < 1e-9
          and b.metrics["deviation"] < 0.5 and b.metrics["t_star"] > 10)
    detail = (f"integer spectrum t* = {a.metrics['t_star']:.12f}, deviation {a.metrics['deviation']:.1e}; "
              f"5 random levels: deviation {b.metrics['deviation']:.3f} at t = {b.metrics['t_star']:.1f}")
    assert report(7, ok, detail, time.perf_counter() - t0, 120)


def test_c08_entropy_identities():
    t0 = time.perf_counter()
    dims = [4, 12, 16, 32]
    D = sum(dims)
    dec = random_decomposition(dims, rngmod.stream(SEED, 0, rngmod.DECOMPOSITION))
    errs = {}
    errs["block"] = max(abs(entropy_S(dec.block_state(nu, 1), dec) - np.log(d)) for nu, d in enumerate(dims))
    states = uniform_sphere_states(D, 10_000, rngmod.stream(SEED, 0, rngmod.STATES))
    p = np.add.reduceat(np.abs(dec.basis.conj().T @ states) ** 2, dec.offsets[:-1], axis=0)
    S = entropy_from_probabilities(p, dims)
    errs["bounds"] = max(0.0, float(-S.min()), float(S.max() - np.log(D)))
    errs["vN_qB"] = max(abs(entropy_vN(dec.projector(nu) / d) - entropy_qB(nu, dec)) for nu, d in enumerate(dims))
    g = rngmod.stream(SEED, 0, rngmod.MEASUREMENT)
    errs["measurement"] = max(
        abs(superposition_measurement_entropy(states[:, i], dec, g, trials=10).expected_collapsed_entropy
            - entropy_approx(states[:, i], dec)[0])
        for i in range(200)
    )
    ok = all(v <= 1e-9 for v in errs.values())
    assert report(8, ok, ", ".join(f"{k} err {v:.1e}" for k, v in errs.items()), time.perf_counter() - t0, 60)


def test_c09_equilibrium_residence(tmp_path):
    t0 = time.perf_counter()
    c = ExperimentConfig(kind="equilibrium", master_seed=SEED, D=1000, eq_fraction=0.99, n_small=10,
                         n_random_states=20, adversarial=True, threshold=0.9, samples=1000, min_fraction=0.9)
    m = run(c, out_dir=str(tmp_path))
    rows = read_csv(tmp_path / "equilibrium.csv")[1:]
    n_random = sum(r[0] == "random" for r in rows)
    n_adv = len(rows) - n_random
    ok = m.passed and n_random == 20 and n_adv == 10
    detail = f"min equilibrium fraction {m.metrics['min_fraction']:.3f} over {n_random} random + {n_adv} adversarial"
    assert report(9, ok, detail, time.perf_counter() - t0, 600)


def test_c10_reproducible_across_workers(sweep_run, tmp_path):
    out1, _, _ = sweep_run
    t0 = time.perf_counter()
    run(sweep_config(), workers=2, out_dir=str(tmp_path))
    same = (out1 / "sweep.csv").read_bytes() == (tmp_path / "sweep.csv").read_bytes()
    assert report(10, same, "sweep.csv bit-identical for 1 and 2 workers" if same else "sweep.csv differs",
                  time.perf_counter() - t0)


