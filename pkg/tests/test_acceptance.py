"""The eleven acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import record
from rkhm.checks import (algebra_suite, gradient_suite, impact_suite, kme_suite, koopman_suite, module_suite,
                         qr_suite, quantum_suite, suite_descriptors, trace_oracle_suite)
from rkhm.experiments import ExperimentConfig, run_experiment


def _summary(results):
    worst = max(results, key=lambda c: c.worst / c.tolerance if c.tolerance else c.worst)
    return f"{len(results)} checks, tightest {worst.name} worst={worst.worst:.3g} tol={worst.tolerance:g}"


def _failures(results):
    return [c.line() for c in results if not c.passed]


@pytest.fixture(scope="module")
def functional_pca():
    t0 = time.perf_counter()
    report = run_experiment(ExperimentConfig.from_dict({}, command="pca-functional", seed=0))
    return report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def interaction():
    return run_experiment(ExperimentConfig.from_dict({}, command="interaction", seed=0))


def test_criterion_01_algebra_and_module_suites():
    t0 = time.perf_counter()
    results = []
    for i, d in enumerate(suite_descriptors()):
        results += algebra_suite(d, trials=100, seed=10 * i)
        results += module_suite(d, trials=100, seed=10 * i + 1)
    elapsed = time.perf_counter() - t0
    ok = not _failures(results) and elapsed < 60
    record(1, ok, f"{_summary(results)}; {elapsed:.1f} s (< 60 s)")
    assert not _failures(results), _failures(results)
    assert elapsed < 60


def test_criterion_02_gradient_matches_finite_differences():
    results = gradient_suite(trials=50)
    record(2, not _failures(results), _summary(results))
    assert not _failures(results), _failures(results)


def test_criterion_03_descent_monotone_and_flattening(functional_pca):
    report, _ = functional_pca
    assert report.results["n_samples"] == 60
    rows = np.array(report.tables["objective"].rows, dtype=float)
    iters = int(rows[:, 0].max()) + 1
    f = rows[:, 2].reshape(iters, -1)                 # (iteration, grid node)
    increase = float(np.max(f[1:11] - f[:10]))
    first = float(np.max(np.abs(f[1] - f[0])))
    late = float(np.max(np.abs(f[9] - f[8])))
    ok = increase <= 1e-9 and late < first
    record(3, ok, f"max increase {increase:.3g} (<= 1e-9); |f9-f8|={late:.3g} < |f1-f0|={first:.3g}")
    assert increase <= 1e-9
    assert late < first


def test_criterion_04_first_axis_separates_classes(functional_pca):
    report, elapsed = functional_pca
    sep = report.results["separation"]
    ok = sep["within"] < sep["between"] and elapsed < 180
    record(4, ok, f"within {sep['within']:.4g} < between {sep['between']:.4g}; {elapsed:.1f} s (< 180 s)")
    assert sep["within"] < sep["between"]
    assert elapsed < 180


def test_criterion_05_trace_solver_matches_flat_eigendecomposition():
    results = trace_oracle_suite(trials=20, m=2, n=5)
    record(5, not _failures(results), _summary(results))
    assert not _failures(results), _failures(results)


def test_criterion_06_qr_contract():
    results = qr_suite(trials=50)
    record(6, not _failures(results), _summary(results))
    assert not _failures(results), _failures(results)


def test_criterion_07_koopman_exactness():
    results = koopman_suite(periods=(2, 3))
    record(7, not _failures(results), _summary(results))
    assert not _failures(results), _failures(results)


def test_criterion_08_kme_identities():
    results = kme_suite(trials=50)
    record(8, not _failures(results), _summary(results))
    assert not _failures(results), _failures(results)


def test_criterion_09_impact_bound(interaction):
    errs = {a: v["impact_error"] for a, v in interaction.results["alphas"].items()}
    bound_ok = all(v <= float(eps) for e in errs.values() for eps, v in e.items())
    results = impact_suite(trials=20, m=2)
    exact = [c for c in results if c.name == "impact_exact_branch"]
    ok = bound_ok and not _failures(results)
    worst = max(v / float(eps) for e in errs.values() for eps, v in e.items())
    record(9, ok, f"replica worst error/eps {worst:.9f} (<= 1); matrix exact branch worst {exact[0].worst:.3g}")
    assert bound_ok, errs
    assert not _failures(results), _failures(results)


def test_criterion_10_quantum_trace_identity():
    t0 = time.perf_counter()
    results = quantum_suite(trials=100, ms=(2, 3, 4))
    elapsed = time.perf_counter() - t0
    ok = not _failures(results) and elapsed < 10
    record(10, ok, f"{_summary(results)}; {elapsed:.2f} s (< 10 s)")
    assert not _failures(results), _failures(results)
    assert elapsed < 10


def test_criterion_11_nu_kernel_ordering(interaction):
    nu = interaction.results["nu_ordering"]
    assert nu["high_alpha"] == 3.0 and nu["low_alpha"] == 0.5
    ok = nu["high_mean_abs"] > nu["low_mean_abs"]
    record(11, ok, f"mean |nu| alpha=3: {nu['high_mean_abs']:.4g} > alpha=0.5: {nu['low_mean_abs']:.4g}")
    assert ok
