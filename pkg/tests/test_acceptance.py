"""Acceptance criteria for the default lunar constellation, one test per criterion.

Each test prints a PASS/FAIL line; the lines are also collected into a
summary section at the end of the pytest run.
"""
import csv
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from lunar_doppler.constants import GM_MOON, SPEED_OF_LIGHT
from lunar_doppler.doppler import read_series_csv, visibility_windows
from lunar_doppler.gmm import EmConfig, GmmParams, fit_em, gmm_pdf, match_components
from lunar_doppler.metrics import kl_divergence, wmrd

pytestmark = pytest.mark.slow

A = 1837.4
V_CIRC = math.sqrt(GM_MOON / A)
PERIOD_MIN = 2 * math.pi * math.sqrt(A**3 / GM_MOON) / 60

NEAREST_ISL_MIXTURE = GmmParams.normalized(
    [0.2288, 0.2229, 0.2913, 0.1309, 0.1260],
    [-0.066, 0.0660, -0.0011, -0.0918, 0.0917],
    [2.5677e-4, 2.65e-4, 8.7808e-4, 8.9384e-6, 9.2748e-6],
)


def analytic_isl_bound(delta_inc_deg: float) -> float:
    return 2 * V_CIRC * math.sin(math.radians(delta_inc_deg) / 2) / SPEED_OF_LIGHT * 1e6


def isl(run, n: int):
    return read_series_csv(run.sim / "isl" / f"LLO-1_LLO-{n}.csv")


def gs(run, n: int):
    return read_series_csv(run.sim / "gs" / f"LLO-{n}_LSP.csv")


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


def mixture_mass(params: GmmParams) -> float:
    # Trapezoid over the union of dense per-component grids, so narrow spikes are resolved.
    sd = np.sqrt(params.variances)
    grids = [np.linspace(m - 12 * s, m + 12 * s, 4001) for m, s in zip(params.means, sd)]
    span = np.linspace((params.means - 12 * sd).min(), (params.means + 12 * sd).max(), 20001)
    x = np.unique(np.concatenate(grids + [span]))
    return float(trapezoid(gmm_pdf(params, x), x))


def test_criterion_01_nearest_isl_extreme(default_run, acceptance_report):
    peak = float(np.max(np.abs(isl(default_run, 2).ppm)))
    oracle = analytic_isl_bound(1.0)
    ok = within(peak, 0.0953, 0.03) and within(peak, oracle, 0.01)
    acceptance_report(1, ok, f"LLO-1/LLO-2 max|ppm| = {peak:.5f} (target 0.0953 +-3%, analytic {oracle:.5f})")
    assert ok


def test_criterion_02_farthest_isl_extreme(default_run, acceptance_report):
    peak = float(np.max(np.abs(isl(default_run, 21).ppm)))
    oracle = analytic_isl_bound(20.0)
    ok = within(peak, 1.8934, 0.03) and within(peak, oracle, 0.01)
    acceptance_report(2, ok, f"LLO-1/LLO-21 max|ppm| = {peak:.5f} (target 1.8934 +-3%, analytic {oracle:.5f})")
    assert ok


def test_criterion_03_spread_grows_with_inclination_gap(default_run, acceptance_report):
    peaks = np.array([np.max(np.abs(isl(default_run, n).ppm)) for n in range(2, 22)])
    ok = bool(np.all(np.diff(peaks) > 0))
    acceptance_report(3, ok, f"max|ppm| LLO-2..LLO-21 strictly increasing: {peaks[0]:.4f} .. {peaks[-1]:.4f}")
    assert ok


def test_criterion_04_ground_station_extremes(default_run, acceptance_report):
    worst = 0.0
    lo_all, hi_all = [], []
    for n in range(1, 22):
        vis = gs(default_run, n).visible_ppm()
        lo, hi = float(vis.min()), float(vis.max())
        lo_all.append(lo)
        hi_all.append(hi)
        worst = max(worst, abs(abs(lo) - 5.45) / 5.45, abs(hi - 5.45) / 5.45)
    ok = worst <= 0.02 and min(hi_all) > 0 > max(lo_all)
    acceptance_report(4, ok, f"visible GS extremes in [{min(lo_all):.4f}, {max(hi_all):.4f}], "
                             f"worst deviation from 5.45 = {100 * worst:.2f}% (limit 2%)")
    assert ok


def test_criterion_05_pass_structure(default_run, acceptance_report):
    durations, spacings = [], []
    counts = {}
    for n in range(1, 22):
        windows = visibility_windows(gs(default_run, n))
        counts[n] = len(windows)
        durations += [(end - start) / 60 for start, end in windows]
        mids = np.array([(start + end) / 2 for start, end in windows]) / 60
        spacings += np.diff(mids).tolist()
    ok = (all(9 <= d <= 14 for d in durations) and all(abs(s - 117.8) <= 1 for s in spacings)
          and counts[1] == 12)
    acceptance_report(5, ok, f"windows {min(durations):.1f}-{max(durations):.1f} min, spacing "
                             f"{min(spacings):.1f}-{max(spacings):.1f} min (period {PERIOD_MIN:.2f}), "
                             f"LLO-1 windows = {counts[1]}")
    assert ok


def test_criterion_06_worked_instant(default_run, acceptance_report):
    series = isl(default_run, 21)
    value = float(series.ppm[np.flatnonzero(series.t == 8840.0)[0]])
    ok = abs(value - 0.0078) <= 0.01
    acceptance_report(6, ok, f"LLO-1/LLO-21 ppm at t=8840 s = {value:.6f} (target 0.0078 +-0.01)")
    assert ok


def test_criterion_07_gmm_recovery(acceptance_report):
    passes = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        comp = rng.choice(5, size=100_000, p=NEAREST_ISL_MIXTURE.weights)
        x = rng.normal(NEAREST_ISL_MIXTURE.means[comp], np.sqrt(NEAREST_ISL_MIXTURE.variances[comp]))
        fitted, _ = fit_em(x, 5, EmConfig(seed=seed))
        fitted = fitted.permuted(match_components(NEAREST_ISL_MIXTURE, fitted))
        passes.append(bool(
            np.all(np.abs(fitted.means - NEAREST_ISL_MIXTURE.means) <= 0.01)
            and np.all(np.abs(fitted.weights - NEAREST_ISL_MIXTURE.weights) <= 0.03)
            and np.all(np.abs(fitted.variances / NEAREST_ISL_MIXTURE.variances - 1) <= 0.2)
        ))
    ok = sum(passes) >= 8
    acceptance_report(7, ok, f"recovered generator on {sum(passes)}/10 seeds (need >= 8)")
    assert ok


def test_criterion_08_em_properties(acceptance_report):
    rng = np.random.default_rng(20240601)
    failures = []
    worst_mass = 0.0
    for i in range(200):
        m = int(rng.integers(50, 5001))
        k = int(rng.integers(1, 9))
        k_true = int(rng.integers(1, 9))
        gen = GmmParams.normalized(rng.uniform(0.1, 1.0, k_true), rng.uniform(-3, 3, k_true),
                                   rng.uniform(0.01, 1.0, k_true) ** 2)
        comp = rng.choice(k_true, size=m, p=gen.weights)
        x = rng.normal(gen.means[comp], np.sqrt(gen.variances[comp]))
        params, trace = fit_em(x, k, EmConfig(seed=i, restarts=1))
        mass = mixture_mass(params)
        worst_mass = max(worst_mass, abs(mass - 1))
        if not (trace.is_monotonic(1e-9) and abs(params.weights.sum() - 1) <= 1e-12
                and abs(mass - 1) <= 1e-6):
            failures.append(i)
    ok = not failures
    acceptance_report(8, ok, f"200 random fits: {len(failures)} violations, "
                             f"worst |integral - 1| = {worst_mass:.2e}")
    assert ok


def test_criterion_09_metric_oracles(acceptance_report):
    hand = [
        abs(wmrd([0.3, 0.7], [0.3, 0.7]) - 0.0),
        abs(wmrd([1.0, 0.0], [0.0, 1.0]) - 2.0),
        abs(wmrd([0.6, 0.4], [0.5, 0.5]) - 0.2),
        abs(kl_divergence([0.3, 0.7], [0.3, 0.7]) - 0.0),
        abs(kl_divergence([0.5, 0.5], [0.25, 0.75]) - (0.5 * math.log(2) + 0.5 * math.log(2 / 3))),
    ]
    rng = np.random.default_rng(9)
    n = rng.integers(2, 60, size=10_000)
    kls = np.array([kl_divergence(rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))) for k in n])
    ok = max(hand) <= 1e-12 and bool(np.all(kls >= 0))
    acceptance_report(9, ok, f"worst hand-example error {max(hand):.1e}, min KL over 1e4 pairs "
                             f"{kls.min():.3e}")
    assert ok


def test_criterion_10_table_ranges(default_run, acceptance_report):
    with open(default_run.eval / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    isl_rows = [r for r in rows if r["link_id"] != "ALL"]
    w = np.array([float(r["wmrd"]) for r in isl_rows])
    d = np.array([float(r["kl_divergence"]) for r in rows])
    ok = len(isl_rows) == 20 and bool(np.all((w >= 0.3) & (w <= 1.0)) and np.all((d >= 0.005) & (d <= 5.0)))
    acceptance_report(10, ok, f"ISL WMRD in [{w.min():.4f}, {w.max():.4f}] (need [0.3, 1.0]); "
                              f"KL in [{d.min():.4f}, {d.max():.4f}] (need [0.005, 5.0])")
    assert ok


def test_criterion_11_pipeline_budget_and_determinism(default_run, default_rerun, acceptance_report):
    def tree(root):
        return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    first, second = tree(default_run.root), tree(default_rerun.root)
    csvs = [name for name in first if name.startswith(("sim/isl/", "sim/gs/"))]
    ok = default_run.seconds < 300 and first == second and len(csvs) == 41
    acceptance_report(11, ok, f"pipeline {default_run.seconds:.1f} s (limit 300), {len(first)} files, "
                              f"byte-identical rerun: {first == second}")
    assert ok
