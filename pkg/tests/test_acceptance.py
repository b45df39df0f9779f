"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict that is printed in the "acceptance
criteria" section at the end of the pytest run. The replicate studies
(criteria 4 to 7) take most of the time; they are marked ``slow`` but are part
of the default run.
"""
import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import poisson

import geweke
from conftest import record
from prefsdm import cli
from prefsdm.evaluate import holdout_split, holdout_tjur
from prefsdm.geodata import CovariateRaster, DegradationLayers, GridSpec, block_average
from prefsdm.gp import ExpCovParams, build_nngp_index, cov_matrix, full_gp_logpdf, nngp_logpdf
from prefsdm.mcmc import ChainConfig, ModelSpec, PriorSpec, fit
from prefsdm.pointprocess import IntensityModelSpec, lgcp_grid_loglik, prob_at_least_one
from prefsdm.simulate import figure4_scenario, fusion_scenario, realize_bernoulli_surface, simulate_scenario

N_REPLICATES = 20
NEEDED = 16


# 1 -------------------------------------------------------------------------------

def test_criterion_01_nngp_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_abs, worst_rel = 0.0, 0.0
    for _ in range(50):
        n = int(rng.integers(20, 201))
        sites = rng.uniform(0, 5, (n, 2))
        p = ExpCovParams(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))
        vals = np.linalg.cholesky(cov_matrix(sites, sites, p) + 1e-10 * np.eye(n)) @ rng.normal(size=n)
        full = full_gp_logpdf(vals, p, sites=sites)
        exact = nngp_logpdf(vals, build_nngp_index(sites, k=n - 1), p)
        approx = nngp_logpdf(vals, build_nngp_index(sites, k=15), p)
        worst_abs = max(worst_abs, abs(exact - full))
        worst_rel = max(worst_rel, abs(approx - full) / abs(full))
    elapsed = time.perf_counter() - t0
    ok = worst_abs <= 1e-8 and worst_rel <= 0.02 and elapsed < 60
    record(1, ok, f"k=n-1 max abs err {worst_abs:.1e} (<=1e-8); k=15 max rel err "
                  f"{worst_rel:.2%} (<=2%); {elapsed:.0f}s (<60s)")
    assert ok


# 2 -------------------------------------------------------------------------------

def test_criterion_02_lgcp_likelihood_oracle():
    grid = GridSpec.regular(2.0, 2.0, 2, 2)
    raster = CovariateRaster.empty(grid)
    worst = 0.0
    n_cases = 0
    for lam in (0.1, 1.0, 10.0):
        spec = IntensityModelSpec("nhpp", [math.log(lam)])
        for counts in itertools.product(range(4), repeat=4):
            got = lgcp_grid_loglik(spec, raster, counts)
            # Poisson log mass with mean |A| lam, minus the dropped constant log n! - n log|A|
            want = sum(poisson.logpmf(n, lam * a) + math.lgamma(n + 1) - n * math.log(a)
                       for n, a in zip(counts, grid.cell_areas()))
            worst = max(worst, abs(got - want))
            n_cases += 1
    ok = worst <= 1e-12
    record(2, ok, f"{n_cases} configurations, max abs err {worst:.1e} (<=1e-12)")
    assert ok


# 3 -------------------------------------------------------------------------------

def test_criterion_03_geweke_model_b():
    t0 = time.perf_counter()
    res = geweke.run(geweke.Problem("b", n_sites=30), 10_000, 10_000, seed=3)
    elapsed = time.perf_counter() - t0
    keys = ("alpha0", "alpha0_sq", "omega_sigma2")
    worst = max(abs(res[k][0]) for k in keys)
    ok = worst < 3 and elapsed < 600
    zs = ", ".join(f"{k} {res[k][0]:+.2f}" for k in res)
    record(3, ok, f"max |z| over alpha, sigma2_omega {worst:.2f} (<3); all z: {zs}; {elapsed:.0f}s")
    assert ok


# 4 and 5 -------------------------------------------------------------------------

def _delta_study(delta):
    rows = []
    t0 = time.perf_counter()
    for r in range(N_REPLICATES):
        sc = simulate_scenario(figure4_scenario(delta=delta), r)
        arch = fit(ModelSpec("d"), sc.pa, sc.raster,
                   chain=ChainConfig(burn_in=20_000, keep=20_000, seed=r))
        rows.append(arch.summary("delta_pa"))
    return rows, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_04_preferential_recovery():
    rows, elapsed = _delta_study(1.0)
    cover = sum(lo <= 1.0 <= hi for _, lo, hi in rows)
    excl = sum(lo > 0 or hi < 0 for _, lo, hi in rows)
    ok = cover >= NEEDED and excl >= NEEDED and elapsed < 3600
    misses = [f"r{r} [{lo:.2f}, {hi:.2f}]" for r, (_, lo, hi) in enumerate(rows) if not lo <= 1.0 <= hi]
    record(4, ok, f"excludes 0 in {excl}/20, covers 1 in {cover}/20 (need {NEEDED} each); "
                  f"{elapsed / 60:.0f} min (<60); misses: {', '.join(misses) or 'none'}")
    assert ok


@pytest.mark.slow
def test_criterion_05_null_calibration():
    rows, elapsed = _delta_study(0.0)
    cover = sum(lo <= 0.0 <= hi for _, lo, hi in rows)
    ok = cover >= NEEDED
    record(5, ok, f"interval contains 0 in {cover}/20 (need {NEEDED}); {elapsed / 60:.0f} min")
    assert ok


# 6 -------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_06_holdout_tjur_ordering():
    # TR is undefined on a single-class holdout; with ~93% presences a 20% split
    # is occasionally all presences, so such worlds are passed over
    kinds = ("a", "b", "c", "d")
    tr = {k: [] for k in kinds}
    chain = ChainConfig(burn_in=5000, keep=5000)
    seed, skipped = 100, []
    while len(tr["a"]) < N_REPLICATES:
        sc = simulate_scenario(figure4_scenario(), seed)
        train, test = holdout_split(sc.pa, 0.2, seed)
        if test.y.min() == test.y.max():
            skipped.append(seed)
            seed += 1
            continue
        for k in kinds:
            arch = fit(ModelSpec(k), train, sc.raster, chain=replace(chain, seed=seed))
            tr[k].append(holdout_tjur(arch, k, sc.raster, test, seed=seed).mean)
        seed += 1
    m = {k: float(np.mean(v)) for k, v in tr.items()}
    ok = m["d"] >= m["a"] and m["c"] >= m["b"] - 0.02
    record(6, ok, "mean holdout TR " + ", ".join(f"({k}) {m[k]:.3f}" for k in kinds)
                  + f"; need (d) >= (a) and (c) >= (b) - 0.02; single-class holdouts skipped: "
                  f"{skipped or 'none'}")
    assert ok


# 7 -------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_07_fusion_coupling():
    # the default half-normal-style truncation makes every interval exclude 0 by
    # construction, so the check runs with delta_PO unconstrained
    priors = PriorSpec(delta_po_truncated=False)
    good = 0
    rows = []
    for r in range(N_REPLICATES):
        sc = simulate_scenario(fusion_scenario(delta_po=0.8), r)
        arch = fit(ModelSpec("e"), sc.pa, sc.raster, sc.po, sc.layers, priors=priors,
                   chain=ChainConfig(burn_in=10_000, keep=10_000, seed=r))
        m, lo, hi = arch.summary("delta_po")
        rows.append((m, lo, hi))
        good += m > 0 and lo > 0
    ok = good >= NEEDED
    record(7, ok, f"delta_PO mean > 0 with interval excluding 0 in {good}/20 (need {NEEDED}); "
                  f"mean of posterior means {np.mean([m for m, _, _ in rows]):.2f} (truth 0.8)")
    assert ok


# 8 -------------------------------------------------------------------------------

def test_criterion_08_degradation_identities():
    grid = GridSpec.regular(3.0, 3.0, 3, 3)
    raster = CovariateRaster.empty(grid)
    rng = np.random.default_rng(8)
    bit_exact = True
    for _ in range(200):
        spec = IntensityModelSpec("lgcp", [rng.normal()], rng.normal(size=9))
        counts = rng.integers(0, 5, 9)
        bit_exact &= lgcp_grid_loglik(spec, raster, counts, DegradationLayers.ones(9)) == \
            lgcp_grid_loglik(spec, raster, counts)
    spec = IntensityModelSpec("lgcp", [0.3], rng.normal(size=9))
    q = np.ones(9)
    q[4] = 0.0
    lay = DegradationLayers(np.ones(9), q)
    counts = np.array([1, 0, 2, 0, 0, 1, 0, 3, 0])
    with_zero = lgcp_grid_loglik(spec, raster, counts, lay)
    # the q = 0 cell must add exactly nothing: compare with the other eight cells alone
    others = [i for i in range(9) if i != 4]
    sub = GridSpec.regular(8.0, 1.0, 8, 1)
    sub_spec = IntensityModelSpec("lgcp", [0.3], spec.eta[others])
    alone = lgcp_grid_loglik(sub_spec, CovariateRaster.empty(sub), counts[others])
    zero_exact = with_zero == alone
    counts[4] = 1
    impossible = lgcp_grid_loglik(spec, raster, counts, lay) == -np.inf
    ok = bit_exact and zero_exact and impossible
    record(8, ok, f"ones layers bit-exact {bit_exact}; q=0 empty cell adds exactly 0 {zero_exact}; "
                  f"q=0 with events gives -inf {impossible}")
    assert ok


# 9 -------------------------------------------------------------------------------

def test_criterion_09_block_average_identities():
    rng = np.random.default_rng(9)
    p = rng.beta(2, 3, 10_000)
    y = realize_bernoulli_surface(p, 9)
    sd = math.sqrt(float((p * (1 - p)).sum())) / len(p)
    z = (block_average(y) - block_average(p)) / sd
    g1 = GridSpec.regular(1.0, 1.0, 1, 1)
    half = prob_at_least_one(IntensityModelSpec("nhpp", [math.log(math.log(2))]),
                             CovariateRaster.empty(g1), [0])
    ok = abs(z) <= 3 and abs(half - 0.5) <= 1e-12
    record(9, ok, f"MC block average z = {z:+.2f} (|z|<=3); P(N>=1 | lambda(A)=ln 2) - 0.5 = "
                  f"{half - 0.5:.1e}")
    assert ok


# 10 ------------------------------------------------------------------------------

def test_criterion_10_fit_determinism(tmp_path):
    import filecmp
    import os

    sim = tmp_path / "sim"
    assert cli.main(["simulate", "--figure4", "--seed", "10", "--out", str(sim)]) == 0
    outs = [tmp_path / "fit1", tmp_path / "fit2"]
    for out in outs:
        assert cli.main(["fit", "--pa", str(sim / "pa.csv"), "--raster", str(sim / "raster.csv"),
                         "--model", "d", "--burn-in", "300", "--keep", "300", "--chains", "2",
                         "--seed", "5", "--out", str(out)]) == 0
    names = sorted(os.listdir(outs[0]))
    same_names = names == sorted(os.listdir(outs[1]))
    _, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
    ok = same_names and not mismatch and not errors
    record(10, ok, f"{len(names)} archive files, byte-identical: {ok}")
    assert ok
