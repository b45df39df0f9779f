import math

import numpy as np
import pytest
from scipy import stats

from prefsdm.errors import SpecificationError, ValidationError
from prefsdm.geodata import GridSpec, cell_of
from prefsdm.gp import ExpCovParams, cov_matrix
from prefsdm.simulate import (
    POSpec,
    ScenarioSpec,
    figure4_scenario,
    fusion_scenario,
    realize_bernoulli_surface,
    simulate_gp_cells,
    simulate_scenario,
)


def test_spec_validation():
    with pytest.raises(SpecificationError):
        ScenarioSpec(design="grid")
    with pytest.raises(SpecificationError):
        ScenarioSpec(response="b")  # omega without parameters
    with pytest.raises(SpecificationError):
        ScenarioSpec(response="e")  # no presence-only layer
    with pytest.raises(SpecificationError):
        ScenarioSpec(alpha=(0.0, 1.0))
    with pytest.raises(ValidationError):
        ScenarioSpec(expected_sites=0.0)


def test_same_seed_same_world():
    a = simulate_scenario(figure4_scenario(), 5)
    b = simulate_scenario(figure4_scenario(), 5)
    np.testing.assert_array_equal(a.pa.coords, b.pa.coords)
    np.testing.assert_array_equal(a.pa.y, b.pa.y)
    c = simulate_scenario(figure4_scenario(), 6)
    assert len(c.pa) != len(a.pa) or not np.array_equal(c.pa.coords, a.pa.coords)


def test_designs_share_the_latent_surface():
    worlds = {d: simulate_scenario(figure4_scenario(design=d), 3) for d in ("random", "clustered", "preferential")}
    eta = worlds["random"].truth.eta_pa
    for w in worlds.values():
        np.testing.assert_array_equal(w.truth.eta_pa, eta)
        assert w.pa.coords.shape[1] == 2


def test_response_is_sign_of_latent():
    sc = simulate_scenario(figure4_scenario(), 1)
    t = sc.truth
    np.testing.assert_array_equal(sc.pa.y, (t.z > 0).astype(int))
    np.testing.assert_array_equal(t.site_cells, cell_of(sc.pa.coords, sc.raster.grid))
    mu = t.params["delta_pa"] * t.eta_pa[t.site_cells]
    np.testing.assert_allclose(t.p, stats.norm.cdf(mu), atol=1e-12)


def test_expected_site_counts():
    n_random = [len(simulate_scenario(figure4_scenario("random"), s).pa) for s in range(40)]
    assert abs(np.mean(n_random) - 200) < 4 * math.sqrt(200 / 40)
    n_pref = [len(simulate_scenario(figure4_scenario(), s).pa) for s in range(40)]
    # LGCP counts are overdispersed, so only check the scale
    assert 100 < np.mean(n_pref) < 300


def test_literal_intercept_is_dense():
    spec = figure4_scenario(expected_sites=None, grid=GridSpec.regular(4.0, 4.0, 8, 8))
    sc = simulate_scenario(spec, 0)
    assert sc.truth.params["beta_pa"][0] == 3.0
    assert len(sc.pa) > 16 * math.exp(3.0) * 0.1


def test_preferential_sites_follow_eta():
    tot = []
    for s in range(10):
        sc = simulate_scenario(figure4_scenario(), s)
        eta = sc.truth.eta_pa
        tot.append(eta[sc.truth.site_cells].mean() - eta.mean())
    assert np.mean(tot) > 1.0  # sites concentrate where eta is high


def test_gp_cells_covariance():
    grid = GridSpec.regular(2.0, 1.0, 2, 1)
    p = ExpCovParams(1.5, 0.7)
    rng = np.random.default_rng(0)
    d = np.array([simulate_gp_cells(grid, p, rng) for _ in range(20000)])
    K = cov_matrix(grid.centroids(), grid.centroids(), p)
    np.testing.assert_allclose(np.cov(d.T), K, atol=0.06)


def test_fusion_layers_and_events():
    sc = simulate_scenario(fusion_scenario(), 2)
    q = sc.layers.q.reshape(20, 20)
    assert q[:, :5].sum() == 0 and q[:, 5:].min() == 1
    cols = (sc.po.coords[:, 0] // 0.5).astype(int)
    assert len(sc.po) > 0 and cols.min() >= 5
    assert sc.truth.params["delta_po"] == 0.8
    mu = 0.8 * sc.truth.eta_po[sc.truth.site_cells]
    np.testing.assert_allclose(sc.truth.p, stats.norm.cdf(mu), atol=1e-12)


def test_fusion_po_spec_override():
    spec = fusion_scenario(po=POSpec(delta=0.0, unsampled_fraction=0.0))
    sc = simulate_scenario(spec, 0)
    assert sc.layers.q.min() == 1.0


def test_bernoulli_surface():
    p = np.array([0.0, 1.0, 0.5])
    a = realize_bernoulli_surface(p, 7)
    assert a[0] == 0 and a[1] == 1
    np.testing.assert_array_equal(a, realize_bernoulli_surface(p, 7))
    many = realize_bernoulli_surface(np.full(100_000, 0.3), 1)
    assert many.mean() == pytest.approx(0.3, abs=0.006)
    with pytest.raises(ValidationError):
        realize_bernoulli_surface([1.2], 0)
