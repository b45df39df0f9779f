import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefsdm.errors import SpecificationError, ValidationError
from prefsdm.geodata import CovariateRaster, GridSpec
from prefsdm.gp import ExpCovParams
from prefsdm.latent import (
    COMPONENTS,
    ResponseModelSpec,
    draw_truncated_z,
    kind_slug,
    linear_predictor,
    model_kind,
    presence_probability,
)

GRID = GridSpec.regular(2.0, 2.0, 2, 2)
RASTER = CovariateRaster(GRID, ("w",), [[0.5], [-1.0], [2.0], [0.0]])
SITES = np.array([[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.2, 1.9]])  # cells 0, 1, 2, 3
OMEGA_P = ExpCovParams(1.0, 1.0)


def spec(kind, alpha=(0.0, 0.0), **kw):
    comps = COMPONENTS[model_kind(kind)]
    kw.setdefault("delta_pa", 1.0 if "eta_pa" in comps else None)
    kw.setdefault("delta_po", 1.0 if "eta_po" in comps else None)
    kw.setdefault("omega_params", OMEGA_P if "omega" in comps else None)
    return ResponseModelSpec(kind, alpha, **kw)


def test_kind_names():
    assert model_kind("(c)") == "c" and model_kind("cp") == "c'" and model_kind("d_prime") == "d'"
    assert kind_slug("c'") == "cp"
    with pytest.raises(SpecificationError):
        model_kind("g")
    with pytest.raises(SpecificationError):
        ResponseModelSpec("d", [0.0, 0.0])  # missing delta_pa
    with pytest.raises(SpecificationError):
        ResponseModelSpec("a", [0.0, 0.0], delta_pa=1.0)


def test_linear_predictor_examples():
    assert linear_predictor(spec("a"), SITES, RASTER).tolist() == [0, 0, 0, 0]
    eta = np.array([2.0, 0.0, 0.0, 0.0])
    assert linear_predictor(spec("d"), SITES[:1], RASTER, eta_pa=eta).tolist() == [2.0]
    # model f, hand arithmetic: 0.3 + 0.5 * w + 1.5 eta_pa + 0.8 eta_po + omega
    s = spec("f", (0.3, 0.5), delta_pa=1.5, delta_po=0.8)
    eta_pa = np.array([1.0, 2.0, -1.0, 0.0])
    eta_po = np.array([0.5, 0.0, 1.0, -2.0])
    omega = np.array([0.1, 0.2, 0.3, 0.4])
    want = [0.3 + 0.25 + 1.5 + 0.4 + 0.1,
            0.3 - 0.5 + 3.0 + 0.0 + 0.2,
            0.3 + 1.0 - 1.5 + 0.8 + 0.3,
            0.3 + 0.0 + 0.0 - 1.6 + 0.4]
    got = linear_predictor(s, SITES, RASTER, omega, eta_pa, eta_po)
    np.testing.assert_allclose(got, want, atol=1e-14)
    with pytest.raises(SpecificationError):
        linear_predictor(s, SITES, RASTER, omega, eta_pa)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nested_models_reduce(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=2)
    om, ep, eo = rng.normal(size=4), rng.normal(size=4), rng.normal(size=4)
    b = linear_predictor(spec("b", a), SITES, RASTER, omega=om)
    for kind in ("c", "c'", "f"):
        s = spec(kind, a, **({"delta_pa": 0.0} if "eta_pa" in COMPONENTS[kind] else {}),
                 **({"delta_po": 0.0} if "eta_po" in COMPONENTS[kind] else {}))
        np.testing.assert_array_equal(linear_predictor(s, SITES, RASTER, om, ep, eo), b)
    base = linear_predictor(spec("a", a), SITES, RASTER)
    np.testing.assert_array_equal(linear_predictor(spec("d", a, delta_pa=0.0), SITES, RASTER, eta_pa=ep), base)
    np.testing.assert_array_equal(
        linear_predictor(spec("e", a, delta_pa=0.0, delta_po=0.0), SITES, RASTER, eta_pa=ep, eta_po=eo), base)


def test_presence_probability_examples():
    assert presence_probability(0.0) == 0.5
    assert presence_probability(1.959964) == pytest.approx(0.975, abs=1e-7)
    assert presence_probability(-1e6) == 0.0
    assert presence_probability(2.0, tau2=4.0) == pytest.approx(presence_probability(1.0))
    with pytest.raises(ValidationError):
        presence_probability(0.0, tau2=0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-30, 30), st.floats(1e-3, 5))
def test_presence_probability_symmetry_and_monotone(m, d):
    assert presence_probability(-m) == pytest.approx(1 - presence_probability(m), abs=1e-15)
    if presence_probability(m) < 1:
        assert presence_probability(m + d) >= presence_probability(m)


def test_truncated_half_normal_mean():
    rng = np.random.default_rng(42)
    z = draw_truncated_z(np.zeros(100_000), 1.0, np.ones(100_000), rng)
    se = math.sqrt((1 - 2 / math.pi) / len(z))
    assert abs(z.mean() - math.sqrt(2 / math.pi)) < 3 * se


def test_truncated_sign_constraint_million_draws():
    rng = np.random.default_rng(7)
    n = 1_000_000
    mean = rng.normal(0, 10, n)
    y = rng.integers(0, 2, n)
    z = draw_truncated_z(mean, 1.0, y, rng)
    assert np.all(z[y == 1] > 0) and np.all(z[y == 0] <= 0)


def test_truncated_far_tails_finite():
    rng = np.random.default_rng(1)
    for m, y in ((-6.0, 1), (-40.0, 1), (-1e4, 1), (6.0, 0), (40.0, 0), (1e4, 0)):
        z = draw_truncated_z(np.full(1000, m), 1.0, np.full(1000, y), rng)
        assert np.all(np.isfinite(z))
        assert np.all(z > 0) if y else np.all(z <= 0)
    z = draw_truncated_z(np.full(20000, -6.0), 1.0, np.ones(20000), rng)
    # beyond the bound the excess is close to exponential with rate |bound|
    assert z.mean() == pytest.approx(1 / 6.0, rel=0.1)
    assert isinstance(draw_truncated_z(0.0, 1.0, 1, rng), float)
