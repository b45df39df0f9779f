"""Posterior presence-probability surfaces, holdout scoring with Tjur's R2, and comparison tables."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, ROUND_HALF_UP, Decimal
from typing import Optional

import numpy as np

from .errors import SpecificationError, ValidationError
from .geodata import CovariateRaster, GridSpec, PresenceAbsenceDataset, cell_of
from .gp import ExpCovParams, build_nngp_index, nngp_conditional_draw
from .latent import COMPONENTS, kind_slug, model_kind, presence_probability
from .mcmc.archive import PosteriorArchive

ROUNDING = ("half_up", "half_even", "floor", "ceil")


@dataclass(frozen=True)
class PredictionSurface:
    grid: GridSpec
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    level: float = 0.95

    def __post_init__(self):
        if not (len(self.mean) == len(self.lo) == len(self.hi) == self.grid.n_cells):
            raise ValidationError("surface arrays need one value per grid cell")


@dataclass(frozen=True)
class TjurResult:
    mean: float
    interval: tuple
    draws: Optional[np.ndarray] = None


def _check_archive(archive: PosteriorArchive, model, raster: CovariateRaster):
    kind = model_kind(getattr(model, "response", model))
    if kind != archive.model.response:
        raise SpecificationError(
            f"archive holds model ({archive.model.response}), not ({kind})")
    if raster.grid != archive.grid:
        raise SpecificationError("raster grid differs from the grid the archive was fitted on")
    n_alpha = sum(1 for n in archive.draws if n.startswith("alpha["))
    if n_alpha != raster.n_covariates + 1:
        raise SpecificationError(
            f"archive has {n_alpha} alpha coefficients, raster implies {raster.n_covariates + 1}")
    return kind


def _alpha_at_field_draws(archive):
    names = sorted((n for n in archive.draws if n.startswith("alpha[")), key=lambda s: int(s[6:-1]))
    return np.stack([archive.scalar_at_field_draws(n) for n in names], axis=1)


def latent_mean_draws(archive: PosteriorArchive, model, raster: CovariateRaster, sites,
                      seed=0, site_index=None) -> np.ndarray:
    """Draws of E[Z | parameters] at arbitrary sites, one row per stored field draw.

    Covariates and eta are read at the cell containing each site. With
    ``site_index`` (positions into the fitted sites) omega is taken as stored;
    otherwise it is kriged from the stored draw at the fitted sites.
    """
    kind = _check_archive(archive, model, raster)
    comps = COMPONENTS[kind]
    coords = np.asarray(sites, dtype=float).reshape(-1, 2)
    cells = cell_of(coords, raster.grid) if len(coords) else np.zeros(0, np.int64)
    X = raster.design(cells)
    A = _alpha_at_field_draws(archive)
    mu = A @ X.T
    for term in ("eta_pa", "eta_po"):
        if term in comps:
            d = archive.scalar_at_field_draws(f"delta_{term[4:]}")
            mu = mu + d[:, None] * archive.field_draws(term)[:, cells]
    if "omega" in comps:
        om = archive.field_draws("omega")
        if site_index is not None:
            mu = mu + om[:, np.asarray(site_index, dtype=np.int64)]
        else:
            k = int(archive.config.get("k", 15))
            index = build_nngp_index(archive.site_coords, k, archive.config.get("ordering", "lex"))
            s2 = archive.scalar_at_field_draws("sigma2_omega")
            ph = archive.scalar_at_field_draws("phi_omega")
            rng = np.random.default_rng(seed)
            for j in range(len(om)):
                mu[j] += nngp_conditional_draw(index, ExpCovParams(s2[j], ph[j]), om[j], coords,
                                               rng, k=k)
    return mu


def probability_draws(archive, model, raster, sites, seed=0, site_index=None) -> np.ndarray:
    tau2 = float(archive.config.get("tau2", 1.0))
    return presence_probability(latent_mean_draws(archive, model, raster, sites, seed, site_index),
                                tau2)


def predict_surface(archive: PosteriorArchive, model, raster: CovariateRaster, seed=0,
                    level=0.95) -> PredictionSurface:
    """Posterior mean and equal-tailed band of p(s) at every cell centroid."""
    p = probability_draws(archive, model, raster, raster.grid.centroids(), seed)
    lo, hi = np.quantile(p, [(1 - level) / 2, (1 + level) / 2], axis=0)
    mean = p.mean(axis=0)
    # quantile interpolation can overshoot the mean by an ulp on flat columns
    return PredictionSurface(raster.grid, mean, np.minimum(lo, mean), np.maximum(hi, mean), level)


def tjur_r2(p_hat, y, level=0.95) -> TjurResult:
    """Per draw, mean p at the presences minus mean p at the absences.

    ``p_hat`` is (draws, sites) or a single vector of site probabilities.
    """
    y = np.asarray(y).reshape(-1)
    p = np.atleast_2d(np.asarray(p_hat, dtype=float))
    if p.shape[1] != len(y):
        raise ValidationError("p_hat and y disagree on the number of sites")
    ones = y == 1
    if ones.all() or not ones.any():
        raise ValidationError("Tjur R2 needs both presences and absences")
    tr = p[:, ones].mean(axis=1) - p[:, ~ones].mean(axis=1)
    lo, hi = np.quantile(tr, [(1 - level) / 2, (1 + level) / 2])
    return TjurResult(float(tr.mean()), (float(lo), float(hi)), tr)


def _round(x, rule):
    if rule == "floor":
        return math.floor(x)
    if rule == "ceil":
        return math.ceil(x)
    mode = ROUND_HALF_UP if rule == "half_up" else ROUND_HALF_EVEN
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=mode))


def holdout_split(data: PresenceAbsenceDataset, fraction, seed, rounding="half_up"):
    """Random (train, test) partition with ``round(fraction * n)`` test sites.

    Both halves keep the original site order.
    """
    if not 0 < fraction < 1:
        raise ValidationError("holdout fraction must lie strictly between 0 and 1")
    if rounding not in ROUNDING:
        raise ValidationError(f"rounding must be one of {ROUNDING}")
    n = len(data)
    m = _round(fraction * n, rounding)
    if m == 0 or m == n:
        raise ValidationError(f"fraction {fraction} of {n} sites leaves an empty split")
    perm = np.random.default_rng(seed).permutation(n)
    test = np.sort(perm[:m])
    train = np.sort(perm[m:])
    return data.subset(train), data.subset(test)


def holdout_tjur(archive, model, raster, test: PresenceAbsenceDataset, seed=0, level=0.95):
    return tjur_r2(probability_draws(archive, model, raster, test.coords, seed), test.y, level)


def compare_models(results):
    """Rows (model, TjurResult) ordered by decreasing mean TR, ties by model name."""
    rows = [(model_kind(k), r) for k, r in results]
    return sorted(rows, key=lambda kr: (-kr[1].mean, kr[0]))


def write_surface(path, surface: PredictionSurface):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "mean", "lo", "hi"])
        for i in range(surface.grid.n_cells):
            w.writerow([i, repr(float(surface.mean[i])), repr(float(surface.lo[i])),
                        repr(float(surface.hi[i]))])


def write_comparison(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "tr_mean", "tr_lo", "tr_hi"])
        for kind, r in table:
            w.writerow([kind_slug(kind), repr(r.mean), repr(r.interval[0]), repr(r.interval[1])])


def format_comparison(table) -> str:
    lines = [f"{'model':<6} {'TR':>8}  95% interval"]
    for kind, r in table:
        lines.append(f"({kind}){'':<{4 - len(kind)}} {r.mean:8.3f}  [{r.interval[0]:.3f}, {r.interval[1]:.3f}]")
    return "\n".join(lines)
