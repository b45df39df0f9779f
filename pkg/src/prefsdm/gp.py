"""Exponential-covariance Gaussian processes: exact and nearest-neighbor densities, kriging."""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from . import _kernels
from .errors import NumericalError, ValidationError

JITTER_STEPS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class ExpCovParams:
    """C(s, s') = sigma2 * exp(-phi * |s - s'|)."""

    sigma2: float
    phi: float

    def __post_init__(self):
        for name in ("sigma2", "phi"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class GPField:
    sites: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=float).reshape(-1, 2)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(sites) != len(values):
            raise ValidationError("a GP field needs one value per site")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", values)


def cov(loc_a, loc_b, params: ExpCovParams) -> float:
    d = math.hypot(loc_a[0] - loc_b[0], loc_a[1] - loc_b[1])
    return params.sigma2 * math.exp(-params.phi * d)


def cov_matrix(a, b, params: ExpCovParams) -> np.ndarray:
    return params.sigma2 * np.exp(-params.phi * cdist(np.atleast_2d(a), np.atleast_2d(b)))


def _as_field(field, sites=None):
    if isinstance(field, GPField):
        return field.sites, field.values
    return np.asarray(sites, dtype=float).reshape(-1, 2), np.asarray(field, dtype=float).reshape(-1)


def _chol_with_jitter(K, sigma2):
    for step in JITTER_STEPS:
        try:
            c = cho_factor(K + step * sigma2 * np.eye(len(K)), lower=True)
            return c
        except LinAlgError:
            continue
    raise NumericalError("covariance factorization failed after maximum jitter",
                         condition=float(np.linalg.cond(K)))


def full_gp_logpdf(field, params: ExpCovParams, mean=0.0, nugget=0.0, sites=None) -> float:
    """Multivariate normal log density of the field under ``C + nugget * I``.

    Coincident sites with zero nugget make the covariance exactly singular and
    raise :class:`NumericalError`; jitter only absorbs round-off.
    """
    sites, values = _as_field(field, sites)
    n = len(values)
    resid = values - np.broadcast_to(np.asarray(mean, dtype=float), values.shape)
    if nugget == 0 and n > 1:
        d = cdist(sites, sites)
        d[np.diag_indices(n)] = np.inf
        if (d == 0).any():
            raise NumericalError("coincident sites give a singular covariance", condition=float("inf"))
    K = cov_matrix(sites, sites, params) + nugget * np.eye(n)
    c = _chol_with_jitter(K, params.sigma2)
    alpha = cho_solve(c, resid)
    logdet = 2.0 * np.log(np.diag(c[0])).sum()
    return float(-0.5 * (n * math.log(2 * math.pi) + logdet + resid @ alpha))


@dataclass(frozen=True, eq=False)
class NNGPIndex:
    coords: np.ndarray
    ordering: np.ndarray
    neighbors: np.ndarray
    n_neighbors: np.ndarray
    k: int
    ordering_rule: str = "lex"

    @property
    def n(self):
        return len(self.coords)

    def neighbor_sets(self):
        """Neighbor sets listed by ordered position, as original site labels."""
        return [self.neighbors[i, : self.n_neighbors[i]].copy() for i in self.ordering]

    @property
    def children(self):
        """CSR arrays (ptr, child, position) listing where each site is used as a neighbor."""
        cached = self.__dict__.get("_children")
        if cached is None:
            n = self.n
            rows, pos = np.nonzero(np.arange(self.neighbors.shape[1])[None, :] < self.n_neighbors[:, None])
            parents = self.neighbors[rows, pos]
            order = np.lexsort((rows, parents))
            ptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(ptr, parents + 1, 1)
            cached = (np.cumsum(ptr), rows[order].astype(np.int64), pos[order].astype(np.int64))
            self.__dict__["_children"] = cached
        return cached


def _maxmin_order(coords):
    n = len(coords)
    first = int(np.argmin(((coords - coords.mean(0)) ** 2).sum(1)))
    order = [first]
    dmin = np.sqrt(((coords - coords[first]) ** 2).sum(1))
    dmin[first] = -1.0
    for _ in range(n - 1):
        nxt = int(np.argmax(dmin))
        order.append(nxt)
        dmin = np.minimum(dmin, np.sqrt(((coords - coords[nxt]) ** 2).sum(1)))
        dmin[order] = -1.0
    return np.asarray(order, dtype=np.int64)


def _index_key(coords, k, rule):
    h = hashlib.sha256(np.ascontiguousarray(coords, dtype=float).tobytes())
    h.update(f"{k}:{rule}".encode())
    return h.hexdigest()[:24]


def build_nngp_index(sites, k=15, ordering_rule="lex", cache_dir=None) -> NNGPIndex:
    """Order the sites and give each one its ``k`` nearest predecessors.

    ``ordering_rule`` is ``"lex"`` (sort on x, then y) or ``"maxmin"``.
    Distance ties between candidate neighbors go to the earlier position.
    """
    coords = np.asarray(getattr(sites, "sites", sites), dtype=float).reshape(-1, 2)
    k = int(k)
    if k < 0:
        raise ValidationError("neighbor count must be nonnegative")
    n = len(coords)
    if n and len(np.unique(coords, axis=0)) != n:
        raise ValidationError("NNGP sites must be distinct")
    cache_file = None
    if cache_dir is not None:
        cache_file = os.path.join(cache_dir, f"nngp-{_index_key(coords, k, ordering_rule)}.npz")
        if os.path.exists(cache_file):
            z = np.load(cache_file)
            return NNGPIndex(coords, z["ordering"], z["neighbors"], z["n_neighbors"], k, ordering_rule)
    if ordering_rule == "lex":
        ordering = np.lexsort((coords[:, 1], coords[:, 0])).astype(np.int64)
    elif ordering_rule == "maxmin":
        ordering = _maxmin_order(coords) if n else np.zeros(0, np.int64)
    else:
        raise ValidationError(f"unknown ordering rule {ordering_rule!r}")
    nbr = np.full((n, k), -1, dtype=np.int64)
    nnc = np.zeros(n, dtype=np.int64)
    oc = coords[ordering]
    for j in range(1, n):
        m = min(j, k)
        if m == 0:
            continue
        d = ((oc[:j] - oc[j]) ** 2).sum(1)
        if m < j:
            # keep every tie at the m-th distance, then break ties on position
            cand = np.flatnonzero(d <= np.partition(d, m - 1)[m - 1])
        else:
            cand = np.arange(j)
        sel = cand[np.lexsort((cand, d[cand]))][:m]
        i = ordering[j]
        nbr[i, :m] = ordering[sel]
        nnc[i] = m
    index = NNGPIndex(coords, ordering, nbr, nnc, k, ordering_rule)
    if cache_file is not None:
        os.makedirs(cache_dir, exist_ok=True)
        np.savez(cache_file, ordering=ordering, neighbors=nbr, n_neighbors=nnc)
    return index


def nngp_factors(index: NNGPIndex, params: ExpCovParams, nugget=0.0):
    """Kriging weights ``B`` and conditional variances ``F`` for every site."""
    B, F, status = _kernels.nngp_factors(index.coords, index.neighbors, index.n_neighbors,
                                         params.sigma2, params.phi, float(nugget))
    if status >= 0:
        raise NumericalError(f"conditional variance at site {status} is not positive after jitter")
    return B, F


def nngp_logpdf(field, index: NNGPIndex, params: ExpCovParams, mean=0.0, nugget=0.0) -> float:
    """Sum of univariate conditional log densities, each site given its neighbor set."""
    _, values = _as_field(field, index.coords)
    if len(values) != index.n:
        raise ValidationError("field and index have different numbers of sites")
    resid = values - np.broadcast_to(np.asarray(mean, dtype=float), values.shape)
    B, F = nngp_factors(index, params, nugget)
    return float(_kernels.nngp_logdens(np.ascontiguousarray(resid), B, F, index.neighbors,
                                       index.n_neighbors))


def nngp_simulate(index: NNGPIndex, params: ExpCovParams, rng, nugget=0.0) -> np.ndarray:
    """Draw a zero-mean field from the NNGP joint density defined by ``index``."""
    B, F = nngp_factors(index, params, nugget)
    return _kernels.nngp_forward(index.ordering, B, F, index.neighbors, index.n_neighbors,
                                 rng.standard_normal(index.n))


def _new_site_neighbors(cond_coords, new_coords, k):
    n_cond = len(cond_coords)
    m = min(k, n_cond)
    nbr = np.full((len(new_coords), max(m, 0)), -1, dtype=np.int64)
    if m == 0 or len(new_coords) == 0:
        return nbr, np.zeros(len(new_coords), np.int64)
    _, idx = cKDTree(cond_coords).query(new_coords, k=m)
    nbr[:] = np.asarray(idx).reshape(len(new_coords), m)
    return nbr, np.full(len(new_coords), m, dtype=np.int64)


def nngp_predictive(cond_coords, cond_values, new_sites, params: ExpCovParams, k=15,
                    nugget=0.0, cond_mean=0.0, new_mean=0.0):
    """Predictive mean and variance of the latent process at new sites.

    Each new site conditions on its ``k`` nearest conditioning sites only;
    ``nugget`` is the noise variance on the conditioning values.
    """
    mean, var, _ = _predict(cond_coords, cond_values, new_sites, params, k, nugget,
                            cond_mean, new_mean, None)
    return mean, var


def nngp_conditional_draw(index: NNGPIndex, params: ExpCovParams, values, new_sites, rng,
                          nugget=0.0, cond_mean=0.0, new_mean=0.0, k=None) -> np.ndarray:
    """Independent draws at ``new_sites`` from the NNGP predictive given ``values`` at the index sites."""
    k = index.k if k is None else k
    _, _, draw = _predict(index.coords, values, new_sites, params, k, nugget, cond_mean,
                          new_mean, rng)
    return draw


def _predict(cond_coords, cond_values, new_sites, params, k, nugget, cond_mean, new_mean, rng):
    cond_coords = np.asarray(cond_coords, dtype=float).reshape(-1, 2)
    new = np.asarray(getattr(new_sites, "sites", new_sites), dtype=float).reshape(-1, 2)
    resid = np.asarray(cond_values, dtype=float) - np.broadcast_to(cond_mean, (len(cond_coords),))
    nbr, nnc = _new_site_neighbors(cond_coords, new, k)
    if nbr.shape[1] == 0:
        nbr = np.full((len(new), 1), -1, dtype=np.int64)
    means = np.empty(len(new))
    var = np.empty(len(new))
    normals = rng.standard_normal(len(new)) if rng is not None else np.zeros(len(new))
    draw = _kernels.kriging_draws(cond_coords, np.ascontiguousarray(resid), new, nbr, nnc,
                                  params.sigma2, params.phi, float(nugget), normals, means, var)
    if np.isnan(means).any():
        raise NumericalError("kriging system not positive definite after jitter")
    offset = np.broadcast_to(np.asarray(new_mean, dtype=float), (len(new),))
    return means + offset, var, draw + offset
