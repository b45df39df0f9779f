"""Gibbs/Metropolis sampler for every node of the model lattice.

One sweep updates, in order: a joint Metropolis move on (alpha, delta) and
then eta_PA with beta_PA and eta_PO with beta_PO, all with z integrated out;
latent z; alpha; omega; then the covariance parameters of each field and the
sharing coefficients delta. Proposal scales adapt during burn-in only.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import _kernels
from ..errors import InitializationError, NumericalError, SpecificationError, ValidationError
from ..geodata import (
    CovariateRaster,
    DegradationLayers,
    PresenceAbsenceDataset,
    PresenceOnlyDataset,
    cell_of,
    counts_per_cell,
)
from ..gp import NNGPIndex, build_nngp_index
from scipy.special import log_ndtr, ndtr

from ..latent import draw_truncated_z
from ..pointprocess import LGCP
from .archive import PosteriorArchive
from .config import ChainConfig, ModelSpec, PriorSpec
from .diagnostics import chain_ess

ACCEPT_TARGET = 0.44
BETA_ACCEPT_TARGET = 0.234


class _Adapter:
    """Robbins-Monro style scale adaptation on the log scale, one batch at a time."""

    def __init__(self, scale, target):
        self.log_scale = np.log(np.asarray(scale, dtype=float))
        self.target = target
        self.accepted = np.zeros_like(self.log_scale)
        self.tried = 0
        self.batches = 0
        self.total_accepted = np.zeros_like(self.log_scale)
        self.total_tried = 0

    @property
    def scale(self):
        return np.exp(self.log_scale)

    def record(self, accepted):
        self.accepted += accepted
        self.tried += 1
        self.total_accepted += accepted
        self.total_tried += 1

    def adapt(self):
        if self.tried == 0:
            return
        self.batches += 1
        gain = min(1.0, 3.0 / math.sqrt(self.batches))
        rate = self.accepted / self.tried
        self.log_scale = self.log_scale + gain * (rate - self.target) / self.target
        self.accepted[...] = 0
        self.tried = 0

    def reset_totals(self):
        self.total_accepted[...] = 0
        self.total_tried = 0
        self.accepted[...] = 0
        self.tried = 0

    @property
    def rate(self):
        return self.total_accepted / max(self.total_tried, 1)


def _check_rank(X, names):
    """Raise when the site design has linearly dependent columns, naming them."""
    if len(X) == 0 or np.linalg.matrix_rank(X) == X.shape[1]:
        return
    kept = []
    for j in range(X.shape[1]):
        if np.linalg.matrix_rank(X[:, kept + [j]]) == len(kept) + 1:
            kept.append(j)
            continue
        coef, *_ = np.linalg.lstsq(X[:, kept], X[:, j], rcond=None)
        partners = [names[kept[i]] for i in np.flatnonzero(np.abs(coef) > 1e-8)]
        raise ValidationError(f"covariate {names[j]!r} is collinear with {partners} at the sites")


class _Field:
    """A zero-mean NNGP field with exponential covariance (omega on sites, eta on cells)."""

    def __init__(self, name, index: NNGPIndex, priors: PriorSpec, sigma2=1.0, phi=None):
        self.name = name
        self.index = index
        self.n = index.n
        self.priors = priors
        self.sigma2 = float(sigma2)
        self.phi = float(phi if phi is not None else 0.5 * (priors.phi_lo + priors.phi_hi))
        self.values = np.zeros(self.n)
        self.cptr, self.cidx, self.cpos = index.children
        self.nbr = index.neighbors if index.neighbors.shape[1] else np.full((self.n, 1), -1, np.int64)
        self.B, self.Ft = self._factors(self.phi)
        if self.B is None:
            raise InitializationError(f"NNGP factorization failed for {name} at phi={self.phi}")
        self.phi_adapter = _Adapter(0.05 * (priors.phi_hi - priors.phi_lo), ACCEPT_TARGET)

    def _factors(self, phi):
        B, F, status = _kernels.nngp_factors(self.index.coords, self.nbr, self.index.n_neighbors,
                                             1.0, phi, 0.0)
        if status >= 0:
            return None, None
        return B, F

    @property
    def F(self):
        return self.sigma2 * self.Ft

    def set_phi(self, phi):
        B, Ft = self._factors(float(phi))
        if B is None:
            raise NumericalError(f"NNGP factorization failed for {self.name} at phi={phi}")
        self.phi, self.B, self.Ft = float(phi), B, Ft

    def logdens(self, values=None):
        v = self.values if values is None else values
        return _kernels.nngp_logdens(v, self.B, self.F, self.nbr, self.index.n_neighbors)

    def gibbs(self, data_prec, data_lin, rng):
        _kernels.gibbs_field_sweep(self.values, self.index.ordering, self.B, self.F, self.nbr,
                                   self.index.n_neighbors, self.cptr, self.cidx, self.cpos,
                                   data_prec, data_lin, rng.standard_normal(self.n))

    def update_sigma2(self, rng):
        e = _kernels.nngp_residuals(self.values, self.B, self.nbr, self.index.n_neighbors)
        quad = float(np.dot(e * e, 1.0 / self.Ft))
        shape = self.priors.sigma2_shape + 0.5 * self.n
        rate = self.priors.sigma2_rate + 0.5 * quad
        self.sigma2 = rate / rng.gamma(shape)

    def update_phi(self, rng):
        lo, hi = self.priors.phi_lo, self.priors.phi_hi
        prop = self.phi + self.phi_adapter.scale * rng.standard_normal()
        for _ in range(100):
            if prop < lo:
                prop = 2 * lo - prop
            elif prop > hi:
                prop = 2 * hi - prop
            else:
                break
        accepted = 0.0
        if lo < prop < hi:
            B, Ft = self._factors(prop)
            if B is not None:
                cur = self.logdens()
                new = _kernels.nngp_logdens(self.values, B, self.sigma2 * Ft, self.nbr,
                                            self.index.n_neighbors)
                if math.log(1.0 - rng.random()) < new - cur:
                    self.phi, self.B, self.Ft = float(prop), B, Ft
                    accepted = 1.0
        self.phi_adapter.record(accepted)


class _Intensity:
    """Gridded NHPP/LGCP for one point pattern, with its regression coefficients beta."""

    def __init__(self, process, kind, raster: CovariateRaster, counts, q, priors, cell_index,
                 delta_name=None):
        self.process = process
        self.kind = kind
        self.X = raster.design()
        self.p = self.X.shape[1]
        self.counts = np.asarray(counts, dtype=float)
        areas = raster.grid.cell_areas()
        q = np.ones(raster.grid.n_cells) if q is None else np.asarray(q, dtype=float)
        self.support = q > 0
        if np.any(~self.support & (self.counts > 0)):
            raise InitializationError(f"{process} events fall in cells with zero sampling probability")
        with np.errstate(divide="ignore"):
            self.log_aq = np.where(self.support, np.log(areas * q), -np.inf)
        self.priors = priors
        self.delta_name = delta_name
        total = self.counts.sum()
        exposure = float((areas * q).sum())
        self.beta = np.zeros(self.p)
        self.beta[0] = math.log(max(total, 0.5) / exposure)
        self.eta: Optional[_Field] = None
        if kind == LGCP:
            self.eta = _Field(f"eta_{process}", cell_index, priors)
            self.eta_adapter = _Adapter(np.full(self.eta.n, 0.5), ACCEPT_TARGET)
            self.shift_adapter = _Adapter(0.2, ACCEPT_TARGET)
            self.scale_adapter = _Adapter(0.1, ACCEPT_TARGET)
        self.beta_adapter = _Adapter(1.0, BETA_ACCEPT_TARGET if self.p > 1 else ACCEPT_TARGET)
        self._set_beta_cov()

    def eta_values(self):
        return self.eta.values if self.eta is not None else 0.0

    def loglik(self, beta, eta=None):
        eta = self.eta_values() if eta is None else eta
        lin = self.X @ beta + eta
        s = self.support
        return float(np.dot(self.counts[s], lin[s]) - np.exp(self.log_aq[s] + lin[s]).sum())

    def _set_beta_cov(self):
        lam = np.where(self.support, np.exp(self.log_aq + self.X @ self.beta + self.eta_values()), 0.0)
        H = (self.X * lam[:, None]).T @ self.X + np.eye(self.p) / self.priors.beta_var
        cov = np.linalg.inv(H)
        self.beta_chol = np.linalg.cholesky(0.5 * (cov + cov.T)) * (2.38 / math.sqrt(self.p))

    def update_beta(self, rng):
        prop = self.beta + self.beta_adapter.scale * (self.beta_chol @ rng.standard_normal(self.p))
        pv = self.priors.beta_var
        d = (self.loglik(prop) - self.loglik(self.beta)
             - 0.5 * (prop @ prop - self.beta @ self.beta) / pv)
        ok = float(math.log(1.0 - rng.random()) < d)
        if ok:
            self.beta = prop
        self.beta_adapter.record(ok)


@dataclass
class _Trace:
    scalars: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    field_iters: list = field(default_factory=list)


class Sampler:
    """MCMC state and update kernels for one chain of one lattice node."""

    def __init__(self, model: ModelSpec, pa: PresenceAbsenceDataset, raster: CovariateRaster,
                 po: Optional[PresenceOnlyDataset] = None, layers: Optional[DegradationLayers] = None,
                 priors: PriorSpec = PriorSpec(), k=15, ordering="lex", tau2=1.0,
                 pa_counts=None, cell_index: Optional[NNGPIndex] = None,
                 site_index: Optional[NNGPIndex] = None):
        self.model = model
        self.priors = priors
        self.tau2 = float(tau2)
        self.raster = raster
        self.grid = raster.grid
        comps = model.components
        if model.needs_po and po is None:
            raise SpecificationError(f"model ({model.response}) needs a presence-only dataset")
        if "eta_pa" in comps and model.intensity_pa != LGCP:
            raise SpecificationError("eta_pa in Z requires the LGCP for the sites")
        self.y = np.asarray(pa.y, dtype=np.int8)
        self.n = len(self.y)
        self.coords = pa.coords
        self.site_cells = cell_of(pa.coords, self.grid) if self.n else np.zeros(0, np.int64)
        self.Xs = raster.design(self.site_cells)
        self.p = self.Xs.shape[1]
        _check_rank(self.Xs, ("intercept", *raster.names))
        self.n_cells = self.grid.n_cells
        self.sites_per_cell = np.bincount(self.site_cells, minlength=self.n_cells).astype(float)
        # sites grouped by cell for the per-cell eta kernel
        self.site_order = np.argsort(self.site_cells, kind="stable")
        self.site_ptr = np.concatenate([[0], np.cumsum(self.sites_per_cell)]).astype(np.int64)

        self.alpha = self._init_alpha()
        self.delta = {}
        if "eta_pa" in comps:
            self.delta["delta_pa"] = 0.0
        if "eta_po" in comps:
            self.delta["delta_po"] = 0.0

        need_cells = model.intensity_pa == LGCP or model.intensity_po == LGCP
        if need_cells and cell_index is None:
            cell_index = build_nngp_index(self.grid.centroids(), k, ordering)
        self.omega: Optional[_Field] = None
        if "omega" in comps:
            if site_index is None:
                site_index = build_nngp_index(pa.coords, k, ordering)
            self.omega = _Field("omega", site_index, priors)
        self.intensities = {}
        if model.intensity_pa is not None:
            counts = pa_counts if pa_counts is not None else counts_per_cell(pa.coords, self.grid).counts
            self.intensities["pa"] = _Intensity("pa", model.intensity_pa, raster, counts, None,
                                                priors, cell_index,
                                                "delta_pa" if "eta_pa" in comps else None)
        if model.intensity_po is not None:
            counts = counts_per_cell(po.coords, self.grid).counts
            q = None if layers is None else layers.q
            self.intensities["po"] = _Intensity("po", model.intensity_po, raster, counts, q,
                                                priors, cell_index,
                                                "delta_po" if "eta_po" in comps else None)
        self.z = np.where(self.y == 1, 0.5, -0.5)
        self.coef_adapter = _Adapter(1.0, BETA_ACCEPT_TARGET)
        self.coef_scale_adapter = _Adapter(0.3, ACCEPT_TARGET)
        self._set_coef_cov()

    # ---- initialization --------------------------------------------------

    def _init_alpha(self):
        from scipy.special import ndtri

        alpha = np.zeros(self.p)
        if self.n == 0:
            return alpha
        ybar = float(np.clip(self.y.mean(), 0.02, 0.98))
        alpha[0] = ndtri(ybar)
        if self.p > 1:
            Xc = self.Xs[:, 1:] - self.Xs[:, 1:].mean(0)
            coef, *_ = np.linalg.lstsq(Xc, self.y - self.y.mean(), rcond=None)
            dens = math.exp(-0.5 * alpha[0] ** 2) / math.sqrt(2 * math.pi)
            alpha[1:] = coef / dens
            alpha[0] -= self.Xs[:, 1:].mean(0) @ alpha[1:]
        return alpha

    # ---- mean assembly ---------------------------------------------------

    def _eta_term(self, name):
        proc = "pa" if name == "delta_pa" else "po"
        return self.delta[name] * self.intensities[proc].eta.values[self.site_cells]

    def mean_z(self, exclude=()):
        mu = self.Xs @ self.alpha if "alpha" not in exclude else np.zeros(self.n)
        for name in self.delta:
            if name not in exclude:
                mu = mu + self._eta_term(name)
        if self.omega is not None and "omega" not in exclude:
            mu = mu + self.omega.values
        return mu

    def set_responses(self, y, z=None):
        """Replace the observed responses (used by joint-distribution tests)."""
        self.y = np.asarray(y, dtype=np.int8)
        if z is not None:
            self.z = np.asarray(z, dtype=float).copy()

    # ---- updates ---------------------------------------------------------

    def gibbs_update_z(self, rng):
        self.z = np.asarray(draw_truncated_z(self.mean_z(), self.tau2, self.y, rng), dtype=float)

    def gibbs_update_alpha(self, rng):
        r = self.z - self.mean_z(exclude=("alpha",))
        prec = self.Xs.T @ self.Xs / self.tau2 + np.eye(self.p) / self.priors.alpha_var
        try:
            L = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError:
            raise NumericalError("alpha conditional precision is not positive definite") from None
        b = self.Xs.T @ r / self.tau2
        mean = np.linalg.solve(L.T, np.linalg.solve(L, b))
        self.alpha = mean + np.linalg.solve(L.T, rng.standard_normal(self.p))

    def alpha_conditional(self):
        """Mean and covariance of alpha given everything else (for oracle checks)."""
        r = self.z - self.mean_z(exclude=("alpha",))
        prec = self.Xs.T @ self.Xs / self.tau2 + np.eye(self.p) / self.priors.alpha_var
        cov = np.linalg.inv(prec)
        return cov @ (self.Xs.T @ r / self.tau2), cov

    # collapsed (alpha, delta) move: Gibbs steps given z mix slowly when the
    # probit is close to separation, so this one works on the binary likelihood

    def _coef_design(self):
        cols = [self.Xs]
        for name in self.delta:
            proc = "pa" if name == "delta_pa" else "po"
            cols.append(self.intensities[proc].eta.values[self.site_cells][:, None])
        return np.hstack(cols)

    def _coef_vector(self):
        return np.concatenate([self.alpha, [self.delta[n] for n in self.delta]])

    def _coef_prior_prec(self):
        pr = self.priors
        return np.concatenate([np.full(self.p, 1.0 / pr.alpha_var),
                               np.full(len(self.delta), 1.0 / pr.delta_var)])

    def _set_coef_cov(self):
        if self.n == 0:
            self.coef_chol = None
            return
        G = self._coef_design()
        off = self.omega.values if self.omega is not None else 0.0
        m = (G @ self._coef_vector() + off) / math.sqrt(self.tau2)
        P = np.clip(ndtr(m), 1e-12, 1 - 1e-12)
        w = np.exp(-m * m) / (2 * math.pi * P * (1 - P)) / self.tau2
        H = (G * w[:, None]).T @ G + np.diag(self._coef_prior_prec())
        cov = np.linalg.inv(H)
        dim = G.shape[1]
        self.coef_chol = np.linalg.cholesky(0.5 * (cov + cov.T)) * (2.38 / math.sqrt(dim))

    def _coef_logpost(self, G, c, off, sgn):
        m = sgn * (G @ c + off) / math.sqrt(self.tau2)
        return float(log_ndtr(m).sum() - 0.5 * (c * c * self._coef_prior_prec()).sum())

    def collapsed_coef_update(self, rng):
        """Random-walk Metropolis on (alpha, delta) under the marginal probit likelihood."""
        if self.coef_chol is None:
            return
        G = self._coef_design()
        off = self.omega.values if self.omega is not None else 0.0
        sgn = np.where(self.y == 1, 1.0, -1.0)
        c0 = self._coef_vector()
        c1 = c0 + self.coef_adapter.scale * (self.coef_chol @ rng.standard_normal(len(c0)))
        names = list(self.delta)
        lp0 = self._coef_logpost(G, c0, off, sgn)
        lp1 = self._coef_logpost(G, c1, off, sgn)
        if ("delta_po" in self.delta and self.priors.delta_po_truncated
                and c1[self.p + names.index("delta_po")] < 0):
            lp1 = -np.inf
        ok = float(math.log(1.0 - rng.random()) < lp1 - lp0)
        if ok:
            c0, lp0 = c1, lp1
        self.coef_adapter.record(ok)
        # c -> s c: near separation the likelihood is almost flat along this ray
        log_s = self.coef_scale_adapter.scale * rng.standard_normal()
        c1 = c0 * math.exp(log_s)
        lp1 = self._coef_logpost(G, c1, off, sgn)
        ok = float(math.log(1.0 - rng.random()) < lp1 - lp0 + len(c0) * log_s)
        if ok:
            c0 = c1
        self.coef_scale_adapter.record(ok)
        self.alpha = c0[:self.p].copy()
        for j, name in enumerate(names):
            self.delta[name] = float(c0[self.p + j])

    def update_omega_nngp(self, rng):
        if self.omega is None:
            return
        r = self.z - self.mean_z(exclude=("omega",))
        self.omega.gibbs(np.full(self.n, 1.0 / self.tau2), r / self.tau2, rng)

    def _eta_site_terms(self, inten: _Intensity):
        if inten.delta_name is None or self.n == 0:
            return 0.0, np.zeros(0), np.zeros(0)
        d = self.delta[inten.delta_name]
        off = self.mean_z(exclude=(inten.delta_name,))[self.site_order]
        sgn = np.where(self.y[self.site_order] == 1, 1.0, -1.0)
        return d, off, sgn

    def mh_update_eta(self, process, rng, adapt=False):
        """Per-cell random-walk Metropolis on eta, then beta, a level shift and a scale move.

        The cell updates use the probit likelihood with z integrated out, so z
        must be redrawn afterwards. Returns the mean per-cell acceptance rate.
        """
        inten = self.intensities[process]
        if inten.eta is None:
            inten.update_beta(rng)
            return float("nan")
        eta = inten.eta
        d, off, sgn = self._eta_site_terms(inten)
        offset = inten.log_aq + inten.X @ inten.beta
        acc = np.zeros(eta.n)
        _kernels.eta_mh_sweep(eta.values, eta.index.ordering, eta.B, eta.F, eta.nbr,
                              eta.index.n_neighbors, eta.cptr, eta.cidx, eta.cpos, self.site_ptr,
                              off, sgn, float(d), 1.0 / math.sqrt(self.tau2), inten.counts, offset,
                              inten.support, inten.eta_adapter.scale, rng.standard_normal(eta.n),
                              np.log(1.0 - rng.random(eta.n)), acc)
        inten.eta_adapter.record(acc)
        inten.update_beta(rng)
        self._level_shift(inten, rng)
        if inten.delta_name is not None:
            self._scale_move(inten, rng)
        return float(acc.mean())

    def _level_shift(self, inten: _Intensity, rng):
        # eta -> eta - c, beta_0 -> beta_0 + c, alpha_0 -> alpha_0 + delta c leaves
        # the intensity and the mean of Z unchanged; only the priors move
        c = inten.shift_adapter.scale * rng.standard_normal()
        eta = inten.eta
        new_eta = eta.values - c
        d = inten.delta_name and self.delta[inten.delta_name]
        b0, b1 = inten.beta[0], inten.beta[0] + c
        a0, a1 = self.alpha[0], self.alpha[0] + (d or 0.0) * c
        log_r = (eta.logdens(new_eta) - eta.logdens()
                 - 0.5 * (b1 * b1 - b0 * b0) / self.priors.beta_var
                 - 0.5 * (a1 * a1 - a0 * a0) / self.priors.alpha_var)
        ok = float(math.log(1.0 - rng.random()) < log_r)
        if ok:
            eta.values[:] = new_eta
            inten.beta[0] = b1
            self.alpha[0] = a1
        inten.shift_adapter.record(ok)

    def _scale_move(self, inten: _Intensity, rng):
        # (eta, delta, sigma2) -> (s eta, delta / s, s^2 sigma2) leaves delta * eta and
        # the NNGP prior shape unchanged; only the intensity and the priors move
        eta = inten.eta
        name = inten.delta_name
        log_s = inten.scale_adapter.scale * rng.standard_normal()
        s = math.exp(log_s)
        d0 = self.delta[name]
        d1 = d0 / s
        if name == "delta_po" and self.priors.delta_po_truncated and d1 < 0:
            inten.scale_adapter.record(0.0)
            return
        new_eta = s * eta.values
        pr = self.priors
        s0, s1 = eta.sigma2, eta.sigma2 * s * s
        log_r = (inten.loglik(inten.beta, new_eta) - inten.loglik(inten.beta)
                 - 0.5 * (d1 * d1 - d0 * d0) / pr.delta_var
                 - (pr.sigma2_shape + 1) * (math.log(s1) - math.log(s0))
                 - pr.sigma2_rate * (1.0 / s1 - 1.0 / s0)
                 + log_s)
        ok = float(math.log(1.0 - rng.random()) < log_r)
        if ok:
            eta.values[:] = new_eta
            eta.sigma2 = s1
            self.delta[name] = d1
        inten.scale_adapter.record(ok)

    def update_delta(self, name, rng):
        proc = "pa" if name == "delta_pa" else "po"
        g = self.intensities[proc].eta.values[self.site_cells]
        r = self.z - self.mean_z(exclude=(name,))
        prec = g @ g / self.tau2 + 1.0 / self.priors.delta_var
        mean = (g @ r / self.tau2) / prec
        sd = 1.0 / math.sqrt(prec)
        if name == "delta_po" and self.priors.delta_po_truncated:
            self.delta[name] = float(draw_truncated_z(mean, sd * sd, 1, rng))
        else:
            self.delta[name] = mean + sd * rng.standard_normal()

    def update_hyperparams(self, rng):
        for f in self.fields():
            f.update_sigma2(rng)
            f.update_phi(rng)
        for name in self.delta:
            self.update_delta(name, rng)

    def fields(self):
        out = []
        if self.omega is not None:
            out.append(self.omega)
        for inten in self.intensities.values():
            if inten.eta is not None:
                out.append(inten.eta)
        return out

    def sweep(self, rng):
        # moves that integrate z out come first; z is then redrawn before any
        # step that conditions on it
        self.collapsed_coef_update(rng)
        for proc in ("pa", "po"):
            if proc in self.intensities:
                self.mh_update_eta(proc, rng)
        self.gibbs_update_z(rng)
        self.gibbs_update_alpha(rng)
        self.update_omega_nngp(rng)
        self.update_hyperparams(rng)

    def _adapters(self):
        out = [self.coef_adapter, self.coef_scale_adapter]
        for f in self.fields():
            out.append(f.phi_adapter)
        for inten in self.intensities.values():
            out.append(inten.beta_adapter)
            if inten.eta is not None:
                out.extend([inten.eta_adapter, inten.shift_adapter, inten.scale_adapter])
        return out

    def adapt(self):
        for a in self._adapters():
            a.adapt()
        for inten in self.intensities.values():
            inten._set_beta_cov()
        self._set_coef_cov()

    def reset_acceptance(self):
        for a in self._adapters():
            a.reset_totals()

    # ---- bookkeeping -----------------------------------------------------

    def scalar_values(self):
        out = {}
        for j, a in enumerate(self.alpha):
            out[f"alpha[{j}]"] = a
        for proc, inten in self.intensities.items():
            for j, b in enumerate(inten.beta):
                out[f"beta_{proc}[{j}]"] = b
        for name, d in self.delta.items():
            out[name] = d
        for f in self.fields():
            out[f"sigma2_{f.name}"] = f.sigma2
            out[f"phi_{f.name}"] = f.phi
        return out

    def field_values(self):
        return {f.name: f.values.copy() for f in self.fields()}

    def acceptance_rates(self):
        out = {"coef": float(self.coef_adapter.rate),
               "coef_scale": float(self.coef_scale_adapter.rate)}
        for f in self.fields():
            out[f"phi_{f.name}"] = float(f.phi_adapter.rate)
        for proc, inten in self.intensities.items():
            out[f"beta_{proc}"] = float(inten.beta_adapter.rate)
            if inten.eta is not None:
                out[f"eta_{proc}"] = float(np.mean(inten.eta_adapter.rate))
                out[f"eta_{proc}_min"] = float(np.min(inten.eta_adapter.rate))
                out[f"eta_{proc}_max"] = float(np.max(inten.eta_adapter.rate))
                out[f"shift_{proc}"] = float(inten.shift_adapter.rate)
                if inten.delta_name is not None:
                    out[f"scale_{proc}"] = float(inten.scale_adapter.rate)
        return out

    def check_initial(self):
        total = 0.0
        for inten in self.intensities.values():
            total += inten.loglik(inten.beta)
        if not np.isfinite(total):
            raise InitializationError("log target is not finite at the initial state")

    def run(self, chain: ChainConfig, rng, progress=None) -> _Trace:
        self.check_initial()
        self.gibbs_update_z(rng)
        trace = _Trace()
        for t in range(chain.burn_in):
            self.sweep(rng)
            if (t + 1) % chain.adapt_window == 0:
                self.adapt()
            if progress:
                progress(t)
        self.reset_acceptance()
        kept = 0
        for t in range(chain.keep):
            self.sweep(rng)
            if (t + 1) % chain.thin:
                continue
            for name, v in self.scalar_values().items():
                trace.scalars.setdefault(name, []).append(float(v))
            if kept % chain.field_thin == 0:
                trace.field_iters.append(kept)
                for name, v in self.field_values().items():
                    trace.fields.setdefault(name, []).append(v)
            kept += 1
            if progress:
                progress(chain.burn_in + t)
        trace.acceptance = self.acceptance_rates()
        return trace


def _check_data(model: ModelSpec, pa, po, raster):
    if model.needs_po and po is None:
        raise SpecificationError(f"model ({model.response}) requires presence-only data")
    if not model.needs_po and po is not None and model.intensity_po is None:
        raise SpecificationError(f"model ({model.response}) does not use presence-only data")
    if len(pa) and not raster.grid.contains(pa.coords).all():
        raise SpecificationError("presence/absence sites fall outside the raster grid")


def fit(model: ModelSpec, pa: PresenceAbsenceDataset, raster: CovariateRaster,
        po: Optional[PresenceOnlyDataset] = None, layers: Optional[DegradationLayers] = None,
        priors: PriorSpec = PriorSpec(), chain: ChainConfig = ChainConfig(), k=15,
        ordering="lex", tau2=1.0) -> PosteriorArchive:
    """Run ``chain.n_chains`` chains and collect draws into a :class:`PosteriorArchive`.

    The joint target is [Y|Z][Z|fields, alpha] times the grid LGCP/NHPP
    likelihood of each modeled pattern and the priors. Chains use independent
    streams spawned from ``chain.seed``.
    """
    if isinstance(model, str):
        model = ModelSpec(model)
    _check_data(model, pa, po, raster)
    cell_index = None
    if LGCP in (model.intensity_pa, model.intensity_po):
        cell_index = build_nngp_index(raster.grid.centroids(), k, ordering)
    site_index = build_nngp_index(pa.coords, k, ordering) if "omega" in model.components else None
    streams = np.random.SeedSequence(chain.seed).spawn(chain.n_chains)

    def one(c):
        s = Sampler(model, pa, raster, po, layers, priors, k, ordering, tau2,
                    cell_index=cell_index, site_index=site_index)
        return s.run(chain, np.random.default_rng(streams[c]))

    if chain.threads > 1 and chain.n_chains > 1:
        with ThreadPoolExecutor(max_workers=chain.threads) as ex:
            traces = list(ex.map(one, range(chain.n_chains)))
    else:
        traces = [one(c) for c in range(chain.n_chains)]

    names = list(traces[0].scalars) if traces[0].scalars else []
    draws = {n: np.array([t.scalars[n] for t in traces]) for n in names}
    fields = {n: np.array([np.array(t.fields[n]) for t in traces]) for n in (traces[0].fields or {})}
    ess = {}
    if chain.n_draws >= 10:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ess = {n: chain_ess(v) for n, v in draws.items()}
    acceptance = {}
    for key in traces[0].acceptance:
        acceptance[key] = float(np.mean([t.acceptance[key] for t in traces]))
    return PosteriorArchive(
        model=model,
        draws=draws,
        fields=fields,
        field_iters=np.asarray(traces[0].field_iters, dtype=np.int64),
        acceptance=acceptance,
        ess=ess,
        site_coords=np.asarray(pa.coords),
        grid=raster.grid,
        config={"k": k, "ordering": ordering, "tau2": tau2, "chain": chain, "priors": priors},
    )
