"""Geweke joint-distribution check: prior-forward draws against successive-conditional draws."""
from __future__ import annotations

import numpy as np
from scipy import stats

from prefsdm.geodata import CovariateRaster, GridSpec, PresenceAbsenceDataset
from prefsdm.gp import ExpCovParams, nngp_simulate
from prefsdm.mcmc import ModelSpec, PriorSpec
from prefsdm.mcmc.diagnostics import effective_sample_size
from prefsdm.mcmc.sampler import Sampler

PRIORS = PriorSpec(alpha_var=1.0, beta_var=1.0, delta_var=1.0, sigma2_shape=6.0,
                   sigma2_rate=5.0, phi_lo=0.5, phi_hi=3.0)


class Problem:
    """A small fixed design; data (y and, for LGCP models, cell counts) are regenerated."""

    def __init__(self, kind, n_sites=30, grid=(4, 4), seed=0, priors=PRIORS, k=8):
        rng = np.random.default_rng(seed)
        self.kind = kind
        self.priors = priors
        self.grid = GridSpec.regular(4.0, 4.0, *grid)
        self.raster = CovariateRaster.empty(self.grid)
        coords = rng.uniform(0.0, 4.0, (n_sites, 2))
        self.pa = PresenceAbsenceDataset(tuple(f"s{i}" for i in range(n_sites)), coords,
                                         np.zeros(n_sites, np.int8))
        self.model = ModelSpec(kind)
        self.k = k
        self.sampler = Sampler(self.model, self.pa, self.raster, priors=priors, k=k,
                               pa_counts=np.zeros(self.grid.n_cells))
        s = self.sampler
        self.omega_index = s.omega.index if s.omega is not None else None
        self.eta_index = s.intensities["pa"].eta.index if "pa" in s.intensities and \
            s.intensities["pa"].eta is not None else None

    # -- parameters ------------------------------------------------------------

    def draw_prior(self, rng):
        pr = self.priors
        th = {"alpha": rng.normal(0.0, np.sqrt(pr.alpha_var), self.sampler.p)}
        for name, idx in (("omega", self.omega_index), ("eta", self.eta_index)):
            if idx is None:
                continue
            s2 = pr.sigma2_rate / rng.gamma(pr.sigma2_shape)
            phi = rng.uniform(pr.phi_lo, pr.phi_hi)
            th[f"{name}_sigma2"], th[f"{name}_phi"] = s2, phi
            th[name] = nngp_simulate(idx, ExpCovParams(s2, phi), rng)
        if self.eta_index is not None:
            th["beta"] = rng.normal(0.0, np.sqrt(pr.beta_var), 1)
            th["delta"] = rng.normal(0.0, np.sqrt(pr.delta_var))
        return th

    def load(self, th):
        s = self.sampler
        s.alpha = np.array(th["alpha"], dtype=float)
        if s.omega is not None:
            s.omega.sigma2 = th["omega_sigma2"]
            s.omega.set_phi(th["omega_phi"])
            s.omega.values[:] = th["omega"]
        if self.eta_index is not None:
            inten = s.intensities["pa"]
            inten.eta.sigma2 = th["eta_sigma2"]
            inten.eta.set_phi(th["eta_phi"])
            inten.eta.values[:] = th["eta"]
            inten.beta = np.array(th["beta"], dtype=float)
            s.delta["delta_pa"] = th["delta"]

    def state(self):
        s = self.sampler
        th = {"alpha": s.alpha.copy()}
        if s.omega is not None:
            th.update(omega_sigma2=s.omega.sigma2, omega_phi=s.omega.phi, omega=s.omega.values.copy())
        if self.eta_index is not None:
            inten = s.intensities["pa"]
            th.update(eta_sigma2=inten.eta.sigma2, eta_phi=inten.eta.phi,
                      eta=inten.eta.values.copy(), beta=inten.beta.copy(),
                      delta=s.delta["delta_pa"])
        return th

    # -- data ------------------------------------------------------------------

    def draw_data(self, rng):
        """Data given the parameters currently loaded in the sampler."""
        s = self.sampler
        mu = s.mean_z()
        z = mu + rng.standard_normal(s.n)
        s.set_responses((z > 0).astype(np.int8), z)
        if self.eta_index is not None:
            inten = s.intensities["pa"]
            lam = np.exp(inten.log_aq + inten.X @ inten.beta + inten.eta.values)
            inten.counts = rng.poisson(lam).astype(float)

    # -- summaries -------------------------------------------------------------

    def functionals(self, th):
        out = {"alpha0": th["alpha"][0], "alpha0_sq": th["alpha"][0] ** 2}
        for name in ("omega", "eta"):
            if f"{name}_sigma2" in th:
                out[f"{name}_sigma2"] = th[f"{name}_sigma2"]
                out[f"{name}_phi"] = th[f"{name}_phi"]
                out[f"{name}0"] = th[name][0]
        if "delta" in th:
            out["delta"] = th["delta"]
            out["delta_sq"] = th["delta"] ** 2
            out["beta0"] = th["beta"][0]
        return out


def run(problem: Problem, n_forward, n_successive, seed=0):
    """Return {functional: (z_score, forward mean, successive mean)}."""
    rng = np.random.default_rng(seed)
    fwd = []
    for _ in range(n_forward):
        th = problem.draw_prior(rng)
        fwd.append(problem.functionals(th))
    problem.load(problem.draw_prior(rng))
    problem.draw_data(rng)
    succ = []
    for _ in range(n_successive):
        problem.sampler.sweep(rng)
        problem.draw_data(rng)
        succ.append(problem.functionals(problem.state()))
    out = {}
    for key in fwd[0]:
        a = np.array([f[key] for f in fwd])
        b = np.array([f[key] for f in succ])
        se_a2 = a.var(ddof=1) / len(a)
        se_b2 = b.var(ddof=1) / effective_sample_size(b)
        zs = (a.mean() - b.mean()) / np.sqrt(se_a2 + se_b2)
        out[key] = (float(zs), float(a.mean()), float(b.mean()))
    return out


def passes(result, bound=3.0):
    return all(abs(z) < bound for z, _, _ in result.values())


def z_to_p(z):
    return 2 * stats.norm.sf(abs(z))
