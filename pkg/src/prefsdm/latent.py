"""Latent probit formulation Y(s) = 1(Z(s) > 0) for every response model in the lattice."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import SpecificationError, ValidationError
from .geodata import CovariateRaster, cell_of
from .gp import ExpCovParams

# which latent terms enter Z(s) = x'alpha + ... + eps for each model kind
COMPONENTS = {
    "a": frozenset(),
    "b": frozenset({"omega"}),
    "c": frozenset({"eta_pa", "omega"}),
    "d": frozenset({"eta_pa"}),
    "c'": frozenset({"eta_po", "omega"}),
    "d'": frozenset({"eta_po"}),
    "e": frozenset({"eta_pa", "eta_po"}),
    "f": frozenset({"eta_pa", "eta_po", "omega"}),
}
KINDS = tuple(COMPONENTS)
FUSION_KINDS = frozenset({"c'", "d'", "e", "f"})
_ALIASES = {"cp": "c'", "dp": "d'", "c_prime": "c'", "d_prime": "d'", "c′": "c'", "d′": "d'"}


def model_kind(name) -> str:
    key = str(name).strip().lower().strip("()")
    key = _ALIASES.get(key, key)
    if key not in COMPONENTS:
        raise SpecificationError(f"unknown response model {name!r}; expected one of {KINDS}")
    return key


def kind_slug(kind) -> str:
    """Filesystem/CLI-safe name of a model kind (c' -> cp)."""
    return model_kind(kind).replace("'", "p")


@dataclass(frozen=True)
class ResponseModelSpec:
    kind: str
    alpha: np.ndarray
    delta_pa: Optional[float] = None
    delta_po: Optional[float] = None
    omega_params: Optional[ExpCovParams] = None
    tau2: float = 1.0

    def __post_init__(self):
        kind = model_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).reshape(-1))
        comps = COMPONENTS[kind]
        for name, term in (("delta_pa", "eta_pa"), ("delta_po", "eta_po"), ("omega_params", "omega")):
            present = getattr(self, name) is not None
            if present != (term in comps):
                need = "requires" if term in comps else "does not use"
                raise SpecificationError(f"model ({kind}) {need} {name}")
        if not self.tau2 > 0:
            raise ValidationError("tau2 must be positive")

    @property
    def components(self):
        return COMPONENTS[self.kind]


def linear_predictor(spec: ResponseModelSpec, sites, raster: CovariateRaster,
                     omega=None, eta_pa=None, eta_po=None) -> np.ndarray:
    """Mean of Z at each site: x'alpha plus the shared-process and spatial terms of the model.

    Covariates and eta values are read from the grid cell that contains each
    site; ``omega`` is given per site.
    """
    coords = np.asarray(sites, dtype=float).reshape(-1, 2)
    cells = cell_of(coords, raster.grid) if len(coords) else np.zeros(0, np.int64)
    X = raster.design(cells)
    if X.shape[1] != len(spec.alpha):
        raise SpecificationError(f"alpha has {len(spec.alpha)} entries, design has {X.shape[1]}")
    mu = X @ spec.alpha
    comps = spec.components
    for term, field, coef in (("eta_pa", eta_pa, spec.delta_pa), ("eta_po", eta_po, spec.delta_po)):
        if term in comps:
            if field is None:
                raise SpecificationError(f"model ({spec.kind}) needs the {term} field")
            mu = mu + coef * np.asarray(field, dtype=float)[cells]
    if "omega" in comps:
        if omega is None:
            raise SpecificationError(f"model ({spec.kind}) needs the omega field")
        mu = mu + np.asarray(omega, dtype=float)
    return mu


def presence_probability(mean_z, tau2=1.0):
    """P(Z > 0) = Phi(mean_z / sqrt(tau2))."""
    if not tau2 > 0:
        raise ValidationError("tau2 must be positive")
    return ndtr(np.asarray(mean_z, dtype=float) / np.sqrt(tau2))


def draw_truncated_z(mean_z, tau2, y, rng):
    """Normal(mean_z, tau2) draws restricted to (0, inf) where y = 1 and (-inf, 0] where y = 0.

    Inverse-CDF sampling on whichever tail is being kept, which stays accurate
    far into the tails (standardized bounds beyond 30).
    """
    mean_z = np.asarray(mean_z, dtype=float)
    y = np.asarray(y)
    sd = np.sqrt(tau2)
    shape = np.broadcast(mean_z, y).shape
    u = 1.0 - rng.random(shape)  # (0, 1]
    b = np.broadcast_to(-mean_z / sd, shape)  # standardized position of zero
    pos = np.broadcast_to(y == 1, shape)
    # y = 1: X >= b via the upper tail; y = 0: X <= b via the lower tail
    tail = np.where(pos, ndtr(-b), ndtr(b))
    with np.errstate(divide="ignore"):
        x = np.where(pos, -ndtri(u * tail), ndtri(u * tail))
        # tail mass underflowed: exponential approximation beyond the bound
        far = tail == 0
        if far.any():
            e = -np.log(u)
            x = np.where(far, b + np.where(pos, e, -e) / np.maximum(np.abs(b), 1.0), x)
    z = mean_z + sd * x
    z = np.where(pos & ~(z > 0), np.nextafter(0.0, 1.0), z)
    z = np.where(~pos & (z > 0), 0.0, z)
    return z if shape else float(z)
