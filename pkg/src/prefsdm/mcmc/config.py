"""Model-lattice node, prior and chain settings for the sampler."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import SpecificationError
from ..latent import COMPONENTS, FUSION_KINDS, model_kind
from ..pointprocess import LGCP, intensity_kind


@dataclass(frozen=True)
class ModelSpec:
    """One node of the lattice: a response model for Z and intensity models for the patterns.

    ``intensity_pa`` models the presence/absence site pattern and
    ``intensity_po`` the presence-only events. Either may be ``None`` when the
    corresponding pattern is not modeled; each eta term in Z needs the LGCP.
    """

    response: str
    intensity_pa: Optional[str] = None
    intensity_po: Optional[str] = None

    def __post_init__(self):
        kind = model_kind(self.response)
        object.__setattr__(self, "response", kind)
        comps = COMPONENTS[kind]
        ipa = intensity_kind(self.intensity_pa)
        ipo = intensity_kind(self.intensity_po)
        if ipa is None and "eta_pa" in comps:
            ipa = LGCP
        if ipo is None and "eta_po" in comps:
            ipo = LGCP
        if "eta_pa" in comps and ipa != LGCP:
            raise SpecificationError(f"model ({kind}) shares eta_pa and needs the LGCP (ii) for the sites")
        if "eta_po" in comps and ipo != LGCP:
            raise SpecificationError(f"model ({kind}) shares eta_po and needs the LGCP for presence-only data")
        object.__setattr__(self, "intensity_pa", ipa)
        object.__setattr__(self, "intensity_po", ipo)

    @classmethod
    def default(cls, kind):
        """Default pairing: LGCP (ii) for every pattern whose eta enters Z."""
        return cls(kind)

    @property
    def components(self):
        return COMPONENTS[self.response]

    @property
    def needs_po(self):
        return self.response in FUSION_KINDS or self.intensity_po is not None

    @property
    def label(self):
        parts = [f"({self.response})"]
        if self.intensity_pa:
            parts.append("(ii)" if self.intensity_pa == LGCP else "(i)")
        return "+".join(parts)


@dataclass(frozen=True)
class PriorSpec:
    alpha_var: float = 100.0
    beta_var: float = 100.0
    delta_var: float = 100.0
    delta_po_truncated: bool = True
    sigma2_shape: float = 2.0
    sigma2_rate: float = 0.1
    phi_lo: float = 0.0
    phi_hi: float = 200.0

    def __post_init__(self):
        for name in ("alpha_var", "beta_var", "delta_var", "sigma2_shape", "sigma2_rate"):
            if not getattr(self, name) > 0:
                raise SpecificationError(f"{name} must be positive")
        if not (0 <= self.phi_lo < self.phi_hi):
            raise SpecificationError("need 0 <= phi_lo < phi_hi")


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 20000
    keep: int = 20000
    thin: int = 1
    seed: int = 0
    n_chains: int = 1
    adapt_window: int = 25
    field_thin: int = 10
    threads: int = 1

    def __post_init__(self):
        if self.burn_in < 0 or self.keep < 0:
            raise SpecificationError("burn_in and keep must be nonnegative")
        if self.thin < 1 or self.n_chains < 1 or self.field_thin < 1 or self.adapt_window < 1:
            raise SpecificationError("thin, n_chains, field_thin and adapt_window must be >= 1")

    @property
    def n_draws(self):
        return self.keep // self.thin
