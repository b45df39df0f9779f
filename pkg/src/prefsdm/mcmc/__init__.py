from .archive import PosteriorArchive
from .config import ChainConfig, ModelSpec, PriorSpec
from .diagnostics import autocorrelation, effective_sample_size, mcse
from .sampler import Sampler, fit

__all__ = [
    "ChainConfig",
    "ModelSpec",
    "PosteriorArchive",
    "PriorSpec",
    "Sampler",
    "autocorrelation",
    "effective_sample_size",
    "fit",
    "mcse",
]
