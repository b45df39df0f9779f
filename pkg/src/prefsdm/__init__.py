"""Spatial presence/absence models with preferential sampling and presence-only fusion."""

from .errors import (
    DegenerateCovariateError,
    InitializationError,
    NumericalError,
    OutOfRegionError,
    ParseError,
    SpecificationError,
    ValidationError,
)
from .geodata import (
    CovariateRaster,
    DegradationLayers,
    GridSpec,
    Location,
    PresenceAbsenceDataset,
    PresenceOnlyDataset,
    block_average,
    cell_of,
    counts_per_cell,
    ingest_points,
    standardize_covariates,
)
from .gp import (
    ExpCovParams,
    GPField,
    build_nngp_index,
    cov,
    full_gp_logpdf,
    nngp_conditional_draw,
    nngp_logpdf,
)
from .evaluate import (
    PredictionSurface,
    TjurResult,
    compare_models,
    holdout_split,
    holdout_tjur,
    predict_surface,
    tjur_r2,
)
from .latent import ResponseModelSpec, draw_truncated_z, linear_predictor, presence_probability
from .mcmc import ChainConfig, ModelSpec, PosteriorArchive, PriorSpec, effective_sample_size, fit
from .pointprocess import (
    IntensityModelSpec,
    lgcp_grid_loglik,
    log_intensity_at_cells,
    prob_at_least_one,
    simulate_point_pattern,
)
from .simulate import ScenarioSpec, figure4_scenario, fusion_scenario, simulate_scenario

__version__ = "0.1.0"
