"""Shifted gamma mixture models for cosine similarity scores."""

from .distributions import (
    GammaMixture,
    ShiftedGammaParams,
    VmfCosineParams,
    mass_outside,
    mix_cdf,
    mix_log_pdf,
    mix_mean,
    mix_pdf,
    mix_sample,
    mix_sf,
    sg_cdf,
    sg_log_pdf,
    sg_pdf,
    sg_sample,
    sg_sf,
    vmf_cos_log_pdf,
    vmf_cos_sample,
)
from .em import FitConfig, FitReport, ScoreSample, bic, fit, log_likelihood
from .errors import (
    AssignmentError,
    DomainError,
    FitError,
    InputError,
    SizeError,
    TooFewSamplesError,
)
from .hierarchy import HierarchyConfig, LabeledSimilarities, simulate
from .io import cosine_similarities, read_model, read_scores, write_model, write_scores
from .significance import best_matches, combine_p_values, p_value
from .special import (
    digamma,
    inv_reg_lower_incomplete_gamma,
    log_gamma,
    reg_lower_incomplete_gamma,
    reg_upper_incomplete_gamma,
    trigamma,
)

__version__ = "0.1.0"
