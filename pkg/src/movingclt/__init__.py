"""Simulation and verification of central limit theorems for moving partial sums.

Covers independent sequences and associated (positively dependent) ones:
sequence models, moving sums and block schemes, Lindeberg/Lyapounov-type
condition statistics, Monte-Carlo weak-convergence checks and a ruin demo.
"""

__version__ = "0.1.0"

from .errors import GenerationError, ModelSchemaError, PreconditionError
from .estimate import Estimate
from .model import (SequenceModel, VarianceRule, certify_association, covariance_at, gen_path,
                    load_model, model_from_dict, model_to_dict, simulate)
from .sums import (BlockScheme, Window, block_increments, make_block_scheme, moving_sum,
                   window_variance)
from .conditions import (ConditionReport, ScalingFunction, block_hypotheses, domination_check,
                         hc_statistic, lindeberg_moving, lyapounov_moving, nonregrouped_statistics,
                         regrouped_statistics, offset_ratio, scaling_ratio, uan_ratio)
from .weakconv import (ReplicateEnsemble, cvm_to_normal, ecf, fdd_covariance_check, fdd_ensemble,
                       increment_decoupling_check, ks_to_normal, mc_normalized_sums, newman_verify)
from .ruin import SurplusModel, ruin_probability, ruin_time, simulate_surplus

__all__ = [
    "BlockScheme", "ConditionReport", "Estimate", "GenerationError", "ModelSchemaError",
    "PreconditionError", "ReplicateEnsemble", "ScalingFunction", "SequenceModel", "SurplusModel",
    "VarianceRule", "Window", "block_hypotheses", "block_increments", "certify_association",
    "covariance_at", "cvm_to_normal", "domination_check", "ecf", "fdd_covariance_check",
    "fdd_ensemble", "gen_path", "hc_statistic", "increment_decoupling_check", "ks_to_normal",
    "lindeberg_moving", "load_model", "lyapounov_moving", "make_block_scheme",
    "mc_normalized_sums", "model_from_dict", "model_to_dict", "moving_sum", "newman_verify",
    "nonregrouped_statistics", "regrouped_statistics", "offset_ratio", "ruin_probability",
    "ruin_time", "scaling_ratio", "simulate", "simulate_surplus", "uan_ratio", "window_variance",
]
