"""minimal edge of stability model: descent, gradient flow, regions and the theorem checks"""

from .analysis import (
    detect_phases,
    fit_decay_slope,
    gfs_bounds,
    verify_gfs,
    verify_lhat,
    verify_param_lemma,
    verify_sharpness_bands,
)
from .constrained import ConstrainedState, pgd_step, simulate_constrained, verify_constrained_decay
from .dynamics import gd_step, gd_step_unclipped, gf_integrate, gfs_analytic, simulate
from .errors import ConfigError, DivergedError, EmptyRegionError, EosError, NotConvergedError, PreconditionError
from .model import ModelConfig, Params, gradient, hessian, loss, loss_parts, sharpness_info
from .regions import in_M_dagger, in_X, in_X_tilde, in_Y, proposition_C, sample_X, sample_X_tilde, sample_Y
