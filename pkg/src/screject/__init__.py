"""Selective classification under label smoothing: losses, scores, RC metrics,
logit normalisation and a small synthetic training loop."""

from . import analysis, data, experiments, losses, normalization, scores, selective, trainer
from .data import MixtureSpec, default_spec, load_logit_records, sample_dataset, write_logit_records
from .exceptions import (
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
    LogitFormatError,
    ScrejectError,
    TrainingDivergedError,
)
from .losses import SmoothingConfig, loss_ce, loss_ls
from .normalization import NormConfig, score_maxlogit_norm, search_p
from .scores import score_doctor, score_energy, score_entropy, score_msp, softmax
from .selective import aurc, coverage_at_risk, rc_curve, risk_at_coverage

__version__ = "0.1.0"
