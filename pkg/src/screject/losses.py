"""Cross-entropy and (generalised) label-smoothing losses with logit gradients.

Targets are plain probability-like arrays over the last axis: a one-hot
label, a soft true conditional, or an already-smoothed target.  With
negative smoothing the smoothed target leaves ``[0, 1]`` but still sums
to one.

The logit gradient of either loss is ``softmax(v) - target``.  Label
smoothing only changes the target, so the difference between the LS and
CE gradients (the suppression gradient) depends on the target alone.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InvalidInputError

__all__ = [
    "SmoothingConfig",
    "LogOfZeroWarning",
    "one_hot",
    "smooth_target",
    "loss_ce",
    "loss_ls",
    "kl_uniform",
    "grad_ce_logits",
    "grad_ls_logits",
    "grad_suppression",
    "suppression_at_max",
    "grad_suppression_onehot",
]


class LogOfZeroWarning(RuntimeWarning):
    """A loss term evaluated log(0) against a non-zero target weight."""


@dataclass(frozen=True)
class SmoothingConfig:
    """Smoothing strength ``alpha`` (may be negative) and class count ``K``."""

    alpha: float
    num_classes: int

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha > 1:
            raise ConfigError(f"alpha must be finite and <= 1, got {self.alpha}")
        if int(self.num_classes) != self.num_classes or self.num_classes < 2:
            raise ConfigError(f"num_classes must be an integer >= 2, got {self.num_classes}")


def one_hot(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise InvalidInputError("label out of range")
    return np.eye(num_classes, dtype=np.float64)[labels]


def _check_target(t, cfg=None):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        raise InvalidInputError("target must be a vector")
    if cfg is not None and t.shape[-1] != cfg.num_classes:
        raise InvalidInputError(
            f"target has {t.shape[-1]} classes but config says {cfg.num_classes}"
        )
    return t


def smooth_target(t, cfg):
    """Return ``(1 - alpha) t + alpha / K``."""
    t = _check_target(t, cfg)
    return (1.0 - cfg.alpha) * t + cfg.alpha / cfg.num_classes


def loss_ce(pi, t):
    """Cross entropy ``-sum_k t_k log pi_k`` over the last axis.

    Terms with ``t_k == 0`` are dropped, so a perfect one-hot prediction
    costs exactly 0.  A zero probability under a non-zero target weight
    yields an infinite loss (signed like the weight) and a
    :class:`LogOfZeroWarning` instead of being clamped.
    """
    pi = np.asarray(pi, dtype=np.float64)
    t = _check_target(t)
    if pi.shape[-1] != t.shape[-1]:
        raise InvalidInputError("pi and target disagree on the number of classes")
    active = t != 0
    zero_hit = active & (pi <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(active, np.log(np.where(active & ~zero_hit, pi, 1.0)), 0.0)
        terms = np.where(zero_hit, np.sign(t) * np.inf, -t * logs)
    if np.any(zero_hit):
        warnings.warn("log(0) under a non-zero target weight", LogOfZeroWarning, stacklevel=2)
    return terms.sum(axis=-1)


def loss_ls(pi, t, cfg):
    """Label-smoothing loss: cross entropy against the smoothed target."""
    return loss_ce(pi, smooth_target(t, cfg))


def kl_uniform(pi):
    """``KL(u || pi)`` for the uniform distribution ``u``."""
    pi = np.asarray(pi, dtype=np.float64)
    k = pi.shape[-1]
    with np.errstate(divide="ignore"):
        return (np.log(1.0 / k) - np.log(pi)).sum(axis=-1) / k


def grad_ce_logits(pi, t):
    """Gradient of the CE loss w.r.t. the logits, ``pi - t``."""
    pi = np.asarray(pi, dtype=np.float64)
    return pi - _check_target(t)


def grad_ls_logits(pi, t, cfg):
    pi = np.asarray(pi, dtype=np.float64)
    return pi - smooth_target(t, cfg)


def grad_suppression(t, cfg):
    """LS-minus-CE logit gradient, ``alpha t_k - alpha / K``.

    Positive components are pushed down by gradient descent; for a one-hot
    or peaked target that is the max logit.
    """
    t = _check_target(t, cfg)
    return cfg.alpha * t - cfg.alpha / cfg.num_classes


def suppression_at_max(p_error, cfg):
    """Suppression on the max logit given the true error probability."""
    p_error = np.asarray(p_error, dtype=np.float64)
    if np.any((p_error < 0) | (p_error > 1)):
        raise InvalidInputError("p_error must lie in [0, 1]")
    return (cfg.alpha * (1.0 - p_error) - cfg.alpha / cfg.num_classes)[()]


def grad_suppression_onehot(correct, cfg):
    """Max-logit suppression under a sampled one-hot label.

    A correct prediction has its max logit suppressed by
    ``alpha - alpha / K``; an incorrect one only receives ``-alpha / K``.
    """
    correct = np.asarray(correct, dtype=bool)
    return (np.where(correct, cfg.alpha, 0.0) - cfg.alpha / cfg.num_classes)[()]
