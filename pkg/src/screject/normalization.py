"""Post-hoc logit normalisation and the validation search over ``p``.

The score is the negated max of the shifted, p-normalised logits,

    v' = (v + s) / ||v + s||_p,   U = -max_k v'_k,

with ``s = -mean(v)`` by default.  Unlike the softmax, ``v'`` is not
invariant to uniform logit shifts: for positive logits, adding ``eta > 0``
to every entry strictly lowers ``||v||_inf / ||v||_p``, so a larger max
logit at the same softmax output reads as more uncertain.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DegenerateInputError, InvalidInputError
from .scores import as_logits
from .selective import aurc, rc_curve

__all__ = [
    "NormConfig",
    "DEFAULT_P_GRID",
    "p_norm",
    "normalise_logits",
    "score_maxlogit_norm",
    "maxnorm_ratio",
    "check_result1",
    "search_p",
]

DEFAULT_P_GRID = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
SHIFT_MODES = ("mean", "none")


@dataclass(frozen=True)
class NormConfig:
    p: float = 2.0
    shift_mode: str = "mean"
    p_grid: tuple = DEFAULT_P_GRID

    def __post_init__(self):
        if not self.p >= 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.shift_mode not in SHIFT_MODES:
            raise ConfigError(f"shift_mode must be one of {SHIFT_MODES}, got {self.shift_mode!r}")
        grid = tuple(float(p) for p in self.p_grid)
        if not grid or any(p < 1 for p in grid) or list(grid) != sorted(set(grid)):
            raise ConfigError("p_grid must be a nonempty, strictly increasing set of values >= 1")
        object.__setattr__(self, "p_grid", grid)

    def with_p(self, p):
        return NormConfig(p=p, shift_mode=self.shift_mode, p_grid=self.p_grid)


def p_norm(x, p):
    """p-norm over the last axis, rescaled by the max magnitude to avoid overflow."""
    x = np.asarray(x, dtype=np.float64)
    scale = np.abs(x).max(axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    inner = (np.abs(x / safe) ** p).sum(axis=-1, keepdims=True) ** (1.0 / p)
    return (scale * inner)[..., 0]


def _shifted(v, cfg):
    v = as_logits(v)
    if cfg.shift_mode == "mean":
        return v - v.mean(axis=-1, keepdims=True)
    return v


def normalise_logits(v, cfg=NormConfig()):
    """Shift then divide by the p-norm; raises on vectors that shift to zero."""
    shifted = _shifted(v, cfg)
    norm = p_norm(shifted, cfg.p)
    if np.any(norm == 0):
        raise DegenerateInputError("logit vector is identically zero after the shift")
    return shifted / norm[..., None]


# v' lies in [-1, 1]; rounding keeps mathematically tied scores tied
SCORE_DECIMALS = 12


def score_maxlogit_norm(v, cfg=NormConfig()):
    """Uncertainty ``-max_k v'_k`` of the normalised logits, rounded to 12 decimals.

    With ``p = 1`` every vector whose only above-mean entry is the max
    scores exactly ``-1/2``; without rounding, last-bit noise would order
    such ties arbitrarily.
    """
    return np.round(-normalise_logits(v, cfg).max(axis=-1), SCORE_DECIMALS) + 0.0


def maxnorm_ratio(v, p):
    """``||v||_inf / ||v||_p``."""
    v = np.asarray(v, dtype=np.float64)
    return np.abs(v).max(axis=-1) / p_norm(v, p)


def check_result1(v, eta, p):
    """Check ``||v||_inf/||v||_p > ||v + eta||_inf/||v + eta||_p`` for positive ``v``.

    The hypotheses (all entries positive, at least two distinct values,
    ``eta > 0``, ``p >= 1``) are enforced and raise
    :class:`InvalidInputError` when violated.

    The comparison is evaluated through ``S(w) = sum_k (w_k / max w)^p``,
    whose increase is equivalent to a decrease of the ratio (the ratio is
    ``S^(-1/p)``).  Summing the per-entry differences, which are zero for
    the max entries and positive elsewhere, keeps the strict inequality
    visible in floating point even when both ratios round to the same value.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 2 or not np.all(np.isfinite(v)):
        raise InvalidInputError("v must be a finite vector with at least 2 entries")
    if np.any(v <= 0):
        raise InvalidInputError("v must be strictly positive")
    if np.all(v == v[0]):
        raise InvalidInputError("v needs at least two distinct values")
    if not eta > 0 or not np.isfinite(eta):
        raise InvalidInputError("eta must be positive and finite")
    if not p >= 1 or not np.isfinite(p):
        raise InvalidInputError("p must be a finite value >= 1")
    m = v.max()
    before = (v / m) ** p
    after = ((v + eta) / (m + eta)) ** p
    return bool((after - before).sum() > 0)


def search_p(logits, labels, cfg=NormConfig()):
    """Pick ``p`` from ``cfg.p_grid`` minimising validation AURC.

    Predictions are ``argmax`` of the raw logits (normalisation does not
    change them).  Ties go to the smaller ``p``.  Returns
    ``(p_best, aurc_best, {p: aurc})``.
    """
    logits = as_logits(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or len(logits) == 0:
        raise InvalidInputError("search_p needs a nonempty (N, K) validation set")
    if len(labels) != len(logits):
        raise InvalidInputError("need one label per validation sample")
    correct = logits.argmax(axis=1) == labels
    table = {}
    best_p, best = None, np.inf
    for p in cfg.p_grid:
        value = aurc(rc_curve(score_maxlogit_norm(logits, cfg.with_p(p)), correct))
        table[p] = value
        if value < best:
            best_p, best = p, value
    return best_p, best, table
