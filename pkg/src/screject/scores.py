"""Softmax and the scalar uncertainty scores.

Every score follows the same sign convention: higher means more uncertain,
so a sample is accepted when its score is at or below the threshold.
All functions operate on the last axis, so a batch of shape ``(N, K)``
yields ``N`` scores.  Arithmetic is float64 throughout.
"""

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "as_logits",
    "as_probs",
    "logsumexp",
    "softmax",
    "score_msp",
    "score_entropy",
    "score_doctor",
    "score_energy",
    "SOFTMAX_SCORES",
]


def as_logits(v):
    """Validate and convert logits to a float64 array with ``K >= 2``."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise InvalidInputError(f"logits need at least 2 classes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logits contain NaN or Inf")
    return arr


def as_probs(pi, atol=1e-9):
    """Validate a probability vector (or batch of them)."""
    arr = np.asarray(pi, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise InvalidInputError(f"probabilities need at least 2 classes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidInputError("probabilities must be finite and non-negative")
    if np.any(np.abs(arr.sum(axis=-1) - 1.0) > atol):
        raise InvalidInputError("probabilities must sum to 1")
    return arr


def logsumexp(v):
    v = as_logits(v)
    m = v.max(axis=-1, keepdims=True)
    out = m + np.log(np.exp(v - m).sum(axis=-1, keepdims=True))
    return out[..., 0]


def softmax(v):
    """Max-subtracted softmax over the last axis."""
    v = as_logits(v)
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def score_msp(pi):
    """Negative maximum softmax probability, in ``[-1, -1/K]``."""
    return -as_probs(pi).max(axis=-1)


def score_entropy(pi):
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    pi = as_probs(pi)
    logs = np.log(np.where(pi > 0, pi, 1.0))
    return -(pi * logs).sum(axis=-1)


def score_doctor(pi):
    """DOCTOR score: negative Euclidean norm of the softmax vector."""
    pi = as_probs(pi)
    return -np.sqrt((pi * pi).sum(axis=-1))


def score_energy(v):
    """Energy score ``-logsumexp(v)``; takes logits, not probabilities."""
    return -logsumexp(v)


# scores that are functions of the softmax output
SOFTMAX_SCORES = {
    "msp": score_msp,
    "entropy": score_entropy,
    "doctor": score_doctor,
}
