"""Conditional logit statistics behind the diagnostic figures.

* mean/std of the max logit given the max softmax probability, split by
  correct and incorrect predictions;
* mean/std of the normalised max logit given the max logit, inside bins of
  similar max softmax probability;
* per-rank profiles of sorted logits, their signed p-th powers and exponentials.

Standard deviations are population (ddof=0) throughout.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "WindowedStats",
    "sliding_window_stats",
    "conditional_vmax_stats",
    "conditional_vprime_stats",
    "sorted_logit_profile",
    "signed_power",
    "window_slope",
    "DEFAULT_MIN_COUNT",
]

DEFAULT_MIN_COUNT = 10


@dataclass(frozen=True)
class WindowedStats:
    """Sliding-window mean/std of a quantity; only centers with enough support."""

    centers: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    count: np.ndarray
    window: float
    step: float
    min_count: int

    def __len__(self):
        return len(self.centers)

    def at(self, center, tol=1e-9):
        idx = np.flatnonzero(np.abs(self.centers - center) <= tol)
        if idx.size == 0:
            return None
        i = idx[0]
        return self.mean[i], self.std[i], int(self.count[i])


def _grid(lo, hi, step):
    k0 = int(np.floor(lo / step + 1e-9))
    k1 = int(np.ceil(hi / step - 1e-9))
    return np.round(np.arange(k0, k1 + 1) * step, 12)


def sliding_window_stats(x, y, window, step=None, min_count=DEFAULT_MIN_COUNT, lo=None, hi=None):
    """Mean and std of ``y`` over samples with ``x`` in ``[c - w/2, c + w/2]``.

    Centers lie on the grid ``k * step`` covering ``[lo, hi]`` (defaults to
    the range of ``x``); centers with fewer than ``min_count`` samples are
    dropped.  ``step`` defaults to ``window / 5``.
    """
    if not window > 0:
        raise InvalidInputError("window must be positive")
    step = window / 5 if step is None else step
    if not step > 0:
        raise InvalidInputError("step must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InvalidInputError("x and y must have the same length")
    if x.size == 0:
        empty = np.zeros(0)
        return WindowedStats(empty, empty, empty, np.zeros(0, dtype=np.int64), window, step, min_count)
    lo = x.min() if lo is None else lo
    hi = x.max() if hi is None else hi
    centers = _grid(lo, hi, step)

    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    # prefix sums, so each window costs two binary searches
    s1 = np.concatenate([[0.0], np.cumsum(ys)])
    half = window / 2
    left = np.searchsorted(xs, centers - half - 1e-12, side="left")
    right = np.searchsorted(xs, centers + half + 1e-12, side="right")
    counts = right - left
    keep = counts >= max(min_count, 1)
    centers, left, right, counts = centers[keep], left[keep], right[keep], counts[keep]
    means = (s1[right] - s1[left]) / counts
    # two-pass variance per window for accuracy
    stds = np.array([ys[a:b].std() for a, b in zip(left, right)]) if counts.size else np.zeros(0)
    return WindowedStats(centers, means, stds, counts.astype(np.int64), window, step, min_count)


def conditional_vmax_stats(pi_max, v_max, correct, window=0.05, step=None, min_count=DEFAULT_MIN_COUNT):
    """Windowed statistics of ``v_max`` as a function of ``pi_max``, per correctness group.

    Returns ``{"correct": WindowedStats, "incorrect": WindowedStats}``;
    centers cover ``[0, 1]``.
    """
    pi_max = np.asarray(pi_max, dtype=np.float64)
    v_max = np.asarray(v_max, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if pi_max is None or v_max is None or pi_max.shape != v_max.shape or pi_max.shape != correct.shape:
        raise InvalidInputError("pi_max, v_max and correct must be aligned arrays")
    return {
        name: sliding_window_stats(pi_max[mask], v_max[mask], window, step, min_count, lo=0.0, hi=1.0)
        for name, mask in (("correct", correct), ("incorrect", ~correct))
    }


def conditional_vprime_stats(pi_max, v_max, vprime_max, msp_bins, window=0.2, clip_sigmas=2.0,
                             step=None, min_count=DEFAULT_MIN_COUNT):
    """Windowed ``vprime_max`` given ``v_max`` inside each MSP bin.

    Within a bin ``[lo, hi)`` (the last bin is closed at 1), samples whose
    ``v_max`` falls outside ``mean +- clip_sigmas * std`` of the bin are
    discarded before windowing.  Returns a list of ``((lo, hi), WindowedStats)``.
    """
    pi_max = np.asarray(pi_max, dtype=np.float64)
    v_max = np.asarray(v_max, dtype=np.float64)
    vprime_max = np.asarray(vprime_max, dtype=np.float64)
    if not (pi_max.shape == v_max.shape == vprime_max.shape):
        raise InvalidInputError("pi_max, v_max and vprime_max must be aligned arrays")
    out = []
    for lo, hi in msp_bins:
        in_bin = (pi_max >= lo) & ((pi_max < hi) | ((hi >= 1.0) & (pi_max <= hi)))
        vm, vp = v_max[in_bin], vprime_max[in_bin]
        if vm.size:
            mu, sd = vm.mean(), vm.std()
            keep = np.abs(vm - mu) <= clip_sigmas * sd
            vm, vp = vm[keep], vp[keep]
        out.append(((lo, hi), sliding_window_stats(vm, vp, window, step, min_count)))
    return out


def window_slope(stats):
    """Least-squares slope of the window means against their centers (NaN if < 2 centers)."""
    if len(stats) < 2:
        return float("nan")
    return float(np.polyfit(stats.centers, stats.mean, 1)[0])


def signed_power(v, p):
    """``sign(v) * |v|^p`` so negative entries keep their sign for any ``p``."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.abs(v) ** p


def sorted_logit_profile(logits, p=5.0):
    """Per-rank mean and std of sorted logits (highest first).

    Returns ``{"v": (mean, std), "v^p": (mean, std), "exp": (mean, std)}``
    with arrays of length K.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise InvalidInputError("need a nonempty (N, K) array of logits with consistent K")
    ranked = -np.sort(-logits, axis=1)
    out = {}
    for name, vals in (("v", ranked), ("v^p", signed_power(ranked, p)), ("exp", np.exp(ranked))):
        out[name] = (vals.mean(axis=0), vals.std(axis=0))
    return out
