"""Rejection, risk-coverage curves, AURC and operating-point metrics.

Samples are sorted by uncertainty (ascending, ties broken by sample id)
and all samples sharing an uncertainty value are accepted together, so
every curve point corresponds to one achievable threshold ``tau`` of the
rule "accept iff U <= tau".  Nothing depends on input order.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "ScoredPrediction",
    "RCCurve",
    "SourceStats",
    "reject",
    "accept",
    "rc_curve",
    "rc_curve_from_predictions",
    "aurc",
    "coverage_at_risk",
    "risk_at_coverage",
    "select_threshold",
    "shift_mix_report",
]

# float slack when comparing a requested coverage with n/N
_COV_EPS = 1e-12


@dataclass(frozen=True)
class ScoredPrediction:
    uncertainty: float
    correct: bool
    sample_id: int
    source_tag: str = None
    v_max: float = None
    pi_max: float = None
    vprime_max: float = None


@dataclass(frozen=True)
class RCCurve:
    """Stepwise risk-coverage curve, one point per distinct uncertainty value.

    ``accepted[i]`` and ``errors[i]`` are cumulative counts up to and
    including the i-th tie block.
    """

    coverage: np.ndarray
    risk: np.ndarray
    threshold: np.ndarray
    accepted: np.ndarray
    errors: np.ndarray
    n_total: int

    def __len__(self):
        return len(self.coverage)

    def rows(self):
        return list(zip(self.coverage.tolist(), self.risk.tolist(), self.threshold.tolist()))


@dataclass(frozen=True)
class SourceStats:
    count: int
    errors: int
    error_rate: float


def accept(u, tau):
    """True where the prediction is accepted, i.e. ``U <= tau``."""
    return np.asarray(u) <= tau


def reject(u, tau):
    """True where the prediction is rejected, i.e. ``U > tau``."""
    return ~accept(u, tau)


def _prepare(uncertainty, correct, sample_id=None):
    u = np.asarray(uncertainty, dtype=np.float64).ravel()
    c = np.asarray(correct, dtype=bool).ravel()
    if u.size == 0:
        raise InvalidInputError("cannot build a risk-coverage curve from no samples")
    if u.shape != c.shape:
        raise InvalidInputError("uncertainty and correct must have the same length")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("uncertainty scores must be finite")
    if sample_id is None:
        sample_id = np.arange(u.size)
    sample_id = np.asarray(sample_id).ravel()
    if sample_id.shape != u.shape:
        raise InvalidInputError("sample_id must match uncertainty in length")
    return u, c, sample_id


def rc_curve(uncertainty, correct, sample_id=None):
    """Build the risk-coverage curve of a set of scored predictions."""
    u, c, sid = _prepare(uncertainty, correct, sample_id)
    order = np.lexsort((sid, u))
    u_sorted = u[order]
    err_cum = np.cumsum(~c[order])
    # last index of each tie block
    block_end = np.flatnonzero(np.append(u_sorted[1:] != u_sorted[:-1], True))
    accepted = block_end + 1
    errors = err_cum[block_end]
    n = u.size
    return RCCurve(
        coverage=accepted / n,
        risk=errors / accepted,
        threshold=u_sorted[block_end],
        accepted=accepted,
        errors=errors,
        n_total=n,
    )


def rc_curve_from_predictions(preds):
    preds = list(preds)
    ids = [p.sample_id for p in preds]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("sample ids must be unique")
    return rc_curve([p.uncertainty for p in preds], [p.correct for p in preds], ids)


def aurc(curve, n_total=None):
    """Mean selective risk over the per-sample coverage levels n/N, n = 1..N.

    Every coverage level inside a tie block takes that block's risk.
    """
    n = curve.n_total if n_total is None else n_total
    sizes = np.diff(np.concatenate([[0], curve.accepted]))
    return float(np.dot(sizes, curve.risk) / n)


def coverage_at_risk(curve, target_risk):
    """Largest coverage whose selective risk is at most ``target_risk`` (0 if none)."""
    ok = curve.risk <= target_risk
    return float(curve.coverage[ok].max()) if np.any(ok) else 0.0


def risk_at_coverage(curve, target_cov):
    """Risk at the smallest curve coverage that reaches ``target_cov``."""
    if not 0 < target_cov <= 1:
        raise InvalidInputError(f"target coverage must be in (0, 1], got {target_cov}")
    idx = np.searchsorted(curve.coverage, target_cov - _COV_EPS, side="left")
    return float(curve.risk[min(idx, len(curve) - 1)])


def select_threshold(uncertainty, correct, target_risk, sample_id=None):
    """Threshold of the maximum-coverage point meeting ``target_risk``.

    Returns ``-inf`` (reject everything) when no point qualifies.
    """
    curve = rc_curve(uncertainty, correct, sample_id)
    ok = np.flatnonzero(curve.risk <= target_risk)
    if ok.size == 0:
        return -np.inf
    return float(curve.threshold[ok[-1]])


def shift_mix_report(uncertainty, correct, source, coverage):
    """Per-source accepted counts and errors at a pooled coverage level.

    The pooled set is thresholded like :func:`risk_at_coverage`: the
    smallest tie-respecting prefix whose coverage reaches ``coverage``.
    Returns ``{source: SourceStats}`` in order of first appearance;
    ``error_rate`` is NaN for a source with nothing accepted.
    """
    if not 0 < coverage <= 1:
        raise InvalidInputError(f"coverage must be in (0, 1], got {coverage}")
    u, c, _ = _prepare(uncertainty, correct)
    source = np.asarray(source, dtype=object).ravel()
    if source.shape != u.shape:
        raise InvalidInputError("source must match uncertainty in length")
    curve = rc_curve(u, c)
    idx = min(np.searchsorted(curve.coverage, coverage - _COV_EPS, side="left"), len(curve) - 1)
    taken = u <= curve.threshold[idx]
    report = {}
    for tag in dict.fromkeys(source.tolist()):
        mask = taken & (source == tag)
        count = int(mask.sum())
        errors = int((mask & ~c).sum())
        report[tag] = SourceStats(count, errors, errors / count if count else float("nan"))
    return report
