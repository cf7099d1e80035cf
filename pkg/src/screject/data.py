"""Synthetic Gaussian mixtures with an exact Bayes posterior, plus logit-record I/O.

Class-conditional densities are isotropic Gaussians sharing one ``sigma``,
so the true conditional ``pibar(x)`` is a softmax of

    log prior_k - ||x - mu_k||^2 / (2 sigma^2)

and the true error probability of any prediction is ``1 - pibar[pred]``.

Random streams come from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, stream])``; the algorithm name is recorded in
:data:`RNG_ALGORITHM` and written into run manifests.
"""

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, InvalidInputError, LogitFormatError
from .scores import softmax

__all__ = [
    "RNG_ALGORITHM",
    "MixtureSpec",
    "Dataset",
    "LogitRecord",
    "LogitSet",
    "default_spec",
    "random_means_spec",
    "make_rng",
    "bayes_posterior",
    "sample_dataset",
    "shift_spec",
    "default_shift",
    "p_error_of",
    "bayes_risk_mc",
    "spec_hash",
    "write_logit_records",
    "load_logit_records",
]

RNG_ALGORITHM = "numpy-PCG64/SeedSequence([seed,stream])"
HEADER_PREFIX = "# screject-logits v1 K="


@dataclass(frozen=True)
class MixtureSpec:
    means: np.ndarray
    sigma: float
    priors: np.ndarray
    seed: int = 0
    source_tag: str = "id"

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] < 2 or means.shape[1] < 1:
            raise ConfigError("means must be a (K >= 2, D >= 1) array")
        priors = np.array(self.priors, dtype=np.float64)
        if priors.shape != (means.shape[0],):
            raise ConfigError("need one prior per component")
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ConfigError("priors must be a probability distribution")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        diffs = means[:, None, :] - means[None, :, :]
        dist = np.sqrt((diffs**2).sum(-1)) + np.eye(len(means))
        if np.any(dist == 0):
            raise ConfigError("component means must be pairwise distinct")
        means.setflags(write=False)
        priors.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def num_classes(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]


@dataclass
class Dataset:
    """Samples ``x`` (N, D), labels ``y`` and exact posteriors ``pibar`` (N, K)."""

    x: np.ndarray
    y: np.ndarray
    pibar: np.ndarray
    source_tag: str = "id"

    def __len__(self):
        return len(self.y)


def default_spec(num_classes=8, radius=3.0, sigma=0.8, seed=0):
    """K equal-prior components evenly spaced on a circle in 2-D.

    With the defaults the Bayes error is about 15%.
    """
    angles = 2 * np.pi * np.arange(num_classes) / num_classes
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    priors = np.full(num_classes, 1.0 / num_classes)
    return MixtureSpec(means=means, sigma=sigma, priors=priors, seed=seed)


def random_means_spec(num_classes=10, dim=10, sigma=1.1, geometry_seed=1234, seed=0):
    """K equal-prior components with means drawn once from N(0, I_D).

    The means depend only on ``geometry_seed``; ``seed`` drives sampling as
    usual.  With the defaults the Bayes error is about 12%.
    """
    means = make_rng(geometry_seed, 0).standard_normal((num_classes, dim))
    priors = np.full(num_classes, 1.0 / num_classes)
    return MixtureSpec(means=means, sigma=sigma, priors=priors, seed=seed)


def make_rng(seed, stream=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def bayes_posterior(spec, x):
    """Exact class posterior ``pibar(x)`` for points ``x`` of shape (N, D) or (D,)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != spec.dim:
        raise InvalidInputError(f"points have dimension {x.shape[1]}, spec has {spec.dim}")
    sq = ((x[:, None, :] - spec.means[None, :, :]) ** 2).sum(-1)
    with np.errstate(divide="ignore"):
        log_prior = np.log(spec.priors)
    logits = log_prior[None, :] - sq / (2 * spec.sigma**2)
    # zero-prior components get -inf; keep softmax input finite
    logits = np.where(np.isfinite(logits), logits, -1e300)
    post = softmax(logits)
    return post[0] if single else post


def sample_dataset(spec, n, stream=0):
    """Draw ``n`` labelled samples; deterministic in ``(spec.seed, stream)``."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = make_rng(spec.seed, stream)
    y = rng.choice(spec.num_classes, size=n, p=spec.priors)
    x = spec.means[y] + spec.sigma * rng.standard_normal((n, spec.dim))
    return Dataset(x=x, y=y.astype(np.int64), pibar=bayes_posterior(spec, x), source_tag=spec.source_tag)


def shift_spec(spec, delta, source_tag="shift"):
    """Translate every mean by ``delta``; samples drawn from it carry ``source_tag``."""
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (spec.dim,):
        raise InvalidInputError(f"delta must have shape ({spec.dim},)")
    return replace(spec, means=spec.means + delta, source_tag=source_tag)


def default_shift(spec, magnitude=2.0):
    """Shift of length ``magnitude * sigma`` along the first axis."""
    delta = np.zeros(spec.dim)
    delta[0] = magnitude * spec.sigma
    return shift_spec(spec, delta)


def p_error_of(pibar, predicted):
    """True error probability ``1 - pibar[predicted]`` (batched over rows)."""
    pibar = np.asarray(pibar, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.int64)
    k = pibar.shape[-1]
    if np.any(predicted < 0) or np.any(predicted >= k):
        raise InvalidInputError("predicted label out of range")
    picked = np.take_along_axis(np.atleast_2d(pibar), np.atleast_1d(predicted)[:, None], axis=1)[:, 0]
    out = 1.0 - picked
    return out[0] if pibar.ndim == 1 else out


def bayes_risk_mc(spec, n=1_000_000, stream=99, chunk=200_000):
    """Monte Carlo Bayes risk ``E[1 - max_k pibar_k(x)]`` and its standard error."""
    rng = make_rng(spec.seed, stream)
    vals = []
    left = n
    while left > 0:
        m = min(chunk, left)
        y = rng.choice(spec.num_classes, size=m, p=spec.priors)
        x = spec.means[y] + spec.sigma * rng.standard_normal((m, spec.dim))
        vals.append(1.0 - bayes_posterior(spec, x).max(axis=1))
        left -= m
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std() / math.sqrt(n))


def spec_hash(spec):
    """Short sha256 of the mixture's defining values (hex floats, so exact)."""
    parts = [
        "means=" + ",".join(float(m).hex() for m in spec.means.ravel()),
        f"shape={spec.means.shape}",
        "sigma=" + spec.sigma.hex(),
        "priors=" + ",".join(float(p).hex() for p in spec.priors),
        f"seed={spec.seed}",
        f"tag={spec.source_tag}",
    ]
    return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


# --- logit records ----------------------------------------------------------


@dataclass(frozen=True)
class LogitRecord:
    logits: np.ndarray
    label: int
    source_tag: str = None


@dataclass
class LogitSet:
    """Column view of a logit-record file; indexing yields :class:`LogitRecord`."""

    logits: np.ndarray
    labels: np.ndarray
    sources: list = field(default_factory=list)

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise InvalidInputError("logits must be a (N, K) array")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not self.sources:
            self.sources = [None] * len(self.labels)

    @property
    def num_classes(self):
        return self.logits.shape[1]

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return LogitRecord(self.logits[i], int(self.labels[i]), self.sources[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def source_array(self):
        return np.array(["" if s is None else s for s in self.sources], dtype=object)

    @classmethod
    def from_records(cls, records, num_classes=None):
        records = list(records)
        if not records:
            if num_classes is None:
                raise InvalidInputError("cannot infer K from an empty record list")
            return cls(np.zeros((0, num_classes)), np.zeros(0, dtype=np.int64), [])
        return cls(
            np.stack([np.asarray(r.logits, dtype=np.float64) for r in records]),
            np.array([r.label for r in records], dtype=np.int64),
            [r.source_tag for r in records],
        )

    def concat(self, other):
        if self.num_classes != other.num_classes:
            raise InvalidInputError("cannot concatenate logit sets with different K")
        return LogitSet(
            np.concatenate([self.logits, other.logits]),
            np.concatenate([self.labels, other.labels]),
            list(self.sources) + list(other.sources),
        )


def _format_float(value):
    return "%.17g" % value


def write_logit_records(path, logits, labels=None, sources=None):
    """Write a logit-record file and return the number of rows.

    ``logits`` may be a :class:`LogitSet` (then ``labels``/``sources`` are
    taken from it) or an (N, K) array.
    """
    if isinstance(logits, LogitSet):
        labels = logits.labels if labels is None else labels
        sources = logits.sources if sources is None else sources
        logits = logits.logits
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or len(labels) != len(logits):
        raise InvalidInputError("logits must be (N, K) with one label per row")
    k = logits.shape[1]
    if sources is None:
        sources = [None] * len(labels)
    lines = [f"{HEADER_PREFIX}{k}"]
    for row, label, tag in zip(logits, labels, sources):
        if not 0 <= label < k:
            raise InvalidInputError(f"label {label} out of range for K={k}")
        cells = [_format_float(v) for v in row] + [str(int(label))]
        if tag:
            if "," in tag or "\n" in tag:
                raise InvalidInputError(f"source tag {tag!r} contains a separator")
            cells.append(tag)
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(labels)


def load_logit_records(path):
    """Parse a logit-record file into a :class:`LogitSet`.

    Raises :class:`LogitFormatError` naming the offending line for a bad
    header, a malformed row, a wrong column count, or an out-of-range label.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LogitFormatError(f"cannot read file ({exc.strerror})", path) from exc
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER_PREFIX):
        raise LogitFormatError(f"missing header '{HEADER_PREFIX}<K>'", path, 1)
    try:
        k = int(lines[0][len(HEADER_PREFIX):].strip())
    except ValueError:
        raise LogitFormatError("header K is not an integer", path, 1) from None
    if k < 2:
        raise LogitFormatError("header K must be >= 2", path, 1)

    logits, labels, sources = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) not in (k + 1, k + 2):
            raise LogitFormatError(
                f"expected {k} logits, a label and an optional tag; got {len(cells)} fields",
                path, lineno,
            )
        try:
            row = [float(c) for c in cells[:k]]
            label = int(cells[k])
        except ValueError as exc:
            raise LogitFormatError(f"malformed value ({exc})", path, lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise LogitFormatError("non-finite logit", path, lineno)
        if not 0 <= label < k:
            raise LogitFormatError(f"label {label} out of range for K={k}", path, lineno)
        logits.append(row)
        labels.append(label)
        sources.append(cells[k + 1].strip() if len(cells) == k + 2 and cells[k + 1].strip() else None)
    arr = np.array(logits, dtype=np.float64).reshape(len(labels), k)
    return LogitSet(arr, np.array(labels, dtype=np.int64), sources)
