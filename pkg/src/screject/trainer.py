"""Small ReLU MLP trained with CE / label smoothing by SGD with momentum.

Backprop starts from the logit gradient of :mod:`screject.losses`, so the
gradient entering the final linear layer is exactly ``softmax(v) - target``
(scaled by ``1/batch``) and the LS/CE difference propagates linearly.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .exceptions import ConfigError, InvalidInputError, TrainingDivergedError
from .losses import SmoothingConfig, grad_ls_logits, loss_ls, one_hot
from .scores import softmax

__all__ = [
    "MLPModel",
    "TrainConfig",
    "init_model",
    "forward",
    "backward",
    "train",
    "dump_logits",
    "write_manifest",
    "read_manifest",
]

log = logging.getLogger(__name__)

INIT_SCHEME = "uniform(+-1/sqrt(fan_in)) weights, zero biases"


@dataclass
class MLPModel:
    weights: list
    biases: list
    activation: str = "relu"
    history: list = field(default_factory=list)

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def num_classes(self):
        return self.weights[-1].shape[1]

    def copy(self):
        return MLPModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
            list(self.history),
        )

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.0
    epochs: int = 40
    batch_size: int = 128
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if self.alpha > 1:
            raise ConfigError(f"alpha must be <= 1, got {self.alpha}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")


def init_model(layer_sizes, seed=0, stream=1000):
    """Fan-in scaled uniform initialisation from a seeded PCG64 stream."""
    rng = data_mod.make_rng(seed, stream)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPModel(weights, biases)


def _forward_cache(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.layer_sizes[0]:
        raise InvalidInputError(
            f"input dimension {x.shape[-1]} does not match model input {model.layer_sizes[0]}"
        )
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def forward(model, x):
    """Logits for a single point ``(D,)`` or a batch ``(N, D)``."""
    x = np.asarray(x, dtype=np.float64)
    out = _forward_cache(model, np.atleast_2d(x))[-1]
    return out[0] if x.ndim == 1 else out


def _backprop(model, acts, seed):
    """Propagate a logit-level gradient ``seed`` (N, K) to all parameters."""
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    delta = seed
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return grads_w, grads_b


def backward(model, x, target, cfg, return_seed=False):
    """Gradients of the mean LS loss over the batch w.r.t. every parameter.

    ``target`` is an (N, K) distribution (one-hot or soft).  Returns
    ``(loss, grads_w, grads_b)``; with ``return_seed`` the logit-level
    gradient fed into backprop is appended.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    acts = _forward_cache(model, x)
    pi = softmax(acts[-1])
    n = len(x)
    loss = float(np.mean(loss_ls(pi, target, cfg)))
    seed = grad_ls_logits(pi, target, cfg) / n
    grads_w, grads_b = _backprop(model, acts, seed)
    if return_seed:
        return loss, grads_w, grads_b, seed
    return loss, grads_w, grads_b


def backprop_logit_gradient(model, x, seed):
    """Backpropagate an arbitrary logit gradient through ``model`` at ``x``."""
    acts = _forward_cache(model, np.atleast_2d(x))
    return _backprop(model, acts, np.atleast_2d(seed))


def train(spec, n_train, tcfg, dataset=None):
    """Train a ``D -> hidden -> K`` MLP on samples from ``spec``.

    Mini-batch SGD with momentum, constant learning rate, a fixed shuffle
    per epoch drawn from the seeded stream, and no model selection (the
    last iterate is returned).  ``model.history`` holds the mean training
    loss of each epoch.  Raises :class:`TrainingDivergedError` on a
    non-finite loss.
    """
    if dataset is None:
        dataset = data_mod.sample_dataset(spec, n_train, stream=0)
    k = spec.num_classes
    cfg = SmoothingConfig(tcfg.alpha, k)
    model = init_model([spec.dim, *tcfg.hidden, k], seed=tcfg.seed)
    targets = one_hot(dataset.y, k)
    x = dataset.x
    rng = data_mod.make_rng(tcfg.seed, 2000)
    velocity = [np.zeros_like(p) for p in model.parameters()]
    n = len(x)

    for epoch in range(tcfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, tcfg.batch_size):
            idx = order[start:start + tcfg.batch_size]
            loss, gw, gb = backward(model, x[idx], targets[idx], cfg)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            total += loss * len(idx)
            grads = []
            for w, g_w, g_b in zip(model.weights, gw, gb):
                grads.append(g_w + tcfg.weight_decay * w)
                grads.append(g_b)
            for p, v, g in zip(model.parameters(), velocity, grads):
                v *= tcfg.momentum
                v += g
                p -= tcfg.learning_rate * v
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        model.history.append(epoch_loss)
        log.debug("epoch %d loss %.6f", epoch, epoch_loss)
    return model


def write_manifest(path, entries):
    """Write a ``key=value`` manifest; values are rendered with ``str``."""
    lines = [f"{k}={v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def manifest_entries(model, spec, tcfg, extra=None):
    entries = {
        "seed": tcfg.seed,
        "alpha": tcfg.alpha,
        "architecture": "-".join(str(s) for s in model.layer_sizes) + f" {model.activation}",
        "init": INIT_SCHEME,
        "optimiser": f"sgd momentum={tcfg.momentum} lr={tcfg.learning_rate} "
                     f"weight_decay={tcfg.weight_decay} batch_size={tcfg.batch_size} epochs={tcfg.epochs}",
        "rng": data_mod.RNG_ALGORITHM,
        "spec_hash": data_mod.spec_hash(spec),
    }
    if extra:
        entries.update(extra)
    return entries


def dump_logits(model, dataset, path, manifest=None):
    """Write float64 logits for every sample and a manifest next to them.

    The manifest goes to ``<path>.manifest``.  Returns the record count.
    """
    path = Path(path)
    logits = forward(model, dataset.x)
    tags = [dataset.source_tag] * len(dataset)
    count = data_mod.write_logit_records(path, logits, dataset.y, tags)
    if manifest is not None:
        write_manifest(path.with_name(path.name + ".manifest"), {**manifest, "records": count})
    return count
