"""Desk-scale reproduction of the label-smoothing / selective-classification arc.

For each seed, CE and LS models are trained on the same mixture sample and
evaluated on shared validation, evaluation and shifted-evaluation draws.
:func:`verdicts` turns the per-seed results into directional pass/fail
checks:

* ``aurc_order`` / ``coverage_at_low_risk``: MSP gets worse as alpha grows;
* ``vmax_given_msp``: LS errors carry a larger max logit than correct
  predictions at equal MSP, CE does not;
* ``logit_norm``: normalised max-logit recovers AURC for LS but barely
  moves CE;
* ``shift_mix``: accepted shifted-source errors at 10% pooled coverage
  grow with alpha.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis, data, normalization, scores, selective, trainer

__all__ = [
    "ReproConfig",
    "ModelResult",
    "SeedResult",
    "Verdict",
    "GEOMETRIES",
    "default_repro_spec",
    "default_train_config",
    "run_seed",
    "run_all",
    "verdicts",
    "worker_count",
]

log = logging.getLogger(__name__)

# sample streams; training uses stream 0 inside trainer.train
STREAM_TRAIN, STREAM_VAL, STREAM_EVAL, STREAM_SHIFT = 0, 1, 2, 3


GEOMETRIES = ("circle", "random")


def default_repro_spec(seed=0, geometry="circle"):
    if geometry == "random":
        return data.random_means_spec(seed=seed)
    return data.default_spec(seed=seed)


def default_train_config(geometry="circle"):
    """Training defaults per geometry; the random-means preset uses one narrow hidden layer."""
    if geometry == "random":
        return trainer.TrainConfig(hidden=(32,), epochs=20)
    return trainer.TrainConfig()


@dataclass(frozen=True)
class ReproConfig:
    seeds: tuple = (0, 1, 2, 3, 4)
    alphas: tuple = (0.0, 0.1, 0.2, 0.3)
    n_train: int = 20_000
    n_val: int = 5_000
    n_eval: int = 5_000
    n_shift: int = 5_000
    shift_sigmas: float = 2.0
    shift_coverage: float = 0.1
    train: trainer.TrainConfig = field(default_factory=trainer.TrainConfig)
    vmax_window: float = 0.05
    vmax_min_count: int = analysis.DEFAULT_MIN_COUNT
    vmax_alpha_min: float = 0.2
    quick: bool = False

    def quick_version(self):
        return replace(self, n_train=5_000, n_val=2_000, n_eval=2_000, n_shift=2_000,
                       train=replace(self.train, epochs=max(1, self.train.epochs // 4)), quick=True)


@dataclass
class ModelResult:
    alpha: float
    error_rate: float
    aurc_msp: float
    aurc_norm: float
    p_best: float
    curve_msp: selective.RCCurve
    vmax_stats: dict
    shift_report: dict
    mean_logit: float


@dataclass
class SeedResult:
    seed: int
    models: list

    def by_alpha(self, alpha):
        for m in self.models:
            if m.alpha == alpha:
                return m
        raise KeyError(alpha)


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    detail: str
    advisory: bool = False
    low_confidence: bool = False

    def line(self):
        tags = "".join(f" [{t}]" for t, on in (("advisory", self.advisory),
                                               ("low-confidence", self.low_confidence)) if on)
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}{tags}: {self.detail}"


def _evaluate(model, val, ev, shifted, cfg, alpha):
    v_ev = trainer.forward(model, ev.x)
    pi = scores.softmax(v_ev)
    correct = v_ev.argmax(axis=1) == ev.y
    u_msp = scores.score_msp(pi)
    curve = selective.rc_curve(u_msp, correct)

    v_val = trainer.forward(model, val.x)
    p_best, _, _ = normalization.search_p(v_val, val.y)
    u_norm = normalization.score_maxlogit_norm(v_ev, normalization.NormConfig(p=p_best))
    aurc_norm = selective.aurc(selective.rc_curve(u_norm, correct))

    vmax_stats = analysis.conditional_vmax_stats(
        pi.max(axis=1), v_ev.max(axis=1), correct,
        window=cfg.vmax_window, min_count=cfg.vmax_min_count,
    )

    v_sh = trainer.forward(model, shifted.x)
    pi_sh = scores.softmax(v_sh)
    u_all = np.concatenate([u_msp, scores.score_msp(pi_sh)])
    c_all = np.concatenate([correct, v_sh.argmax(axis=1) == shifted.y])
    src = np.array([ev.source_tag] * len(ev) + [shifted.source_tag] * len(shifted), dtype=object)
    report = selective.shift_mix_report(u_all, c_all, src, cfg.shift_coverage)

    return ModelResult(
        alpha=alpha,
        error_rate=float(1.0 - correct.mean()),
        aurc_msp=selective.aurc(curve),
        aurc_norm=aurc_norm,
        p_best=p_best,
        curve_msp=curve,
        vmax_stats=vmax_stats,
        shift_report=report,
        mean_logit=float(v_ev.mean()),
    )


def run_seed(seed, cfg=ReproConfig(), spec=None):
    """Train every alpha for one seed and evaluate it."""
    spec = default_repro_spec(seed) if spec is None else replace(spec, seed=seed)
    train_set = data.sample_dataset(spec, cfg.n_train, stream=STREAM_TRAIN)
    val = data.sample_dataset(spec, cfg.n_val, stream=STREAM_VAL)
    ev = data.sample_dataset(spec, cfg.n_eval, stream=STREAM_EVAL)
    shifted = data.sample_dataset(data.default_shift(spec, cfg.shift_sigmas), cfg.n_shift, stream=STREAM_SHIFT)
    models = []
    for alpha in cfg.alphas:
        tcfg = replace(cfg.train, alpha=alpha, seed=seed)
        model = trainer.train(spec, cfg.n_train, tcfg, dataset=train_set)
        models.append(_evaluate(model, val, ev, shifted, cfg, alpha))
        log.info("seed %d alpha %.2f: err %.4f aurc %.5f", seed, alpha, models[-1].error_rate, models[-1].aurc_msp)
    return SeedResult(seed, models)


def worker_count():
    """Worker cap from ``SCREJECT_THREADS`` (default: CPU count)."""
    env = os.environ.get("SCREJECT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _run_seed_args(args):
    return run_seed(*args)


def run_all(cfg=ReproConfig(), spec=None, workers=None):
    workers = worker_count() if workers is None else workers
    jobs = [(s, cfg, spec) for s in cfg.seeds]
    if workers <= 1 or len(jobs) == 1:
        return [run_seed(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_seed_args, jobs))


# --- verdicts ---------------------------------------------------------------


def _paired_centers(stats):
    corr, inc = stats["correct"], stats["incorrect"]
    common = np.intersect1d(np.round(corr.centers, 9), np.round(inc.centers, 9))
    ic = np.searchsorted(np.round(corr.centers, 9), common)
    ii = np.searchsorted(np.round(inc.centers, 9), common)
    return corr, inc, ic, ii


def vmax_separation(stats):
    """Fractions of shared window centers where (incorrect > correct) and where
    the two means differ by less than one pooled std."""
    corr, inc, ic, ii = _paired_centers(stats)
    if ic.size == 0:
        return float("nan"), float("nan"), 0
    above = inc.mean[ii] > corr.mean[ic]
    n1, n2 = corr.count[ic], inc.count[ii]
    pooled = np.sqrt((n1 * corr.std[ic] ** 2 + n2 * inc.std[ii] ** 2) / (n1 + n2))
    close = np.abs(inc.mean[ii] - corr.mean[ic]) < pooled
    return float(above.mean()), float(close.mean()), int(ic.size)


def _count_ok(flags, need):
    return sum(bool(f) for f in flags) >= need


def _nondecreasing_with_one_inversion(values):
    inversions = sum(1 for a, b in zip(values, values[1:]) if b < a)
    return inversions <= 1


def verdicts(results, cfg=ReproConfig()):
    """Directional checks over per-seed results; returns a list of :class:`Verdict`."""
    n = len(results)
    need = math.ceil(0.8 * n)  # 4 of 5
    majority = n // 2 + 1
    alphas = list(cfg.alphas)
    ls_alphas = [a for a in alphas if a > 0]
    advisory = cfg.quick
    low = n < 5
    out = []

    # mean AURC strictly increasing in alpha
    mean_aurc = [float(np.mean([r.by_alpha(a).aurc_msp for r in results])) for a in alphas]
    ordered = all(x < y for x, y in zip(mean_aurc, mean_aurc[1:]))
    out.append(Verdict(
        "aurc_order", ordered,
        "mean AURC(MSP) by alpha: " + ", ".join(f"{a:g}={v:.6f}" for a, v in zip(alphas, mean_aurc)),
        advisory, low,
    ))

    # coverage at a risk of half the CE error: CE beats every LS model
    flags, parts = [], []
    for r in results:
        ce = r.by_alpha(0.0)
        target = 0.5 * ce.error_rate
        covs = {a: selective.coverage_at_risk(r.by_alpha(a).curve_msp, target) for a in alphas}
        flags.append(all(covs[0.0] > covs[a] for a in ls_alphas))
        parts.append(f"seed {r.seed}: " + " ".join(f"{a:g}={c:.4f}" for a, c in covs.items()))
    out.append(Verdict(
        "coverage_at_low_risk", _count_ok(flags, need),
        f"{sum(flags)}/{n} seeds CE best; " + "; ".join(parts), advisory, low,
    ))

    # max logit given MSP
    flags, parts = [], []
    for r in results:
        ok = True
        bits = []
        for a in alphas:
            above, close, m = vmax_separation(r.by_alpha(a).vmax_stats)
            if a == 0.0:
                ok &= m > 0 and close >= 0.7
                bits.append(f"CE close={close:.2f}/{m}")
            elif a >= cfg.vmax_alpha_min:
                ok &= m > 0 and above >= 0.7
                bits.append(f"LS{a:g} above={above:.2f}/{m}")
        flags.append(ok)
        parts.append(f"seed {r.seed}: " + " ".join(bits))
    out.append(Verdict(
        "vmax_given_msp", _count_ok(flags, majority),
        f"{sum(flags)}/{n} seeds; " + "; ".join(parts), advisory, low,
    ))

    # logit normalisation
    flags, parts = [], []
    for r in results:
        gains = {a: r.by_alpha(a).aurc_msp - r.by_alpha(a).aurc_norm for a in alphas}
        ls_gain = min(gains[a] for a in ls_alphas)
        flags.append(ls_gain > 0 and abs(gains[0.0]) < ls_gain)
        parts.append(f"seed {r.seed}: " + " ".join(
            f"{a:g}:{gains[a]:+.6f}(p={r.by_alpha(a).p_best:g})" for a in alphas))
    out.append(Verdict(
        "logit_norm", _count_ok(flags, need),
        f"{sum(flags)}/{n} seeds; AURC(MSP)-AURC(norm) " + "; ".join(parts), advisory, low,
    ))

    # shifted-source errors at pooled coverage
    flags, parts = [], []
    for r in results:
        errs = [r.by_alpha(a).shift_report.get("shift", selective.SourceStats(0, 0, 0.0)).errors for a in alphas]
        flags.append(_nondecreasing_with_one_inversion(errs))
        parts.append(f"seed {r.seed}: {errs}")
    out.append(Verdict(
        "shift_mix", _count_ok(flags, need),
        f"{sum(flags)}/{n} seeds; accepted shift errors by alpha " + "; ".join(parts), advisory, low,
    ))
    return out
