"""Command-line interface: ``screject train|eval|rc|analyze|repro``.

Every subcommand accepts ``--config FILE`` (flat ``key=value`` lines whose
keys are flag names; command-line flags win), ``--precision`` for table
output and ``--deterministic`` to drop the timestamp stamped into SVGs.

Exit codes: 0 success, 2 usage, 3 training divergence, 4 I/O or format
error, 5 reproduction criterion failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, data, experiments, normalization, scores, selective, svg, trainer
from .exceptions import ConfigError, InvalidInputError, LogitFormatError, TrainingDivergedError

__all__ = ["main", "build_parser", "cmd_train", "cmd_eval", "cmd_rc", "cmd_analyze", "cmd_repro"]

log = logging.getLogger("screject")

EXIT_OK, EXIT_USAGE, EXIT_TRAIN, EXIT_IO, EXIT_CRITERION = 0, 2, 3, 4, 5
SCORE_CHOICES = ("msp", "entropy", "doctor", "energy", "maxlogit-norm")


class UsageError(Exception):
    pass


# --- parsing helpers --------------------------------------------------------


def _float_list(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seeds(text):
    """``N`` means seeds ``0..N-1``; a comma list is taken literally."""
    vals = _int_list(text)
    if "," in str(text):
        return vals
    if len(vals) != 1 or vals[0] < 1:
        raise argparse.ArgumentTypeError("--seeds takes a positive count or a comma list")
    return list(range(vals[0]))


def read_config_file(path):
    entries = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        entries[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return entries


def _add_common(p):
    p.add_argument("--config", help="key=value file of flag defaults (flags override)")
    p.add_argument("--precision", type=int, default=6, help="decimals in tables (default 6)")
    p.add_argument("--deterministic", action="store_true", help="omit the timestamp in SVG output")
    p.add_argument("-v", "--verbose", action="store_true")


# geometry presets; flags left unset fall back to these
DATA_DEFAULTS = {
    "circle": {"num_classes": 8, "radius": 3.0, "sigma": 0.8},
    "random": {"num_classes": 10, "dim": 10, "sigma": 1.1},
}
TRAIN_FIELDS = {"epochs": "epochs", "batch_size": "batch_size", "lr": "learning_rate",
                "momentum": "momentum", "weight_decay": "weight_decay", "hidden": "hidden"}


def _add_data(p):
    p.add_argument("--geometry", choices=experiments.GEOMETRIES, default="circle",
                   help="circle: K means on a 2-D circle; random: K Gaussian means in D dims")
    p.add_argument("--num-classes", type=int, default=None)
    p.add_argument("--radius", type=float, default=None, help="circle geometry only")
    p.add_argument("--dim", type=int, default=None, help="random geometry only")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--shift-sigmas", type=float, default=2.0, help="shift magnitude in units of sigma")


def _add_training(p):
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--hidden", type=_int_list, default=None,
                   help="hidden widths, e.g. 64,64 (empty for a linear model)")


def _resolve_defaults(args):
    """Fill unset data and training flags from the geometry preset."""
    geometry = getattr(args, "geometry", None)
    if geometry is None:
        return args
    for key, value in DATA_DEFAULTS[geometry].items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key in ("radius", "dim"):
        if key not in DATA_DEFAULTS[geometry]:
            if getattr(args, key) is not None:
                raise UsageError(f"--{key} does not apply to the {geometry} geometry")
            delattr(args, key)
    preset = experiments.default_train_config(geometry)
    for flag, field_name in TRAIN_FIELDS.items():
        if getattr(args, flag, None) is None:
            value = getattr(preset, field_name)
            setattr(args, flag, list(value) if flag == "hidden" else value)
    return args


def build_parser():
    parser = argparse.ArgumentParser(prog="screject", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train CE/LS models and dump logits")
    _add_common(p)
    _add_data(p)
    _add_training(p)
    p.add_argument("--out", help="output directory (required)")
    p.add_argument("--alphas", type=_float_list, default="0", help="comma list of smoothing factors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=20_000)
    p.add_argument("--n-val", type=int, default=5_000)
    p.add_argument("--n-eval", type=int, default=5_000)
    p.add_argument("--n-shift", type=int, default=0, help="also dump a shifted evaluation set")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="selective-classification metrics of a logit file")
    _add_common(p)
    p.add_argument("logits", nargs="?", help="logit-record file")
    p.add_argument("--score", choices=SCORE_CHOICES, default="msp")
    p.add_argument("--val", help="validation logit file (required for maxlogit-norm)")
    p.add_argument("--shift-mode", choices=normalization.SHIFT_MODES, default="mean")
    p.add_argument("--p-grid", type=_float_list, default="1,2,3,4,5,6,7,8")
    p.add_argument("--risks", type=_float_list, default="0.01,0.05,0.1")
    p.add_argument("--coverages", type=_float_list, default="0.1,0.25,0.5,0.75,1")
    p.add_argument("--out", help="also write the report here (plus a .manifest)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rc", help="risk-coverage tables and an overlay SVG")
    _add_common(p)
    p.add_argument("logits", nargs="*", help="logit-record files")
    p.add_argument("--score", choices=SCORE_CHOICES[:-1], default="msp")
    p.add_argument("--out", help="output directory (required)")
    p.add_argument("--log-coverage", action="store_true", help="log-scale coverage axis")
    p.set_defaults(func=cmd_rc)

    p = sub.add_parser("analyze", help="conditional logit statistics")
    _add_common(p)
    p.add_argument("logits", nargs="*", help="logit-record files (concatenated)")
    p.add_argument("--out", help="output directory (required)")
    p.add_argument("--window", type=float, default=0.05, help="pi_max window for v_max statistics")
    p.add_argument("--step", type=float, default=None, help="window step (default window/5)")
    p.add_argument("--min-count", type=int, default=analysis.DEFAULT_MIN_COUNT)
    p.add_argument("--msp-bins", type=_float_list, default="0.5,0.6,0.7,0.8,0.9,1.0",
                   help="edges of the MSP bins for v'_max given v_max")
    p.add_argument("--vprime-window", type=float, default=0.2)
    p.add_argument("--clip-sigmas", type=float, default=2.0)
    p.add_argument("--norm-p", type=float, default=2.0, help="p of the normalised logits")
    p.add_argument("--profile-p", type=float, default=5.0, help="power in the sorted-logit profile")
    p.add_argument("--coverage", type=float, default=0.1, help="pooled coverage of the per-source report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("repro", help="train CE/LS over seeds and check the directional criteria")
    _add_common(p)
    _add_data(p)
    _add_training(p)
    p.add_argument("--out", help="output directory (required)")
    p.add_argument("--seeds", type=_seeds, default="5", help="seed count, or a comma list of seeds")
    p.add_argument("--alphas", type=_float_list, default="0,0.1,0.2,0.3")
    p.add_argument("--quick", action="store_true", help="smaller N and fewer epochs; verdicts advisory")
    p.set_defaults(func=cmd_repro)
    return parser


def _subparser(parser, name):
    return parser._subparsers._group_actions[0].choices[name]


def _apply_config(parser, argv, args):
    """Re-parse with ``--config`` entries installed as subcommand defaults."""
    entries = read_config_file(args.config)
    subparser = _subparser(parser, args.command)
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in entries.items():
        if key not in actions or key in ("config", "help", "func"):
            raise UsageError(f"{args.config}: unknown key {key!r} for {args.command}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _require(args, *names):
    for name in names:
        if not getattr(args, name):
            raise UsageError(f"{args.command}: --{name.replace('_', '-')} is required")


# --- output helpers ---------------------------------------------------------


def _fmt(x, prec):
    return f"{x:.{prec}f}"


def _manifest(args, extra=None):
    skip = {"func", "config", "verbose"}
    entries = {"command": args.command}
    for key, value in sorted(vars(args).items()):
        if key in skip or key == "command":
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
        entries[key] = value
    if args.config:
        entries["config_file"] = args.config
    entries.update(extra or {})
    return entries


def _load(path):
    logit_set = data.load_logit_records(path)
    if len(logit_set) == 0:
        raise LogitFormatError("file holds no records", path)
    return logit_set


def _score(name, logits):
    if name == "energy":
        return scores.score_energy(logits)
    pi = scores.softmax(logits)
    return {"msp": scores.score_msp, "entropy": scores.score_entropy, "doctor": scores.score_doctor}[name](pi)


def _table_names(paths):
    """Distinct output stems: file stem, else parent_stem, else indexed."""
    names = [Path(p).stem for p in paths]
    if len(set(names)) < len(names):
        names = [f"{Path(p).parent.name}_{Path(p).stem}" for p in paths]
    if len(set(names)) < len(names):
        names = [f"{i}_{n}" for i, n in enumerate(names)]
    return names


def _legend(path):
    manifest = Path(str(path) + ".manifest")
    if manifest.exists():
        m = trainer.read_manifest(manifest)
        if "alpha" in m:
            label = "CE" if float(m["alpha"]) == 0 else f"LS {float(m['alpha']):g}"
            return f"{label} ({Path(path).stem})"
    return Path(path).stem


# --- commands ---------------------------------------------------------------


def _spec_from(args, seed):
    if args.geometry == "random":
        return data.random_means_spec(num_classes=args.num_classes, dim=args.dim, sigma=args.sigma, seed=seed)
    return data.default_spec(num_classes=args.num_classes, radius=args.radius, sigma=args.sigma, seed=seed)


def _train_config(args, alpha=0.0, seed=0):
    return trainer.TrainConfig(
        alpha=alpha, epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
        momentum=args.momentum, weight_decay=args.weight_decay, seed=seed, hidden=tuple(args.hidden),
    )


def cmd_train(args):
    _require(args, "out", "alphas")
    configs = [_train_config(args, a, args.seed) for a in args.alphas]  # validates every alpha up front
    spec = _spec_from(args, args.seed)
    out = Path(args.out)
    splits = [("train", spec, args.n_train, experiments.STREAM_TRAIN),
              ("val", spec, args.n_val, experiments.STREAM_VAL),
              ("eval", spec, args.n_eval, experiments.STREAM_EVAL)]
    if args.n_shift > 0:
        splits.append(("shift", data.default_shift(spec, args.shift_sigmas), args.n_shift, experiments.STREAM_SHIFT))
    sets = {name: data.sample_dataset(s, n, stream=st) for name, s, n, st in splits}
    for tcfg in configs:
        run_dir = out / f"alpha{tcfg.alpha:g}"
        run_dir.mkdir(parents=True, exist_ok=True)
        log.info("training alpha=%g into %s", tcfg.alpha, run_dir)
        model = trainer.train(spec, args.n_train, tcfg, dataset=sets["train"])
        base = trainer.manifest_entries(model, spec, tcfg, _manifest(args, {"alpha": tcfg.alpha}))
        for name, dataset in sets.items():
            n = trainer.dump_logits(model, dataset, run_dir / f"{name}.logits", {**base, "split": name})
            print(f"{run_dir / (name + '.logits')}: {n} records")
    return EXIT_OK


def eval_report(args):
    """Build the eval report text; shared by the command and its tests."""
    logit_set = _load(args.logits)
    logits, labels = logit_set.logits, logit_set.labels
    correct = logits.argmax(axis=1) == labels
    prec = args.precision
    lines = ["# screject eval", f"file={args.logits}", f"score={args.score}", f"n={len(labels)}"]
    if args.score == "maxlogit-norm":
        val = _load(args.val)
        if val.num_classes != logit_set.num_classes:
            raise LogitFormatError(f"validation file has K={val.num_classes}, expected {logit_set.num_classes}",
                                   args.val)
        cfg = normalization.NormConfig(shift_mode=args.shift_mode, p_grid=tuple(args.p_grid))
        p_best, _, table = normalization.search_p(val.logits, val.labels, cfg)
        lines.append(f"validation={args.val}")
        lines.append(f"shift_mode={args.shift_mode}")
        for p, value in table.items():
            lines.append(f"val_aurc[p={p:g}]={_fmt(value, prec)}")
        lines.append(f"p={p_best:g}")
        u = normalization.score_maxlogit_norm(logits, cfg.with_p(p_best))
    else:
        u = _score(args.score, logits)
    curve = selective.rc_curve(u, correct)
    lines.append(f"error_rate={_fmt(1.0 - correct.mean(), prec)}")
    lines.append(f"aurc={_fmt(selective.aurc(curve), prec)}")
    for r in args.risks:
        lines.append(f"coverage@risk={r:g}: {_fmt(selective.coverage_at_risk(curve, r), prec)}")
    for c in args.coverages:
        lines.append(f"risk@coverage={c:g}: {_fmt(selective.risk_at_coverage(curve, c), prec)}")
    return "\n".join(lines) + "\n"


def cmd_eval(args):
    _require(args, "logits")
    if args.score == "maxlogit-norm" and not args.val:
        raise UsageError("eval: --score maxlogit-norm needs --val (p is searched on validation data)")
    if any(not 0 < c <= 1 for c in args.coverages):
        raise UsageError("eval: coverages must lie in (0, 1]")
    text = eval_report(args)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        trainer.write_manifest(args.out + ".manifest", _manifest(args))
    return EXIT_OK


def cmd_rc(args):
    _require(args, "out", "logits")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prec = args.precision
    series = []
    for path, name in zip(args.logits, _table_names(args.logits)):
        logit_set = _load(path)
        correct = logit_set.logits.argmax(axis=1) == logit_set.labels
        curve = selective.rc_curve(_score(args.score, logit_set.logits), correct)
        rows = ["coverage,risk,threshold"]
        rows += [",".join(_fmt(v, prec) for v in row) for row in curve.rows()]
        table = out / f"{name}.rc.csv"
        table.write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(f"{table}: {len(curve)} rows, aurc={_fmt(selective.aurc(curve), prec)}")
        series.append((_legend(path), curve.coverage, 100.0 * curve.risk))
    svg.write_line_chart(out / "rc.svg", series, title=f"Risk-coverage ({args.score})",
                         xlabel="coverage", ylabel="selective risk (%)",
                         log_x=args.log_coverage, deterministic=args.deterministic)
    trainer.write_manifest(out / "rc.manifest", _manifest(args))
    return EXIT_OK


def _write_csv(path, header, rows, prec):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer))
                                                             else _fmt(v, prec)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_analyze(args):
    _require(args, "out", "logits")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prec = args.precision
    logit_set = _load(args.logits[0])
    for path in args.logits[1:]:
        logit_set = logit_set.concat(_load(path))
    v = logit_set.logits
    correct = v.argmax(axis=1) == logit_set.labels
    pi_max = scores.softmax(v).max(axis=1)
    v_max = v.max(axis=1)

    # v_max given pi_max, correct and incorrect side by side
    stats = analysis.conditional_vmax_stats(pi_max, v_max, correct, args.window, args.step, args.min_count)
    centers = np.union1d(stats["correct"].centers, stats["incorrect"].centers)
    rows = []
    for c in centers:
        row = [c]
        for group in ("correct", "incorrect"):
            hit = stats[group].at(c)
            row += list(hit) if hit else [float("nan"), float("nan"), 0]
        rows.append(row)
    _write_csv(out / "vmax_given_msp.csv",
               ["pi_max", "correct_mean", "correct_std", "correct_count",
                "incorrect_mean", "incorrect_std", "incorrect_count"], rows, prec)
    svg.write_line_chart(
        out / "vmax_given_msp.svg",
        [(g, stats[g].centers, stats[g].mean) for g in ("correct", "incorrect")],
        title="mean max logit given max softmax", xlabel="max softmax probability", ylabel="max logit",
        deterministic=args.deterministic,
    )

    # v'_max given v_max within MSP bins
    edges = args.msp_bins
    bins = list(zip(edges[:-1], edges[1:]))
    vprime = normalization.normalise_logits(v, normalization.NormConfig(p=args.norm_p)).max(axis=1)
    per_bin = analysis.conditional_vprime_stats(pi_max, v_max, vprime, bins, args.vprime_window,
                                                args.clip_sigmas, None, args.min_count)
    rows = []
    for (lo, hi), ws in per_bin:
        rows += [[lo, hi, c, m, s, int(n)] for c, m, s, n in zip(ws.centers, ws.mean, ws.std, ws.count)]
    _write_csv(out / "vprime_given_vmax.csv", ["bin_lo", "bin_hi", "v_max", "mean", "std", "count"], rows, prec)
    svg.write_line_chart(
        out / "vprime_given_vmax.svg",
        [(f"MSP [{lo:g},{hi:g})", ws.centers, ws.mean) for (lo, hi), ws in per_bin],
        title=f"normalised max logit (p={args.norm_p:g}) given max logit", xlabel="max logit",
        ylabel="normalised max logit", deterministic=args.deterministic,
    )

    # sorted-logit profiles
    prof = analysis.sorted_logit_profile(v, args.profile_p)
    rows = [[r + 1] + [prof[k][j][r] for k in ("v", "v^p", "exp") for j in (0, 1)] for r in range(v.shape[1])]
    _write_csv(out / "sorted_logit_profile.csv",
               ["rank", "v_mean", "v_std", "vp_mean", "vp_std", "exp_mean", "exp_std"], rows, prec)
    ranks = np.arange(1, v.shape[1] + 1)
    svg.write_line_chart(out / "sorted_logit_profile.svg", [("logit", ranks, prof["v"][0])],
                         title="mean sorted logit", xlabel="rank", ylabel="logit",
                         deterministic=args.deterministic)

    # per-source statistics at pooled coverage
    sources = np.array([s or "untagged" for s in logit_set.sources], dtype=object)
    report = selective.shift_mix_report(scores.score_msp(scores.softmax(v)), correct, sources, args.coverage)
    _write_csv(out / "source_report.csv", ["source", "samples", "errors", "error_rate"],
               [[tag, st.count, st.errors, st.error_rate] for tag, st in report.items()], prec)

    trainer.write_manifest(out / "analyze.manifest", _manifest(args, {
        "step": args.step if args.step is not None else args.window / 5,
        "std": "population (ddof=0)",
        "window_defaults_note": "window step window/5 and min_count 10 are defaults chosen here",
    }))
    print(f"wrote analysis tables and plots to {out}")
    return EXIT_OK


def cmd_repro(args):
    _require(args, "out")
    if 0.0 not in args.alphas or any(a <= 0 for a in args.alphas if a != 0):
        raise UsageError("repro: --alphas must contain 0 and otherwise positive values")
    if not args.seeds:
        raise UsageError("repro: need at least one seed")
    base = experiments.ReproConfig(seeds=tuple(args.seeds), alphas=tuple(sorted(args.alphas)),
                                   shift_sigmas=args.shift_sigmas, train=_train_config(args))
    cfg = base.quick_version() if args.quick else base
    spec = _spec_from(args, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = experiments.run_all(cfg, spec=spec)
    prec = args.precision

    rows = []
    for r in results:
        for m in r.models:
            shift = m.shift_report.get("shift")
            rows.append([r.seed, m.alpha, m.error_rate, m.aurc_msp, m.aurc_norm, m.p_best,
                         shift.count if shift else 0, shift.errors if shift else 0])
    _write_csv(out / "metrics.csv",
               ["seed", "alpha", "error_rate", "aurc_msp", "aurc_norm", "p", "shift_accepted", "shift_errors"],
               rows, prec)
    first = results[0]
    svg.write_line_chart(
        out / f"rc_seed{first.seed}.svg",
        [("CE" if m.alpha == 0 else f"LS {m.alpha:g}", m.curve_msp.coverage, 100 * m.curve_msp.risk)
         for m in first.models],
        title=f"MSP risk-coverage, seed {first.seed}", xlabel="coverage", ylabel="selective risk (%)",
        deterministic=args.deterministic,
    )
    verdicts = experiments.verdicts(results, cfg)
    text = "\n".join(v.line() for v in verdicts) + "\n"
    (out / "verdict.txt").write_text(text, encoding="utf-8")
    trainer.write_manifest(out / "repro.manifest", _manifest(args, {
        "n_train": cfg.n_train, "n_val": cfg.n_val, "n_eval": cfg.n_eval, "n_shift": cfg.n_shift,
        "effective_epochs": cfg.train.epochs, "spec_hash": data.spec_hash(spec),
    }))
    sys.stdout.write(text)
    gating = [v for v in verdicts if not v.advisory]
    return EXIT_CRITERION if any(not v.passed for v in gating) else EXIT_OK


# --- entry point ------------------------------------------------------------


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, args)
        args = _resolve_defaults(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, OSError) as exc:
        print(f"screject: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        _subparser(parser, args.command).print_usage(sys.stderr)
        print(f"screject: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"screject: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"screject: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except (LogitFormatError, InvalidInputError, OSError) as exc:
        print(f"screject: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
