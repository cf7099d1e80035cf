"""Train CE and LS models on one seed and compare their MSP risk-coverage curves.

Usage: python demos/rc_curves.py [circle|random] [out.svg]
"""

import sys
from dataclasses import replace

from screject import data, experiments, normalization, scores, selective, svg, trainer

geometry = sys.argv[1] if len(sys.argv) > 1 else "random"
out = sys.argv[2] if len(sys.argv) > 2 else "rc_demo.svg"

spec = experiments.default_repro_spec(0, geometry)
train_set = data.sample_dataset(spec, 20_000, stream=0)
val = data.sample_dataset(spec, 5_000, stream=1)
ev = data.sample_dataset(spec, 5_000, stream=2)
bayes, se = data.bayes_risk_mc(spec, n=200_000)
print(f"{geometry}: Bayes error {bayes:.4f} +- {se:.4f}")

series = []
for alpha in (0.0, 0.1, 0.2, 0.3):
    model = trainer.train(spec, len(train_set), replace(experiments.default_train_config(geometry), alpha=alpha),
                          dataset=train_set)
    v = trainer.forward(model, ev.x)
    correct = v.argmax(axis=1) == ev.y
    curve = selective.rc_curve(scores.score_msp(scores.softmax(v)), correct)
    p, _, _ = normalization.search_p(trainer.forward(model, val.x), val.y)
    norm = selective.rc_curve(normalization.score_maxlogit_norm(v, normalization.NormConfig(p=p)), correct)
    target = 0.5 * (1 - correct.mean())
    print(f"alpha={alpha:.1f} error={1 - correct.mean():.4f} AURC msp={selective.aurc(curve):.5f} "
          f"norm(p={p:g})={selective.aurc(norm):.5f} coverage@risk={target:.3f}: "
          f"{selective.coverage_at_risk(curve, target):.4f}")
    series.append(("CE" if alpha == 0 else f"LS {alpha:g}", curve.coverage, 100 * curve.risk))

svg.write_line_chart(out, series, title=f"MSP risk-coverage ({geometry})", xlabel="coverage",
                     ylabel="selective risk (%)")
print(f"wrote {out}")
