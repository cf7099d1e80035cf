"""How label smoothing pushes on the max logit.

For a confident-but-uncertain prediction, the LS gradient differs from the
CE gradient by alpha * t - alpha / K.  Averaged over the label, the push on
the max logit shrinks as the true error probability grows, so harder
samples get their max logit suppressed less.
"""

import numpy as np

from screject.losses import SmoothingConfig, grad_suppression_onehot, suppression_at_max

K = 10
for alpha in (0.1, 0.2, 0.3):
    cfg = SmoothingConfig(alpha, K)
    p_err = np.linspace(0, 1, 6)
    row = " ".join(f"{s:+.3f}" for s in suppression_at_max(p_err, cfg))
    print(f"alpha={alpha:.1f}  suppression at P_error 0,.2,...,1: {row}")
    print(f"           sampled label: correct {grad_suppression_onehot(True, cfg):+.3f}, "
          f"incorrect {grad_suppression_onehot(False, cfg):+.3f}")
