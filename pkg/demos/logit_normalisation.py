"""Softmax ignores a uniform logit shift; the normalised max logit does not.

Adding eta to every logit leaves the softmax unchanged, and the
mean-centred score too.  Without centring the score rises with eta, so a
larger max logit at the same softmax output reads as more uncertain.
"""

import numpy as np

from screject.normalization import NormConfig, check_result1, score_maxlogit_norm
from screject.scores import score_msp, softmax

v = np.array([4.0, 2.0, 1.0, 0.5])
print(f"{'eta':>5} {'-MSP':>9} {'U p=2 none':>11} {'U p=2 mean':>11}")
for eta in (0.0, 1.0, 5.0, 20.0):
    w = v + eta
    print(f"{eta:5.1f} {score_msp(softmax(w)):9.5f} {score_maxlogit_norm(w, NormConfig(2, 'none')):11.5f} "
          f"{score_maxlogit_norm(w, NormConfig(2, 'mean')):11.5f}")
print("ratio strictly drops for eta=3, p=4:", check_result1(v, 3.0, 4.0))
