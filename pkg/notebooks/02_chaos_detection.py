"""
Telling chaotic from regular logistic-map orbits
================================================

Orbits of x -> r x (1 - x) are labelled by the sign of their Lyapunov
exponent. One metric is learned per label; a new orbit is assigned to the
label whose training span it is closest to in kernel feature space. The
logistic kernel never sees r.
"""
# %%
import sys
import time

import numpy as np

from dynafit import DynafitClassifier, LogisticMap
from dynafit.data import CHAOTIC, REGULAR, LogisticGenConfig, gen_logistic_balanced

PER_CLASS = int(sys.argv[1]) if len(sys.argv) > 1 else 200
N = 500

# %%
# Balanced draws: r uniform on [3.5, 4], x0 on [0.1, 0.9]; orbits with
# |lambda| <= 0.01 are redrawn because their label is ambiguous.
t0 = time.perf_counter()
train = gen_logistic_balanced(LogisticGenConfig(N=N, seed=1), PER_CLASS)
test = gen_logistic_balanced(LogisticGenConfig(N=N, seed=2), PER_CLASS)
print(f"generated {len(train)} + {len(test)} orbits in {time.perf_counter() - t0:.1f} s")

lam = np.array([s.lyapunov for s in train])
print("lyapunov exponents: min %.3f  max %.3f" % (lam.min(), lam.max()))

# %%
X = np.stack([s.trajectory for s in train])
t0 = time.perf_counter()
clf = DynafitClassifier.fit(LogisticMap(), X, [s.label for s in train])
print(f"fit in {time.perf_counter() - t0:.1f} s; retained ranks:",
      {label: m.rank for label, m in clf.classes})

# %%
Y = np.stack([s.trajectory for s in test])
truth = np.array([s.label for s in test])
D = clf.distances(Y)
pred = np.array(clf.labels)[np.argmin(D, axis=1)]
print(f"accuracy {np.mean(pred == truth):.3f}")
for label in (REGULAR, CHAOTIC):
    sel = truth == label
    print(f"  {label:8s} recall {np.mean(pred[sel] == label):.3f}  ",
          "mean distances", {c: round(float(v), 3) for c, v in zip(clf.labels, D[sel].mean(axis=0))})

# %%
# Errors concentrate near the edge of chaos, where |lambda| is small.
wrong = pred != truth
lam_test = np.array([s.lyapunov for s in test])
if wrong.any():
    print("median |lambda| of errors %.3f vs all %.3f" % (np.median(np.abs(lam_test[wrong])),
                                                         np.median(np.abs(lam_test))))
