"""
Checking the kernel route against explicit features
===================================================

For small polynomial problems the lift can be built outright. Projecting the
lifted test trajectory off the span of the lifted training set must give the
same residual as the kernel formula, which never forms the lift.
"""
# %%
import numpy as np

from dynafit import Polynomial, fit_class_model, test_distances
from dynafit.oracle import PolynomialExplicit, explicit_map, oracle_distance

rng = np.random.default_rng(5)
d, n, N, p = 3, 2, 3, 12
X = rng.normal(size=(p, n, N))
Y = rng.normal(size=(6, n, N))

fm = PolynomialExplicit(d, n * N)
print(f"lift dimension {fm.dimension} for degree {d} on {n * N} inputs")

# %%
model = fit_class_model(Polynomial(d), X)
kernel_route = test_distances(model, Y)
explicit_route = np.array([oracle_distance(fm, X, y, model.eigen_threshold_rel) for y in Y])
norms = np.array([explicit_map(fm, y) @ explicit_map(fm, y) for y in Y])

for k, e, s in zip(kernel_route, explicit_route, norms):
    print(f"kernel {k:14.6f}   explicit {e:14.6f}   |diff| / |phi|^2 {abs(k - e) / s:.1e}")

# %%
# A training trajectory lies in its own span: distance zero.
print("distance of a prototype:", test_distances(model, X[:1])[0])
