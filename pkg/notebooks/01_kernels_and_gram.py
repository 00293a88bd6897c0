"""
Trajectory kernels and their Gram matrices
==========================================

A trajectory is an ``(n, N)`` array: ``n`` state components over ``N`` time
steps. Kernels compare two trajectories through an inner product of lifted
features without ever building the lift.
"""
# %%
import numpy as np

from dynafit import Gaussian, LogisticMap, Polynomial, TruncatedLogistic, flatten, gram

# Vectorisation is time-major: all components at t=0, then t=1, ...
t = np.array([[1.0, 2.0, 3.0],
              [10.0, 20.0, 30.0]])
print("flattened:", flatten(t))

# %%
# Each kernel is a small frozen value object; calling it evaluates k(x, y).
x = np.array([[0.5, 0.25]])
for spec in (Polynomial(2), Gaussian(1.0), LogisticMap(), TruncatedLogistic(5)):
    print(f"{spec.to_dict()!s:40s} k(x, x) = {spec(x, x):.6f}")

# %%
# The logistic kernel sums x y / (1 - x y) over time; cutting the monomial
# lift at degree l leaves exactly the geometric tail, which shrinks like
# (max x y)**(l + 1).
rng = np.random.default_rng(0)
a, b = rng.uniform(0, 0.95, size=(2, 1, 50))
full = LogisticMap()(a, b)
for l in (5, 20, 50, 100, 200):
    print(f"l = {l:3d}   gap {full - TruncatedLogistic(l)(a, b):.3e}")

# %%
# Gram matrices are exactly symmetric and positive semi-definite.
X = rng.uniform(0, 0.9, size=(40, 1, 30))
K = gram(LogisticMap(), X)
lam = np.linalg.eigvalsh(K)[::-1]
print("symmetric:", np.array_equal(K, K.T))
print("largest / smallest eigenvalue: %.3e / %.3e" % (lam[0], lam[-1]))
print("eigenvalues above 1e-10 * max:", int(np.sum(lam > 1e-10 * lam[0])))
