"""Trajectory kernels and Gram matrices.

A trajectory is an ``(n, N)`` array: ``n`` state components sampled at ``N``
time steps. Kernels compare two trajectories of identical shape through an
inner product in a lifted feature space, so the lift itself is never built.

Trajectories are vectorised time-major: all components at time 0, then all
components at time 1, and so on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import KernelDomainError, NumericalError, ShapeMismatchError

__all__ = [
    "LOGISTIC_UPPER",
    "KernelSpec",
    "Polynomial",
    "Gaussian",
    "LogisticMap",
    "TruncatedLogistic",
    "as_trajectory",
    "as_trajectory_set",
    "flatten",
    "flatten_set",
    "eval_kernel",
    "gram",
    "cross_gram",
    "self_kernel",
    "kernel_from_dict",
]

# Logistic-kernel inputs must stay strictly below this value.
LOGISTIC_UPPER = 1.0 - 1e-12

# Elementwise kernels materialise (rows, cols, features) blocks; cap the size.
_BLOCK_ELEMENTS = 2**22


def as_trajectory(t) -> np.ndarray:
    """Return ``t`` as a validated float64 ``(n, N)`` array.

    A 1-D input is read as a scalar trajectory (``n = 1``).
    """
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatchError(f"trajectory must be a non-empty (n, N) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError("trajectory contains non-finite entries")
    return arr


def as_trajectory_set(ts) -> np.ndarray:
    """Stack trajectories into a ``(p, n, N)`` array, checking shapes agree."""
    if isinstance(ts, np.ndarray) and ts.ndim == 3:
        stack = np.asarray(ts, dtype=np.float64)
        if 0 in stack.shape:
            raise ShapeMismatchError(f"empty trajectory set of shape {stack.shape}")
        if not np.all(np.isfinite(stack)):
            raise NumericalError("trajectory set contains non-finite entries")
        return stack
    items = [as_trajectory(t) for t in ts]
    if not items:
        raise ShapeMismatchError("trajectory set is empty")
    shape = items[0].shape
    for i, t in enumerate(items):
        if t.shape != shape:
            raise ShapeMismatchError(f"trajectory {i} has shape {t.shape}, expected {shape}")
    return np.stack(items)


def flatten(t) -> np.ndarray:
    """Time-major vectorisation ``(x_0, x_1, ..., x_{N-1})`` of one trajectory."""
    return np.ravel(as_trajectory(t), order="F")


def flatten_set(stack: np.ndarray) -> np.ndarray:
    """Flatten a ``(p, n, N)`` stack into ``(p, n*N)`` rows, time-major."""
    p = stack.shape[0]
    return np.ascontiguousarray(stack.transpose(0, 2, 1)).reshape(p, -1)


class KernelSpec:
    """Base class for trajectory kernels.

    Subclasses implement ``_pairwise`` (block of kernel values between two sets
    of flattened trajectories), ``_diag`` (self-similarities) and ``_pair``
    (one exact, argument-symmetric evaluation).
    """

    name: ClassVar[str] = ""
    logistic_domain: ClassVar[bool] = False

    def _pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _diag(self, A: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _pair(self, a: np.ndarray, b: np.ndarray) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.name, **self.params()}

    def check(self, stack: np.ndarray) -> None:
        """Raise if a ``(p, n, N)`` stack violates this kernel's domain."""
        if not self.logistic_domain:
            return
        if stack.shape[1] != 1:
            raise KernelDomainError(f"{self.name} kernel needs scalar trajectories (n = 1), got n = {stack.shape[1]}")
        lo, hi = stack.min(), stack.max()
        if lo < 0.0 or hi >= LOGISTIC_UPPER:
            raise KernelDomainError(
                f"{self.name} kernel needs entries in [0, 1); got range [{lo!r}, {hi!r}]"
            )

    def __call__(self, x, y) -> float:
        return eval_kernel(self, x, y)


@dataclass(frozen=True)
class Polynomial(KernelSpec):
    """``k(X, Y) = (1 + <X, Y>)**degree`` on flattened trajectories."""

    degree: int = 2
    name: ClassVar[str] = "poly"

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"polynomial degree must be a positive integer, got {self.degree!r}")
        object.__setattr__(self, "degree", int(self.degree))

    def params(self) -> dict:
        return {"degree": self.degree}

    def _pairwise(self, A, B):
        return (1.0 + A @ B.T) ** self.degree

    def _diag(self, A):
        return (1.0 + np.einsum("ij,ij->i", A, A)) ** self.degree

    def _pair(self, a, b):
        return float((1.0 + np.sum(a * b)) ** self.degree)


@dataclass(frozen=True)
class Gaussian(KernelSpec):
    """``k(X, Y) = exp(-||X - Y||**2 / sigma**2)`` on flattened trajectories."""

    sigma: float = 1.0
    name: ClassVar[str] = "gauss"

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"gaussian width must be positive, got {self.sigma!r}")
        object.__setattr__(self, "sigma", float(self.sigma))

    def params(self) -> dict:
        return {"sigma": self.sigma}

    def _pairwise(self, A, B):
        # cdist differences rows directly, so identical rows give exactly 0.
        return np.exp(-cdist(A, B, "sqeuclidean") / self.sigma**2)

    def _diag(self, A):
        return np.ones(A.shape[0])

    def _pair(self, a, b):
        d = a - b
        return float(np.exp(-np.sum(d * d) / self.sigma**2))


class _Elementwise(KernelSpec):
    """Kernels of the form ``sum_k g(x_k * y_k)``."""

    logistic_domain: ClassVar[bool] = True

    def _g(self, prod: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _pairwise(self, A, B):
        q, D = A.shape
        out = np.empty((q, B.shape[0]))
        rows = max(1, _BLOCK_ELEMENTS // max(1, B.shape[0] * D))
        for i0 in range(0, q, rows):
            prod = A[i0:i0 + rows, np.newaxis, :] * B[np.newaxis, :, :]
            out[i0:i0 + rows] = self._g(prod).sum(axis=-1)
        return out

    def _diag(self, A):
        return self._g(A * A).sum(axis=-1)

    def _pair(self, a, b):
        return float(np.sum(self._g(a * b)))


@dataclass(frozen=True)
class LogisticMap(_Elementwise):
    """Closed-form logistic-map kernel ``sum_k x_k y_k / (1 - x_k y_k)``.

    Inner product of the infinite monomial lift ``(x, x**2, x**3, ...)`` of
    each sample, summed over time. Contains no bifurcation parameter.
    """

    name: ClassVar[str] = "logistic"

    def _g(self, prod):
        return prod / (1.0 - prod)


@dataclass(frozen=True)
class TruncatedLogistic(_Elementwise):
    """Logistic-map kernel with the monomial lift cut at degree ``truncation``.

    ``sum_k x_k y_k (1 - (x_k y_k)**l) / (1 - x_k y_k)``.
    """

    truncation: int = 10
    name: ClassVar[str] = "truncated-logistic"

    def __post_init__(self):
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ValueError(f"truncation must be a positive integer, got {self.truncation!r}")
        object.__setattr__(self, "truncation", int(self.truncation))

    def params(self) -> dict:
        return {"truncation": self.truncation}

    def _g(self, prod):
        return prod * (1.0 - prod**self.truncation) / (1.0 - prod)


_KINDS = {cls.name: cls for cls in (Polynomial, Gaussian, LogisticMap, TruncatedLogistic)}


def kernel_from_dict(d: dict) -> KernelSpec:
    """Inverse of ``KernelSpec.to_dict``."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}; valid kinds: {sorted(_KINDS)}")
    return _KINDS[kind](**d)


def _finite(K: np.ndarray, spec: KernelSpec) -> np.ndarray:
    if not np.all(np.isfinite(K)):
        raise NumericalError(f"{spec.name} kernel produced non-finite values")
    return K


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Kernel value ``k(x, y)`` between two trajectories of identical shape."""
    x, y = as_trajectory(x), as_trajectory(y)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"trajectory shapes differ: {x.shape} vs {y.shape}")
    spec.check(x[np.newaxis])
    spec.check(y[np.newaxis])
    with np.errstate(over="ignore", invalid="ignore"):
        val = spec._pair(np.ravel(x, order="F"), np.ravel(y, order="F"))
    if not np.isfinite(val):
        raise NumericalError(f"{spec.name} kernel produced a non-finite value")
    return val


def _prepare(spec: KernelSpec, ts) -> np.ndarray:
    stack = as_trajectory_set(ts)
    spec.check(stack)
    return stack


def gram(spec: KernelSpec, trajectories: Sequence | np.ndarray) -> np.ndarray:
    """Symmetric ``p x p`` Gram matrix of a trajectory set.

    Only the upper triangle is evaluated; the lower triangle is its mirror, so
    the result is exactly symmetric.
    """
    F = flatten_set(_prepare(spec, trajectories))
    p = F.shape[0]
    K = np.zeros((p, p))
    rows = max(1, min(p, 256))
    for i0 in range(0, p, rows):
        i1 = min(p, i0 + rows)
        with np.errstate(over="ignore", invalid="ignore"):
            K[i0:i1, i0:] = spec._pairwise(F[i0:i1], F[i0:])
    K = np.triu(K) + np.triu(K, 1).T
    return _finite(K, spec)


def cross_gram(spec: KernelSpec, test, train) -> np.ndarray:
    """``q x p`` matrix of kernel values between test and train trajectories."""
    A = _prepare(spec, test)
    B = _prepare(spec, train)
    if A.shape[1:] != B.shape[1:]:
        raise ShapeMismatchError(f"test shape {A.shape[1:]} differs from train shape {B.shape[1:]}")
    with np.errstate(over="ignore", invalid="ignore"):
        K = spec._pairwise(flatten_set(A), flatten_set(B))
    return _finite(K, spec)


def self_kernel(spec: KernelSpec, trajectories) -> np.ndarray:
    """Vector of ``k(X, X)`` for each trajectory (the diagonal of its Gram)."""
    F = flatten_set(_prepare(spec, trajectories))
    with np.errstate(over="ignore", invalid="ignore"):
        d = spec._diag(F)
    return _finite(d, spec)
