"""Explicit feature-space reference for the kernel pipeline.

Builds the lifted trajectory vectors that the kernels only touch through inner
products, and measures distances by orthogonal projection onto the span of the
lifted training set. Meant for small instances in tests; nothing here is used
by the kernel-trick code path.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateKernelError, FeatureDimensionError, ShapeMismatchError
from .kernels import as_trajectory, as_trajectory_set, flatten_set

__all__ = [
    "MAX_FEATURES",
    "ExplicitFeatureMap",
    "PolynomialExplicit",
    "LogisticTruncated",
    "explicit_map",
    "explicit_map_set",
    "oracle_basis",
    "oracle_distance",
    "residual_sq",
]

MAX_FEATURES = 10**6


@dataclass(frozen=True)
class ExplicitFeatureMap:
    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def _map(self, F: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, stack: np.ndarray) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class PolynomialExplicit(ExplicitFeatureMap):
    """Monomials of total degree <= ``degree`` in ``input_length`` variables.

    Each monomial carries the square root of its multinomial coefficient, so
    that mapped inner products equal ``(1 + x.y)**degree`` exactly.
    """

    degree: int
    input_length: int

    @property
    def dimension(self) -> int:
        return math.comb(self.input_length + self.degree, self.degree)

    def _terms(self):
        # Variable 0 is the constant 1; a multiset of size `degree` over
        # {0..D} is one monomial of degree <= `degree` in the real variables.
        idx = np.array(
            list(itertools.combinations_with_replacement(range(self.input_length + 1), self.degree)),
            dtype=np.intp,
        ).reshape(-1, self.degree)
        coef = np.empty(len(idx))
        for j, row in enumerate(idx):
            _, counts = np.unique(row, return_counts=True)
            c = math.factorial(self.degree)
            for k in counts:
                c //= math.factorial(int(k))
            coef[j] = c
        return idx, np.sqrt(coef)

    def _map(self, F):
        idx, w = self._terms()
        aug = np.hstack([np.ones((F.shape[0], 1)), F])
        return aug[:, idx].prod(axis=-1) * w

    def _check(self, stack):
        D = stack.shape[1] * stack.shape[2]
        if D != self.input_length:
            raise ShapeMismatchError(f"trajectory flattens to length {D}, map expects {self.input_length}")


@dataclass(frozen=True)
class LogisticTruncated(ExplicitFeatureMap):
    """Powers ``x_k, x_k**2, ..., x_k**truncation`` of each sample, stacked in time."""

    truncation: int
    length: int

    @property
    def dimension(self) -> int:
        return self.length * self.truncation

    def _map(self, F):
        powers = F[:, :, np.newaxis] ** np.arange(1, self.truncation + 1)
        return powers.reshape(F.shape[0], -1)

    def _check(self, stack):
        if stack.shape[1] != 1 or stack.shape[2] != self.length:
            raise ShapeMismatchError(f"expected (1, {self.length}) trajectories, got {stack.shape[1:]}")


def _guard(fm: ExplicitFeatureMap) -> None:
    if fm.dimension > MAX_FEATURES:
        raise FeatureDimensionError(f"explicit feature dimension {fm.dimension} exceeds {MAX_FEATURES}")


def explicit_map_set(fm: ExplicitFeatureMap, trajectories) -> np.ndarray:
    """Lift every trajectory; returns ``(p, dimension)``."""
    _guard(fm)
    stack = as_trajectory_set(trajectories)
    fm._check(stack)
    return fm._map(flatten_set(stack))


def explicit_map(fm: ExplicitFeatureMap, t) -> np.ndarray:
    """Lifted vector of one trajectory."""
    return explicit_map_set(fm, as_trajectory(t)[np.newaxis])[0]


def oracle_basis(fm: ExplicitFeatureMap, train_set, eigen_threshold_rel: float) -> np.ndarray:
    """Orthonormal basis of the retained span of the lifted training set.

    Left singular vectors whose squared singular value exceeds
    ``eigen_threshold_rel`` times the largest one.
    """
    Phi = explicit_map_set(fm, train_set).T
    U, s, _ = np.linalg.svd(Phi, full_matrices=False)
    if not s.size or s[0] == 0:
        raise DegenerateKernelError("lifted training matrix is zero")
    s2 = s * s
    keep = (s2 > eigen_threshold_rel * s2[0]) & (s > 0)
    return U[:, keep]


def residual_sq(U: np.ndarray, phi: np.ndarray) -> float:
    """``||phi - U U^T phi||**2``."""
    r = phi - U @ (U.T @ phi)
    return float(r @ r)


def oracle_distance(fm: ExplicitFeatureMap, train_set, test, eigen_threshold_rel: float) -> float:
    """Squared distance of the lifted ``test`` to the span of the lifted training set."""
    U = oracle_basis(fm, train_set, eigen_threshold_rel)
    return residual_sq(U, explicit_map(fm, test))
