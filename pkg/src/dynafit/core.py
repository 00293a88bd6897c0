"""Learning and applying the distance between trajectories and a dynamics.

Each class of dynamics is summarised by the span of its training trajectories
in kernel feature space. Training diagonalises the Gram matrix
``K = V diag(sigma**2) V^T`` and keeps the metric ``H = V diag(sigma**-2) V^T``.
The distance of a trajectory ``Y`` to the class is the squared residual of its
lift off that span::

    d(Y) = k(Y, Y) - k_Y^T H k_Y,    k_Y = (k(Y, X_1), ..., k(Y, X_p))

which is zero for every training trajectory when no eigenpair is discarded.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .exceptions import DegenerateKernelError, DynafitError, NotPSDError, NumericalError, ShapeMismatchError
from .kernels import KernelSpec, as_trajectory_set, cross_gram, gram, self_kernel

__all__ = [
    "DEFAULT_EIGEN_THRESHOLD",
    "DEFAULT_QUANTILE",
    "CLAMP_BAND",
    "ClassModel",
    "DynafitClassifier",
    "OneClassDetector",
    "fit_class_model",
    "truncate_rank",
    "train_distances",
    "test_distances",
    "classify",
    "fit_threshold",
    "detect",
]

DEFAULT_EIGEN_THRESHOLD = 1e-10
DEFAULT_QUANTILE = 0.99
# Negative distances within CLAMP_BAND * scale are round-off and snap to zero.
CLAMP_BAND = 1e-9
# Gram eigenvalues below -PSD_TOL * lambda_max mean the kernel is not PSD.
PSD_TOL = 1e-8
THRESHOLD_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ClassModel:
    """Learned metric for one class of dynamics.

    Attributes
    ----------
    kernel : KernelSpec
    train_set : ndarray, shape (p, n, N)
        Training trajectories (the prototypes).
    V : ndarray, shape (p, k)
        Retained Gram eigenvectors, by decreasing eigenvalue.
    sigma : ndarray, shape (k,)
        Singular values of the lifted training matrix (square roots of the
        retained Gram eigenvalues), decreasing.
    H : ndarray, shape (p, p)
        ``V diag(sigma**-2) V^T``.
    eigen_threshold_rel : float
        Relative eigenvalue cut used at fit time.
    """

    kernel: KernelSpec
    train_set: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    H: np.ndarray
    eigen_threshold_rel: float = DEFAULT_EIGEN_THRESHOLD

    @property
    def rank(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def p(self) -> int:
        return int(self.train_set.shape[0])

    @property
    def trajectory_shape(self) -> tuple[int, int]:
        return tuple(self.train_set.shape[1:])

    @functools.cached_property
    def gram(self) -> np.ndarray:
        return gram(self.kernel, self.train_set)

    @functools.cached_property
    def gram_trace(self) -> float:
        return float(np.trace(self.gram))

    @functools.cached_property
    def _whitener(self) -> np.ndarray:
        # H = W W^T; quadratic forms through W are sums of squares.
        return self.V / self.sigma


def _metric(V: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    W = V / sigma
    H = W @ W.T
    return np.triu(H) + np.triu(H, 1).T


def _canonical_order(stack: np.ndarray) -> np.ndarray:
    """Lexicographic order of the flattened trajectories (stable on ties)."""
    F = stack.reshape(stack.shape[0], -1)
    return np.lexsort(F.T[::-1])


def fit_class_model(
    spec: KernelSpec,
    train_set,
    eigen_threshold_rel: float = DEFAULT_EIGEN_THRESHOLD,
) -> ClassModel:
    """Fit the metric of one class from its training trajectories.

    Eigenpairs with ``lambda <= eigen_threshold_rel * lambda_max`` are
    discarded, as are all non-positive eigenvalues; the largest is always kept.

    Raises
    ------
    NotPSDError
        An eigenvalue is below ``-1e-8 * lambda_max``.
    DegenerateKernelError
        No eigenvalue is positive (e.g. all-zero logistic trajectories).
    """
    if not 0.0 <= eigen_threshold_rel < 1.0:
        raise ValueError(f"eigen_threshold_rel must lie in [0, 1), got {eigen_threshold_rel!r}")
    stack = as_trajectory_set(train_set)
    # Decompose in a canonical prototype order so that the retained subspace,
    # which is ill-determined near the cut, cannot depend on input order.
    order = _canonical_order(stack)
    Kc = gram(spec, stack[order])
    lam, vec_c = linalg.eigh(Kc)
    lam, vec_c = lam[::-1], vec_c[:, ::-1]
    vec = np.empty_like(vec_c)
    vec[order] = vec_c
    K = np.empty_like(Kc)
    K[np.ix_(order, order)] = Kc
    lam_max = lam[0]
    if not lam_max > 0:
        raise DegenerateKernelError(f"Gram matrix has no positive eigenvalue (max {lam_max!r})")
    if lam[-1] < -PSD_TOL * lam_max:
        raise NotPSDError(
            f"Gram eigenvalue {lam[-1]!r} below -{PSD_TOL} * lambda_max = {-PSD_TOL * lam_max!r}"
        )
    keep = (lam > eigen_threshold_rel * lam_max) & (lam > 0)
    V = np.ascontiguousarray(vec[:, keep])
    sigma = np.sqrt(lam[keep])
    model = ClassModel(spec, stack, V, sigma, _metric(V, sigma), float(eigen_threshold_rel))
    model.__dict__["gram"] = K
    return model


def truncate_rank(m: ClassModel, k: int) -> ClassModel:
    """Copy of ``m`` keeping only its ``k`` leading eigenpairs."""
    if not 1 <= k <= m.rank:
        raise ValueError(f"rank must lie in [1, {m.rank}], got {k}")
    V, sigma = m.V[:, :k].copy(), m.sigma[:k].copy()
    out = ClassModel(m.kernel, m.train_set, V, sigma, _metric(V, sigma), m.eigen_threshold_rel)
    if "gram" in m.__dict__:
        out.__dict__["gram"] = m.__dict__["gram"]
    return out


def _clamp(d: np.ndarray, scale: np.ndarray | float) -> np.ndarray:
    band = CLAMP_BAND * np.asarray(scale, dtype=float)
    if np.any(d < -band):
        worst = int(np.argmin(d + band))
        raise NumericalError(f"distance {d[worst]!r} at index {worst} is below the round-off band")
    return np.where(d < 0, 0.0, d)


def _raw_test_distances(m: ClassModel, test_set) -> tuple[np.ndarray, np.ndarray]:
    stack = as_trajectory_set(test_set)
    if stack.shape[1:] != m.train_set.shape[1:]:
        raise ShapeMismatchError(f"test shape {stack.shape[1:]} differs from model shape {m.train_set.shape[1:]}")
    Kx = cross_gram(m.kernel, stack, m.train_set)
    kyy = self_kernel(m.kernel, stack)
    proj = Kx @ m._whitener
    return kyy - np.einsum("ij,ij->i", proj, proj), kyy


def train_distances(m: ClassModel) -> np.ndarray:
    """Residual distance of each training trajectory to its own class.

    ``diag(K - K H K)``; all zero up to round-off unless eigenpairs were
    discarded, in which case they sum to the discarded eigenvalues.
    """
    K = m.gram
    proj = K @ m._whitener
    d = np.diag(K) - np.einsum("ij,ij->i", proj, proj)
    return _clamp(d, m.gram_trace)


def test_distances(m: ClassModel, test_set) -> np.ndarray:
    """Distance of each test trajectory to the dynamics learned in ``m``.

    ``diag(K_test - K_{test,train} H K_{test,train}^T)``; only the diagonal of
    ``K_test`` is evaluated.
    """
    d, kyy = _raw_test_distances(m, test_set)
    return _clamp(d, np.maximum(m.gram_trace, kyy))


class DynafitClassifier:
    """One metric per class; a trajectory goes to the class it is closest to.

    Parameters
    ----------
    classes : sequence of (label, ClassModel)
        Ordered; ties in distance go to the earliest class.
    """

    def __init__(self, classes: Sequence[tuple[str, ClassModel]]):
        classes = [(str(label), model) for label, model in classes]
        labels = [label for label, _ in classes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate class labels in {labels}")
        shapes = {model.trajectory_shape for _, model in classes}
        if len(shapes) > 1:
            raise ShapeMismatchError(f"class models disagree on trajectory shape: {sorted(shapes)}")
        self.classes = classes

    @classmethod
    def fit(
        cls,
        spec: KernelSpec,
        trajectories,
        labels: Sequence[str],
        eigen_threshold_rel: float = DEFAULT_EIGEN_THRESHOLD,
        executor=None,
    ) -> "DynafitClassifier":
        """Fit one class model per distinct label, in order of first appearance.

        ``executor`` (a ``concurrent.futures.Executor``) fits classes in parallel.
        """
        stack = as_trajectory_set(trajectories)
        labels = [str(label) for label in labels]
        if len(labels) != stack.shape[0]:
            raise ValueError(f"{len(labels)} labels for {stack.shape[0]} trajectories")
        order = list(dict.fromkeys(labels))
        groups = [stack[[i for i, lab in enumerate(labels) if lab == label]] for label in order]

        def fit_one(item):
            label, group = item
            try:
                return fit_class_model(spec, group, eigen_threshold_rel)
            except DynafitError as exc:
                raise type(exc)(f"class {label!r}: {exc}") from exc

        mapper = executor.map if executor is not None else map
        models = list(mapper(fit_one, zip(order, groups)))
        return cls(list(zip(order, models)))

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.classes]

    def __len__(self) -> int:
        return len(self.classes)

    def distances(self, test_set) -> np.ndarray:
        """``(q, n_classes)`` array of distances to each class."""
        stack = as_trajectory_set(test_set)
        return np.column_stack([test_distances(m, stack) for _, m in self.classes])

    def predict(self, test_set) -> list[str]:
        return [label for label, _ in classify(self, test_set)]


def classify(c: DynafitClassifier, test_set) -> list[tuple[str, np.ndarray]]:
    """Label each test trajectory with its closest class.

    Returns one ``(label, distances)`` pair per trajectory, ``distances`` in
    class order.
    """
    if len(c) < 2:
        raise ValueError("classification needs at least two classes")
    D = c.distances(test_set)
    labels = c.labels
    return [(labels[int(np.argmin(row))], row) for row in D]


@dataclass(frozen=True, eq=False)
class OneClassDetector:
    """Flags trajectories whose distance to ``model`` exceeds ``threshold``."""

    model: ClassModel
    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold!r}")


def fit_threshold(m: ClassModel, calibration, quantile: float = DEFAULT_QUANTILE) -> OneClassDetector:
    """Set the detection threshold at a quantile of calibration distances.

    Linear interpolation between order statistics; floored at
    ``1e-12 * tr(K_train)`` so a perfect fit still yields a positive threshold.
    """
    if not 0.0 < quantile <= 1.0:
        raise ValueError(f"quantile must lie in (0, 1], got {quantile!r}")
    d = test_distances(m, calibration)
    tau = _threshold_from_distances(d, quantile, m.gram_trace)
    return OneClassDetector(m, tau)


def _threshold_from_distances(d: np.ndarray, quantile: float, gram_trace: float) -> float:
    if len(d) == 0:
        raise ValueError("calibration set is empty")
    tau = float(np.quantile(d, quantile, method="linear"))
    return max(tau, THRESHOLD_FLOOR * gram_trace)


def detect(det: OneClassDetector, test_set) -> list[tuple[str, float]]:
    """``("anomalous", d)`` where ``d > threshold``, else ``("normal", d)``."""
    d = test_distances(det.model, test_set)
    return [("anomalous" if x > det.threshold else "normal", float(x)) for x in d]
