"""Randomised invariants of the kernels and the class models."""
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dynafit.core import _raw_test_distances, fit_class_model, train_distances, truncate_rank
from dynafit.core import test_distances as class_distances
from dynafit.kernels import Gaussian, LogisticMap, Polynomial, TruncatedLogistic, gram, self_kernel

CASES = settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])

KERNELS = {
    "poly": lambda: Polynomial(2),
    "gauss": lambda: Gaussian(1.5),
    "logistic": LogisticMap,
    "truncated": lambda: TruncatedLogistic(8),
}


@st.composite
def problem(draw, kind, max_p=12):
    """A training stack and a test stack for kernel ``kind``."""
    p = draw(st.integers(1, max_p))
    q = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    if kind in ("logistic", "truncated"):
        n, N = 1, draw(st.integers(1, 8))
        X = rng.uniform(0.0, 0.95, size=(p, n, N))
        Y = rng.uniform(0.0, 0.95, size=(q, n, N))
    else:
        n, N = draw(st.integers(1, 3)), draw(st.integers(1, 4))
        X = rng.normal(scale=0.7, size=(p, n, N))
        Y = rng.normal(scale=0.7, size=(q, n, N))
    return X, Y


@pytest.mark.parametrize("kind", sorted(KERNELS))
class TestKernelProperties:
    def test_gram_symmetric_psd(self, kind):
        @CASES
        @given(problem(kind, max_p=30))
        def check(data):
            X, _ = data
            K = gram(KERNELS[kind](), X)
            assert np.array_equal(K, K.T)
            lam = np.linalg.eigvalsh(K)
            assert lam.min() >= -1e-10 * max(lam.max(), 1.0)
            np.testing.assert_allclose(np.diag(K), self_kernel(KERNELS[kind](), X), rtol=1e-12)

        check()

    def test_distances_nonnegative(self, kind):
        @CASES
        @given(problem(kind, max_p=30))
        def check(data):
            X, Y = data
            # every positive eigenvalue kept: training prototypes are reproduced
            exact = fit_class_model(KERNELS[kind](), X, 0.0)
            assert np.all(train_distances(exact) >= 0)
            assert np.all(train_distances(exact) <= 1e-6 * exact.gram_trace)
            # raw test residuals stay inside the round-off band at the default cut
            m = fit_class_model(KERNELS[kind](), X)
            raw, kyy = _raw_test_distances(m, Y)
            assert np.all(raw >= -1e-9 * np.maximum(m.gram_trace, kyy))
            assert np.all(class_distances(m, Y) >= 0)

        check()

    def test_permutation_invariant(self, kind):
        @CASES
        @given(problem(kind), st.randoms(use_true_random=False))
        def check(data, rnd):
            X, Y = data
            perm = list(range(len(X)))
            rnd.shuffle(perm)
            a = class_distances(fit_class_model(KERNELS[kind](), X), Y)
            b = class_distances(fit_class_model(KERNELS[kind](), X[perm]), Y)
            scale = max(gram(KERNELS[kind](), X).trace(), self_kernel(KERNELS[kind](), Y).max())
            assert np.all(np.abs(a - b) <= 1e-10 * scale)

        check()

    def test_distance_grows_as_rank_drops(self, kind):
        @CASES
        @given(problem(kind))
        def check(data):
            X, Y = data
            m = fit_class_model(KERNELS[kind](), X)
            scale = max(m.gram_trace, self_kernel(m.kernel, Y).max())
            prev = class_distances(m, Y)
            for k in range(m.rank - 1, 0, -1):
                cur = class_distances(truncate_rank(m, k), Y)
                assert np.all(cur >= prev - 1e-9 * scale)
                prev = cur

        check()


class TestTruncation:
    @CASES
    @given(
        st.integers(1, 200),
        st.integers(1, 60),
        st.integers(0, 2**32 - 1),
    )
    def test_tail_bound(self, length, l, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.uniform(0.0, 0.95, size=(2, 1, length))
        full = gram(LogisticMap(), np.stack([x, y]))[0, 1]
        cut = gram(TruncatedLogistic(l), np.stack([x, y]))[0, 1]
        c = float(np.max(x * y))
        bound = length * c ** (l + 1) / (1 - c)
        assert 0 <= full - cut <= bound * (1 + 1e-9) + 1e-12 * full

    @CASES
    @given(st.integers(0, 2**32 - 1))
    def test_converges_in_l(self, seed):
        x, y = np.random.default_rng(seed).uniform(0.0, 0.95, size=(2, 1, 10))
        full = gram(LogisticMap(), np.stack([x, y]))[0, 1]
        gaps = [full - gram(TruncatedLogistic(l), np.stack([x, y]))[0, 1] for l in (1, 5, 20, 80)]
        assert all(a >= b - 1e-12 * full for a, b in zip(gaps, gaps[1:]))
