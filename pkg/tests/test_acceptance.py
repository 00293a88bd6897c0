"""Acceptance checks, one per criterion.

Each check records a single ``PASS``/``FAIL``/``SKIP`` line, printed in the
pytest terminal summary (see ``conftest.py``) or directly when this file is
run as a script::

    python -m pytest tests/test_acceptance.py
    python tests/test_acceptance.py

Optional inputs:

* ``DYNAFIT_CHAR_MANIFEST`` -- manifest of the character-trajectory dataset
  (see README); without it the character check is skipped.
* ``DYNAFIT_FULL_SCALE=1`` -- additionally run chaos detection at 2000
  trajectories per class (slow; reported as an extra line).
"""
from __future__ import annotations

import os
import time

import numpy as np
import pytest

from dynafit.core import (
    DynafitClassifier,
    _raw_test_distances,
    fit_class_model,
    fit_threshold,
    train_distances,
    truncate_rank,
)
from dynafit.core import test_distances as class_distances
from dynafit.data import (
    CHAOTIC,
    REGULAR,
    LogisticGenConfig,
    gen_logistic,
    gen_logistic_balanced,
    load_dataset,
    split,
    truncate_prefix,
)
from dynafit.kernels import Gaussian, LogisticMap, Polynomial, TruncatedLogistic, gram, self_kernel
from dynafit.oracle import LogisticTruncated, PolynomialExplicit, explicit_map, explicit_map_set, oracle_basis
from dynafit.persistence import dumps, loads

LINES: list[str] = []


def record(criterion: int | str, ok: bool | None, detail: str) -> None:
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    LINES.append(f"[{status}] criterion {criterion}: {detail}")


# --- 1: kernel pipeline vs explicit feature space -----------------------------

ORACLE_INSTANCES = 200
ORACLE_TOL = 1e-8


def check_oracle_equivalence(seed: int = 2024) -> bool:
    """Polynomial-kernel distances against explicit-lift residuals.

    The error is taken relative to ``max(d, ||phi(Y)||**2)``: when the test
    lift lies in the training span the true residual is exactly zero and any
    pointwise ratio is round-off over zero.
    """
    rng = np.random.default_rng(seed)
    worst = worst_pointwise = 0.0
    t0 = time.perf_counter()
    for _ in range(ORACLE_INSTANCES):
        d, n, N = (int(v) for v in (rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 6)))
        p, q = int(rng.integers(1, 16)), int(rng.integers(1, 11))
        thr = (0.0, 1e-10, 1e-3)[rng.integers(3)]
        X, Y = rng.normal(size=(p, n, N)), rng.normal(size=(q, n, N))
        got = class_distances(fit_class_model(Polynomial(d), X, thr), Y)
        fm = PolynomialExplicit(d, n * N)
        U = oracle_basis(fm, X, thr)
        phi = explicit_map_set(fm, Y)
        r = phi - (phi @ U) @ U.T
        want = np.einsum("ij,ij->i", r, r)
        norm = np.einsum("ij,ij->i", phi, phi)
        err = np.abs(got - want)
        worst = max(worst, float(np.max(err / np.maximum(want, norm))))
        big = want > 1e-6 * norm
        if big.any():
            worst_pointwise = max(worst_pointwise, float(np.max(err[big] / want[big])))
    elapsed = time.perf_counter() - t0
    ok = worst <= ORACLE_TOL and elapsed < 10.0
    record(1, ok, f"{ORACLE_INSTANCES} instances, max rel err {worst:.2e} (tol {ORACLE_TOL:g}; "
                  f"pointwise where d > 1e-6|phi|^2: {worst_pointwise:.2e}), {elapsed:.2f} s (limit 10 s)")
    return ok


# --- 2: closed-form logistic kernel vs truncated series -----------------------

IDENTITY_PAIRS = 100
IDENTITY_LENGTH = 10
IDENTITY_TRUNCATION = 100


def check_logistic_identity(seed: int = 7) -> bool:
    """Closed form vs truncation at l = 100, and truncation vs explicit lift.

    The first comparison is required to 1e-10 absolute. The gap is exactly the
    series tail ``sum (xy)**(l+1) / (1 - xy)``, which exceeds 1e-10 whenever a
    single product ``x_k y_k`` is above about 0.785 -- roughly 1% of uniform
    draws on [0, 0.95]. The tail identity itself is checked and reported.
    """
    rng = np.random.default_rng(seed)
    l = IDENTITY_TRUNCATION
    closed, cut = LogisticMap(), TruncatedLogistic(l)
    fm = LogisticTruncated(l, IDENTITY_LENGTH)
    gaps, tail_err, explicit_err = [], 0.0, 0.0
    t0 = time.perf_counter()
    for _ in range(IDENTITY_PAIRS):
        x, y = rng.uniform(0.0, 0.95, size=(2, 1, IDENTITY_LENGTH))
        kc, kt = closed(x, y), cut(x, y)
        gaps.append(abs(kc - kt))
        xy = (x * y).ravel()
        tail = float(np.sum(xy ** (l + 1) / (1 - xy)))
        tail_err = max(tail_err, abs((kc - kt) - tail) / kc)
        ip = float(explicit_map(fm, x) @ explicit_map(fm, y))
        explicit_err = max(explicit_err, abs(kt - ip) / abs(ip))
    elapsed = time.perf_counter() - t0
    gaps = np.array(gaps)
    ok_closed = gaps.max() <= 1e-10
    ok_explicit = explicit_err <= 1e-12
    ok = ok_closed and ok_explicit and elapsed < 5.0
    record(2, ok, f"{IDENTITY_PAIRS} pairs (N = {IDENTITY_LENGTH}), |closed - trunc(l={l})| max {gaps.max():.2e} "
                  f"(tol 1e-10; {int(np.sum(gaps > 1e-10))} pairs over), gap equals series tail to {tail_err:.1e}; "
                  f"trunc vs explicit lift {explicit_err:.1e} (tol 1e-12); {elapsed:.2f} s")
    return ok


# --- 3: training trajectories are reproduced ----------------------------------

ZERO_RESIDUAL_SETS = 50


def _random_kernel_set(kind: str, rng):
    p = int(rng.integers(1, 31))
    if kind in ("logistic", "truncated-logistic"):
        X = rng.uniform(0.0, 0.95, size=(p, 1, int(rng.integers(1, 60))))
        spec = LogisticMap() if kind == "logistic" else TruncatedLogistic(int(rng.integers(1, 40)))
    else:
        X = rng.normal(size=(p, int(rng.integers(1, 4)), int(rng.integers(1, 20))))
        spec = Polynomial(int(rng.integers(1, 4))) if kind == "poly" else Gaussian(float(rng.uniform(0.5, 5.0)))
    return spec, X


def check_zero_training_residual(seed: int = 3) -> bool:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for kind in ("poly", "gauss", "logistic", "truncated-logistic"):
        for _ in range(ZERO_RESIDUAL_SETS):
            spec, X = _random_kernel_set(kind, rng)
            m = fit_class_model(spec, X, 0.0)
            worst = max(worst, float(np.max(train_distances(m)) / m.gram_trace))
    ok = worst <= 1e-6
    record(3, ok, f"4 kernels x {ZERO_RESIDUAL_SETS} sets (p <= 30, threshold 0), "
                  f"max train distance / tr(K) = {worst:.2e} (tol 1e-6)")
    return ok


# --- 4: chaos detection --------------------------------------------------------


def chaos_detection(per_class: int, N: int = 1000):
    train = gen_logistic_balanced(LogisticGenConfig(N=N, seed=1), per_class)
    test = gen_logistic_balanced(LogisticGenConfig(N=N, seed=2), per_class)
    X = np.stack([s.trajectory for s in train])
    t0 = time.perf_counter()
    clf = DynafitClassifier.fit(LogisticMap(), X, [s.label for s in train])
    t_train = time.perf_counter() - t0
    pred = np.array(clf.predict(np.stack([s.trajectory for s in test])))
    truth = np.array([s.label for s in test])
    per = {lab: float(np.mean(pred[truth == lab] == lab)) for lab in (REGULAR, CHAOTIC)}
    ranks = {lab: m.rank for lab, m in clf.classes}
    return float(np.mean(pred == truth)), t_train, per, ranks


def check_chaos_detection() -> bool:
    acc, t_train, per, ranks = chaos_detection(500)
    ok = acc >= 0.95 and t_train < 60.0
    record(4, ok, f"500+500 per class, N = 1000: accuracy {acc:.4f} (>= 0.95; regular {per[REGULAR]:.3f}, "
                  f"chaotic {per[CHAOTIC]:.3f}), training {t_train:.1f} s (< 60 s), ranks {ranks}")
    if os.environ.get("DYNAFIT_FULL_SCALE"):
        acc2, t2, _, _ = chaos_detection(2000)
        record("4 (2000/class, optional)", acc2 >= 0.985, f"accuracy {acc2:.4f} (>= 0.985), training {t2:.1f} s")
    return ok


# --- 5: character trajectories ------------------------------------------------

CHAR_PREFIXES = (10, 20, 50, 100)
CHAR_TRIALS = 10


def character_accuracy(X, y, prefix: int, trials: int = CHAR_TRIALS) -> tuple[float, float]:
    Xp = truncate_prefix(X, prefix)
    accs = []
    for seed in range(trials):
        (Xtr, ytr), (Xte, yte) = split(Xp, y, 0.1, seed)
        pred = DynafitClassifier.fit(Polynomial(2), Xtr, ytr).predict(Xte)
        accs.append(float(np.mean(np.array(pred) == np.array(yte))))
    return float(np.mean(accs)), float(np.std(accs, ddof=1))


def check_character_trajectories() -> bool | None:
    path = os.environ.get("DYNAFIT_CHAR_MANIFEST")
    if not path:
        record(5, None, "character-trajectory manifest not supplied (set DYNAFIT_CHAR_MANIFEST)")
        return None
    X, y = load_dataset(path)
    results = {n: character_accuracy(X, y, n) for n in CHAR_PREFIXES}
    mean100 = results[100][0]
    means = [results[n][0] for n in CHAR_PREFIXES]
    increasing = all(a < b for a, b in zip(means, means[1:]))
    ok = 0.92 <= mean100 <= 0.96 and increasing
    detail = ", ".join(f"N'={n}: {m:.3f}+-{s:.3f}" for n, (m, s) in results.items())
    record(5, ok, f"poly d=2, 10% train, {CHAR_TRIALS} trials: {detail} (N'=100 in [0.92, 0.96], strictly increasing)")
    return ok


# --- 6: randomised property suite ---------------------------------------------

PROPERTY_CASES = 100


def check_property_suite(seed: int = 11) -> bool:
    rng = np.random.default_rng(seed)
    kinds = ("poly", "gauss", "logistic", "truncated-logistic")
    counts = dict.fromkeys(("gram", "nonneg", "perm", "rank", "io", "gen"), 0)
    failures = []
    for i in range(PROPERTY_CASES):
        spec, X = _random_kernel_set(kinds[i % 4], rng)
        Y = (rng.uniform(0.0, 0.95, size=(3,) + X.shape[1:]) if spec.logistic_domain
             else rng.normal(size=(3,) + X.shape[1:]))

        K = gram(spec, X)
        lam = np.linalg.eigvalsh(K)
        if not (np.array_equal(K, K.T) and lam[0] >= -1e-8 * lam[-1]):
            failures.append(f"gram {i}")
        counts["gram"] += 1

        m = fit_class_model(spec, X)
        raw, kyy = _raw_test_distances(m, Y)
        d = class_distances(m, Y)
        if not (np.all(d >= 0) and np.all(raw >= -1e-9 * np.maximum(m.gram_trace, kyy))
                and np.all(train_distances(m) >= 0)):
            failures.append(f"nonneg {i}")
        counts["nonneg"] += 1

        perm = rng.permutation(len(X))
        d_perm = class_distances(fit_class_model(spec, X[perm]), Y)
        if not np.all(np.abs(d - d_perm) <= 1e-10 * np.maximum(m.gram_trace, kyy)):
            failures.append(f"perm {i}")
        counts["perm"] += 1

        prev = d
        for k in range(m.rank - 1, 0, -1):
            cur = class_distances(truncate_rank(m, k), Y)
            if np.any(cur < prev - 1e-9 * np.maximum(m.gram_trace, kyy)):
                failures.append(f"rank {i}")
                break
            prev = cur
        counts["rank"] += 1

        det = fit_threshold(m, Y)
        for obj in (DynafitClassifier([("a", m), ("b", truncate_rank(m, 1))]), det):
            blob = dumps(obj)
            if dumps(loads(blob)) != blob:
                failures.append(f"io {i}")
        counts["io"] += 1

        cfg = LogisticGenConfig(N=int(rng.integers(1, 50)), burn_in=100, lyapunov_iters=500,
                                seed=int(rng.integers(0, 2**63)))
        a, b = gen_logistic(cfg, 2), gen_logistic(cfg, 2)
        if not all(np.array_equal(s.trajectory, t.trajectory) and s.lyapunov == t.lyapunov for s, t in zip(a, b)):
            failures.append(f"gen {i}")
        counts["gen"] += 1
    ok = not failures
    record(6, ok, "cases " + ", ".join(f"{k} {v}" for k, v in counts.items())
           + (f"; failures {failures[:5]}" if failures else "; all properties hold"))
    return ok


# --- pytest entry points ------------------------------------------------------


class TestAcceptance:
    def test_oracle_equivalence(self):
        assert check_oracle_equivalence()

    def test_logistic_identity(self):
        assert check_logistic_identity()

    def test_zero_training_residual(self):
        assert check_zero_training_residual()

    def test_chaos_detection(self):
        assert check_chaos_detection()

    def test_character_trajectories(self):
        if check_character_trajectories() is None:
            pytest.skip("character-trajectory manifest not supplied")
        assert LINES[-1].startswith("[PASS]")

    def test_property_suite(self):
        assert check_property_suite()


if __name__ == "__main__":
    for check in (check_oracle_equivalence, check_logistic_identity, check_zero_training_residual,
                  check_chaos_detection, check_character_trajectories, check_property_suite):
        check()
    print("\n".join(LINES))
