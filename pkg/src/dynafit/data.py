"""Datasets: logistic-map generation, CSV/manifest ingestion, splitting.

Logistic trajectories are labelled by the sign of their Lyapunov exponent
``lambda = mean_k ln|r (1 - 2 x_k)|``. Every sample ``i`` is drawn from its own
random stream ``SeedSequence([seed, i, attempt])``, so any subset of samples
can be regenerated independently and batched or parallel runs agree bit-exactly
with serial ones.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DatasetError, GeneratorError, ShapeMismatchError
from .kernels import LOGISTIC_UPPER, as_trajectory, as_trajectory_set

__all__ = [
    "REGULAR",
    "CHAOTIC",
    "LogisticGenConfig",
    "LogisticSample",
    "logistic_orbit",
    "lyapunov_exponent",
    "gen_logistic",
    "gen_logistic_balanced",
    "read_trajectory_csv",
    "write_trajectory_csv",
    "read_manifest",
    "write_manifest",
    "load_dataset",
    "write_dataset",
    "truncate_prefix",
    "split",
]

REGULAR = "regular"
CHAOTIC = "chaotic"
REJECTION_FACTOR = 1000


@dataclass(frozen=True)
class LogisticGenConfig:
    r_range: tuple[float, float] = (3.5, 4.0)
    N: int = 1000
    burn_in: int = 1000
    x0_range: tuple[float, float] = (0.1, 0.9)
    lyapunov_iters: int = 10_000
    lyapunov_margin: float = 0.01
    seed: int = 0

    def __post_init__(self):
        r_lo, r_hi = self.r_range
        x_lo, x_hi = self.x0_range
        if not 0.0 < r_lo <= r_hi <= 4.0:
            raise ValueError(f"r_range must lie within (0, 4], got {self.r_range}")
        if not 0.0 < x_lo <= x_hi < 1.0:
            raise ValueError(f"x0_range must lie within (0, 1), got {self.x0_range}")
        if self.N < 1 or self.burn_in < 0 or self.lyapunov_iters < 1:
            raise ValueError("need N >= 1, burn_in >= 0, lyapunov_iters >= 1")
        if self.lyapunov_margin < 0:
            raise ValueError("lyapunov_margin must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")


@dataclass(frozen=True, eq=False)
class LogisticSample:
    trajectory: np.ndarray  # (1, N)
    label: str
    lyapunov: float
    r: float
    x0: float
    index: int


def logistic_orbit(r, x0, burn_in: int, steps: int, lyapunov_iters: int = 0):
    """Iterate ``x -> r x (1 - x)`` for a batch of ``(r, x0)`` pairs.

    Returns ``(orbit, lyapunov)``: ``orbit`` has shape ``(B, steps)`` and holds
    the iterates after ``burn_in`` discarded steps; ``lyapunov`` is the mean of
    ``ln|r (1 - 2 x_k)|`` over the first ``lyapunov_iters`` of those iterates
    (NaN when ``lyapunov_iters`` is 0). Per-sample results do not depend on the
    batch they were computed in.
    """
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    x = np.atleast_1d(np.asarray(x0, dtype=np.float64)).copy()
    orbit = np.empty((x.shape[0], steps))
    acc = np.zeros_like(x)
    with np.errstate(divide="ignore"):
        for _ in range(burn_in):
            x = r * x * (1.0 - x)
        for k in range(max(steps, lyapunov_iters)):
            if k < steps:
                orbit[:, k] = x
            if k < lyapunov_iters:
                acc = acc + np.log(np.abs(r * (1.0 - 2.0 * x)))
            x = r * x * (1.0 - x)
    lyap = acc / lyapunov_iters if lyapunov_iters else np.full_like(acc, np.nan)
    return orbit, lyap


def lyapunov_exponent(r: float, x0: float, burn_in: int = 1000, iters: int = 10_000) -> float:
    """Lyapunov exponent of one logistic orbit (same arithmetic as generation)."""
    _, lyap = logistic_orbit(r, x0, burn_in, 0, iters)
    return float(lyap[0])


def _draw(cfg: LogisticGenConfig, index: int, attempt: int) -> tuple[float, float]:
    rng = np.random.default_rng([cfg.seed, index, attempt])
    return float(rng.uniform(*cfg.r_range)), float(rng.uniform(*cfg.x0_range))


def _generate_indices(cfg: LogisticGenConfig, indices: Sequence[int], budget: list[int]) -> list[LogisticSample]:
    """One accepted sample per index, redrawing rejected attempts."""
    pending = {i: 0 for i in indices}
    accepted: dict[int, LogisticSample] = {}
    while pending:
        ids = list(pending)
        budget[0] -= len(ids)
        if budget[0] < 0:
            raise GeneratorError(
                "rejection cap exceeded; lyapunov_margin may be too wide for r_range"
            )
        draws = [_draw(cfg, i, pending[i]) for i in ids]
        r = np.array([d[0] for d in draws])
        x0 = np.array([d[1] for d in draws])
        orbit, lyap = logistic_orbit(r, x0, cfg.burn_in, cfg.N, cfg.lyapunov_iters)
        if np.any(orbit < 0.0) or np.any(orbit > 1.0):
            raise GeneratorError("logistic iterates left [0, 1]")
        ok_domain = np.all((orbit > 0.0) & (orbit < LOGISTIC_UPPER), axis=1)
        for j, i in enumerate(ids):
            lam = float(lyap[j])
            if ok_domain[j] and np.isfinite(lam) and abs(lam) > cfg.lyapunov_margin:
                label = CHAOTIC if lam > 0 else REGULAR
                accepted[i] = LogisticSample(orbit[j:j + 1].copy(), label, lam, draws[j][0], draws[j][1], i)
                del pending[i]
            else:
                pending[i] += 1
    return [accepted[i] for i in indices]


def gen_logistic(cfg: LogisticGenConfig, count: int) -> list[LogisticSample]:
    """Draw ``count`` labelled logistic trajectories.

    Samples whose exponent falls within ``lyapunov_margin`` of zero, or whose
    orbit touches the kernel domain boundary, are redrawn; at most
    ``1000 * count`` draws are made in total.
    """
    if count < 1:
        raise ValueError("count must be positive")
    return _generate_indices(cfg, range(count), [REJECTION_FACTOR * count])


def gen_logistic_balanced(cfg: LogisticGenConfig, per_class: int, batch: int = 256) -> list[LogisticSample]:
    """``per_class`` regular followed by ``per_class`` chaotic samples.

    Sample indices are visited in order and each class keeps its first
    ``per_class`` members, so the result does not depend on ``batch``.
    """
    if per_class < 1:
        raise ValueError("per_class must be positive")
    kept = {REGULAR: [], CHAOTIC: []}
    budget = [REJECTION_FACTOR * 2 * per_class]
    start = 0
    while min(len(v) for v in kept.values()) < per_class:
        for s in _generate_indices(cfg, range(start, start + batch), budget):
            if len(kept[s.label]) < per_class:
                kept[s.label].append(s)
        start += batch
    return kept[REGULAR] + kept[CHAOTIC]


# --- CSV and manifests -------------------------------------------------------


def _parse_float(cell: str, path, row: int, col: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DatasetError(f"{path}: row {row}, column {col}: cannot parse {cell!r} as a number") from None


def read_trajectory_csv(path: str | os.PathLike) -> np.ndarray:
    """Read one trajectory: rows are time steps, columns state components.

    A first row with no numeric cell is taken as a header.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        first = rows[0]
        numeric = 0
        for c in first:
            try:
                float(c)
                numeric += 1
            except ValueError:
                pass
        start = 1 if numeric == 0 else 0
    else:
        start = 0
    if len(rows) <= start:
        raise DatasetError(f"{path}: no data rows")
    width = len(rows[start])
    values = []
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise DatasetError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        values.append([_parse_float(c, path, i, j + 1) for j, c in enumerate(row)])
    return as_trajectory(np.array(values).T)


def write_trajectory_csv(path: str | os.PathLike, t, header: Sequence[str] | None = None) -> None:
    t = as_trajectory(t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in t.T:
            w.writerow([repr(float(v)) for v in row])


def read_manifest(path: str | os.PathLike) -> dict:
    """Parse and validate a manifest; file paths are resolved against its directory."""
    path = Path(path)
    try:
        with open(path) as fh:
            man = json.load(fh)
    except FileNotFoundError:
        raise DatasetError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid manifest: {exc}") from None
    for key in ("files", "n", "N"):
        if key not in man:
            raise DatasetError(f"{path}: manifest lacks {key!r}")
    if not man["files"]:
        raise DatasetError(f"{path}: manifest lists no files")
    for i, rec in enumerate(man["files"]):
        if not rec.get("path") or not str(rec.get("label", "")):
            raise DatasetError(f"{path}: entry {i} needs a path and a non-empty label")
    man.setdefault("meta", {})
    man["root"] = path.parent
    return man


def write_manifest(path: str | os.PathLike, entries: Iterable[tuple[str, str]], n: int, N: int, meta: dict | None = None) -> None:
    man = {
        "n": int(n),
        "N": int(N),
        "files": [{"path": str(p), "label": str(label)} for p, label in entries],
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(man, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_dataset(manifest_path: str | os.PathLike) -> tuple[np.ndarray, list[str]]:
    """Read every trajectory listed in a manifest.

    Returns a ``(p, n, N)`` stack and the labels in manifest order.
    """
    man = read_manifest(manifest_path)
    n, N = int(man["n"]), int(man["N"])
    trajs, labels = [], []
    for rec in man["files"]:
        fpath = Path(man["root"]) / rec["path"]
        if not fpath.is_file():
            raise DatasetError(f"trajectory file not found: {fpath}")
        t = read_trajectory_csv(fpath)
        if t.shape != (n, N):
            raise DatasetError(f"{fpath}: shape {t.shape} (n, N) does not match manifest ({n}, {N})")
        trajs.append(t)
        labels.append(str(rec["label"]))
    return np.stack(trajs), labels


def write_dataset(directory: str | os.PathLike, trajectories, labels: Sequence[str], meta: dict | None = None,
                  manifest_name: str = "manifest.json", header: Sequence[str] | None = None) -> Path:
    """Write one CSV per trajectory plus a manifest; returns the manifest path.

    ``header`` optionally names the state components (first CSV row).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stack = as_trajectory_set(trajectories)
    width = len(str(len(stack) - 1))
    entries = []
    for i, (t, label) in enumerate(zip(stack, labels)):
        name = f"traj_{i:0{width}d}.csv"
        write_trajectory_csv(directory / name, t, header=header)
        entries.append((name, label))
    mpath = directory / manifest_name
    write_manifest(mpath, entries, stack.shape[1], stack.shape[2], meta)
    return mpath


# --- transforms and splits ---------------------------------------------------


def truncate_prefix(t, length: int):
    """First ``length`` time steps of a trajectory or a ``(p, n, N)`` stack."""
    arr = np.asarray(t, dtype=np.float64)
    N = arr.shape[-1]
    if not 1 <= length <= N:
        raise ShapeMismatchError(f"prefix length must lie in [1, {N}], got {length}")
    return arr[..., :length].copy()


def split(trajectories, labels: Sequence[str], train_fraction: float, seed: int):
    """Stratified random train/test split.

    Each label contributes ``max(1, floor(train_fraction * count))`` training
    samples; the rest go to the test side. Returns
    ``((train_X, train_labels), (test_X, test_labels))``, each side in the
    original order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction!r}")
    stack = as_trajectory_set(trajectories)
    labels = [str(x) for x in labels]
    if len(labels) != len(stack):
        raise ValueError(f"{len(labels)} labels for {len(stack)} trajectories")
    rng = np.random.default_rng(seed)
    train_idx = []
    for label in dict.fromkeys(labels):
        idx = np.flatnonzero(np.array(labels) == label)
        n_train = max(1, int(np.floor(train_fraction * len(idx))))
        if n_train >= len(idx):
            raise ValueError(f"label {label!r} has {len(idx)} sample(s); its test side would be empty")
        train_idx.extend(idx[rng.permutation(len(idx))[:n_train]])
    train_mask = np.zeros(len(stack), dtype=bool)
    train_mask[train_idx] = True
    tr, te = np.flatnonzero(train_mask), np.flatnonzero(~train_mask)
    return (stack[tr], [labels[i] for i in tr]), (stack[te], [labels[i] for i in te])
