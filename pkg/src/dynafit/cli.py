"""Command-line interface: ``dynafit {gen,train,eval,predict,bench}``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import yaml
from scipy import linalg

from . import __version__
from .core import (
    DEFAULT_EIGEN_THRESHOLD,
    DEFAULT_QUANTILE,
    DynafitClassifier,
    OneClassDetector,
    classify,
    detect,
    fit_class_model,
    fit_threshold,
    test_distances,
    train_distances,
)
from .data import (
    CHAOTIC,
    REGULAR,
    LogisticGenConfig,
    gen_logistic_balanced,
    load_dataset,
    split,
    truncate_prefix,
    write_dataset,
)
from .exceptions import DynafitError
from .kernels import Gaussian, LogisticMap, Polynomial, gram
from .persistence import load_model, save_model

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

REPORT_SCHEMA = "dynafit-report"
REPORT_VERSION = 1
KERNELS = ("poly", "gauss", "logistic")
# Recommended Gaussian widths by trajectory prefix length (character data).
GAUSS_SIGMA_BY_LENGTH = {10: 2.9, 20: 4.2, 50: 7.5, 100: 15.0}


class UsageError(Exception):
    pass


# --- shared helpers ----------------------------------------------------------


def make_kernel(args, length: int | None = None):
    if args.kernel == "poly":
        return Polynomial(args.degree)
    if args.kernel == "logistic":
        return LogisticMap()
    if args.kernel == "gauss":
        sigma = args.sigma
        if sigma is None:
            sigma = GAUSS_SIGMA_BY_LENGTH.get(length)
        if sigma is None:
            raise UsageError(
                f"--sigma is required for the gauss kernel at length {length}; "
                f"recommended values: {GAUSS_SIGMA_BY_LENGTH}"
            )
        return Gaussian(sigma)
    raise UsageError(f"unknown kernel {args.kernel!r}; valid kernels: {', '.join(KERNELS)}")


@contextmanager
def executor():
    """Thread pool capped by ``DYNAFIT_THREADS`` (0 or unset: one per CPU)."""
    raw = os.environ.get("DYNAFIT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"DYNAFIT_THREADS must be an integer, got {raw!r}") from None
    n = n if n > 0 else (os.cpu_count() or 1)
    if n == 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool


def _load(args):
    X, y = load_dataset(args.manifest)
    if args.prefix_len is not None:
        X = truncate_prefix(X, args.prefix_len)
    return X, y


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# --- gen ---------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.per_class < 1:
        raise UsageError("--per-class must be positive")
    cfg = LogisticGenConfig(
        r_range=(args.r_min, args.r_max),
        N=args.length,
        burn_in=args.burn_in,
        lyapunov_iters=args.lyapunov_iters,
        lyapunov_margin=args.margin,
        seed=args.seed,
    )
    samples = gen_logistic_balanced(cfg, args.per_class)
    meta = {
        "generator": "logistic",
        "r_range": list(cfg.r_range),
        "x0_range": list(cfg.x0_range),
        "burn_in": cfg.burn_in,
        "lyapunov_iters": cfg.lyapunov_iters,
        "lyapunov_margin": cfg.lyapunov_margin,
        "seed": cfg.seed,
        "samples": [{"index": s.index, "r": s.r, "x0": s.x0, "lyapunov": s.lyapunov} for s in samples],
    }
    mpath = write_dataset(args.out, [s.trajectory for s in samples], [s.label for s in samples], meta)
    print(f"wrote {len(samples)} trajectories (N = {cfg.N}) and {mpath}")
    lam = np.array([s.lyapunov for s in samples])
    for label in (REGULAR, CHAOTIC):
        sel = np.array([s.label == label for s in samples])
        v = lam[sel]
        print(f"  {label:8s} count {sel.sum():6d}  lyapunov min {_fmt(v.min())}  median {_fmt(np.median(v))}  max {_fmt(v.max())}")
    counts, edges = np.histogram(lam, bins=8)
    print("  lyapunov histogram:")
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        print(f"    [{lo:+.3f}, {hi:+.3f})  {c}")
    return EXIT_OK


# --- train -------------------------------------------------------------------


def cmd_train(args) -> int:
    X, y = _load(args)
    spec = make_kernel(args, X.shape[-1])
    if args.one_class:
        return _train_one_class(args, spec, X, y)
    with executor() as pool:
        clf = DynafitClassifier.fit(spec, X, y, args.eig_threshold, executor=pool)
    save_model(clf, args.out)
    print(f"kernel {spec.to_dict()}  eig-threshold {args.eig_threshold:g}")
    print(f"{'class':>12s} {'p':>6s} {'rank':>6s} {'mean train dist':>16s} {'tr(K)':>12s}")
    for label, m in clf.classes:
        print(f"{label:>12s} {m.p:6d} {m.rank:6d} {_fmt(float(np.mean(train_distances(m)))):>16s} {_fmt(m.gram_trace):>12s}")
    print(f"model written to {args.out}")
    return EXIT_OK


def _train_one_class(args, spec, X, y):
    label = args.label if args.label is not None else y[0]
    sel = [i for i, lab in enumerate(y) if lab == label]
    if not sel:
        raise UsageError(f"label {label!r} not found in the manifest")
    Xl = X[sel]
    (Xtr, _), (Xcal, _) = split(Xl, [label] * len(Xl), args.train_fraction, args.seed)
    model = fit_class_model(spec, Xtr, args.eig_threshold)
    det = fit_threshold(model, Xcal, args.quantile)
    save_model(det, args.out)
    print(f"one-class model for {label!r}: p {model.p}, rank {model.rank}, "
          f"{len(Xcal)} calibration trajectories, threshold {_fmt(det.threshold)} (quantile {args.quantile:g})")
    print(f"model written to {args.out}")
    return EXIT_OK


# --- eval --------------------------------------------------------------------


def _evaluate(clf: DynafitClassifier, X, y):
    t0 = time.perf_counter()
    results = classify(clf, X)
    elapsed = time.perf_counter() - t0
    pred = [label for label, _ in results]
    D = np.array([d for _, d in results])
    return pred, D, elapsed


def build_report(args, spec, trials: list[dict], model_labels: list[str]) -> dict:
    """Aggregate per-trial results into the versioned report structure."""
    true_labels = list(dict.fromkeys(lab for t in trials for lab in t["y"]))
    rows = model_labels + [lab for lab in true_labels if lab not in model_labels]
    index = {lab: i for i, lab in enumerate(rows)}
    conf = np.zeros((len(rows), len(model_labels)), dtype=int)
    dist_sum = np.zeros((len(rows), len(model_labels)))
    dist_cnt = np.zeros(len(rows))
    for t in trials:
        for yt, yp, d in zip(t["y"], t["pred"], t["D"]):
            conf[index[yt], model_labels.index(yp)] += 1
            dist_sum[index[yt]] += d
            dist_cnt[index[yt]] += 1
    acc = [t["accuracy"] for t in trials]
    mean_d = {
        rows[i]: {c: float(dist_sum[i, j] / dist_cnt[i]) for j, c in enumerate(model_labels)}
        for i in range(len(rows)) if dist_cnt[i]
    }
    return {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_VERSION,
        "kernel": spec.to_dict(),
        "eig_threshold": args.eig_threshold,
        "prefix_len": args.prefix_len,
        "train_fraction": args.train_fraction if args.model is None else None,
        "seed": args.seed,
        "trials": len(trials),
        "split_seeds": [t["split_seed"] for t in trials],
        "labels": model_labels,
        "unknown_labels": [lab for lab in true_labels if lab not in model_labels],
        "accuracy": float(np.mean(acc)),
        "accuracy_sd": float(np.std(acc, ddof=1)) if len(acc) > 1 else 0.0,
        "accuracies": acc,
        "n_test": [len(t["y"]) for t in trials],
        "confusion": {"rows": rows, "cols": model_labels, "matrix": conf.tolist()},
        "mean_distances": mean_d,
        "ranks": {lab: [t["ranks"][lab] for t in trials] for lab in model_labels},
        "timings": {
            "train_s": [t["train_s"] for t in trials],
            "inference_s": [t["inference_s"] for t in trials],
        },
    }


def render_report(report: dict) -> str:
    """Human-readable form of an evaluation report."""
    out = []
    out.append(f"kernel {json.dumps(report['kernel'], sort_keys=True)}  eig-threshold {report['eig_threshold']!r}  "
               f"prefix-len {report['prefix_len']!r}  seed {report['seed']!r}")
    out.append(f"trials {report['trials']}  split seeds {report['split_seeds']}  n_test {report['n_test']}")
    out.append(f"accuracy {report['accuracy']!r} +- {report['accuracy_sd']!r}")
    out.append(f"per-trial accuracy {report['accuracies']!r}")
    if report["unknown_labels"]:
        out.append(f"labels absent from model (counted as errors): {report['unknown_labels']}")
    conf = report["confusion"]
    w = max(8, *(len(c) for c in conf["rows"] + conf["cols"]))
    out.append("confusion (rows: true, cols: predicted)")
    out.append(" " * (w + 1) + " ".join(f"{c:>{w}s}" for c in conf["cols"]))
    for r, row in zip(conf["rows"], conf["matrix"]):
        out.append(f"{r:>{w}s} " + " ".join(f"{v:>{w}d}" for v in row))
    out.append("mean distance to each class (rows: true)")
    for r in conf["rows"]:
        d = report["mean_distances"].get(r)
        if d is not None:
            out.append(f"{r:>{w}s} " + " ".join(f"{d[c]!r}" for c in conf["cols"]))
    out.append("ranks " + json.dumps(report["ranks"], sort_keys=True))
    t = report["timings"]
    out.append(f"train time s {t['train_s']!r}")
    out.append(f"inference time s {t['inference_s']!r}")
    return "\n".join(out)


def cmd_eval(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    X, y = _load(args)
    trials = []
    if args.model is not None:
        clf = load_model(args.model)
        if not isinstance(clf, DynafitClassifier):
            raise UsageError("eval needs a classifier model; use predict for one-class models")
        spec = clf.classes[0][1].kernel
        pred, D, t_inf = _evaluate(clf, X, y)
        trials.append({
            "y": y, "pred": pred, "D": D, "split_seed": None,
            "accuracy": float(np.mean(np.array(pred) == np.array(y))),
            "ranks": {lab: m.rank for lab, m in clf.classes},
            "train_s": None, "inference_s": t_inf,
        })
        model_labels = clf.labels
    else:
        spec = make_kernel(args, X.shape[-1])
        model_labels = list(dict.fromkeys(y))
        with executor() as pool:
            for k in range(args.trials):
                seed = args.seed + k
                (Xtr, ytr), (Xte, yte) = split(X, y, args.train_fraction, seed)
                t0 = time.perf_counter()
                clf = DynafitClassifier.fit(spec, Xtr, ytr, args.eig_threshold, executor=pool)
                t_train = time.perf_counter() - t0
                pred, D, t_inf = _evaluate(clf, Xte, yte)
                trials.append({
                    "y": yte, "pred": pred, "D": D, "split_seed": seed,
                    "accuracy": float(np.mean(np.array(pred) == np.array(yte))),
                    "ranks": {lab: m.rank for lab, m in clf.classes},
                    "train_s": t_train, "inference_s": t_inf,
                })
    report = build_report(args, spec, trials, model_labels)
    print(render_report(report))
    if args.out:
        _write_json(args.out, report)
    return EXIT_OK


# --- predict -----------------------------------------------------------------


def cmd_predict(args) -> int:
    obj = load_model(args.model)
    X, _ = _load(args)
    rows = []
    if isinstance(obj, OneClassDetector):
        for i, (status, d) in enumerate(detect(obj, X)):
            rows.append({"index": i, "status": status, "distance": d})
            print(f"{i:6d} {status:>10s} {d!r}")
        print(f"threshold {obj.threshold!r}")
    else:
        for i, (label, d) in enumerate(classify(obj, X)):
            dist = dict(zip(obj.labels, map(float, d)))
            rows.append({"index": i, "label": label, "distances": dist})
            print(f"{i:6d} {label:>12s} " + " ".join(f"{k}={v!r}" for k, v in dist.items()))
    if args.out:
        _write_json(args.out, {"schema": "dynafit-predictions", "schema_version": 1, "predictions": rows})
    return EXIT_OK


# --- bench -------------------------------------------------------------------


def run_bench(spec, sizes, length, classes, seed):
    """Time Gram construction, eigendecomposition and inference per size."""
    rng = np.random.default_rng(seed)
    rows = []
    for p in sizes:
        t_gram = t_eig = t_inf = 0.0
        for _ in range(classes):
            X = rng.uniform(0.0, 0.95, size=(p, 1, length))
            Xt = rng.uniform(0.0, 0.95, size=(p, 1, length))
            t0 = time.perf_counter()
            K = gram(spec, X)
            t1 = time.perf_counter()
            linalg.eigh(K)
            t2 = time.perf_counter()
            m = fit_class_model(spec, X)
            t3 = time.perf_counter()
            test_distances(m, Xt)
            t4 = time.perf_counter()
            t_gram += t1 - t0
            t_eig += t2 - t1
            t_inf += t4 - t3
        rows.append({"p": p, "N": length, "classes": classes, "gram_s": t_gram, "eig_s": t_eig,
                     "train_s": t_gram + t_eig, "inference_s": t_inf})
    return rows


def cmd_bench(args) -> int:
    sizes = [int(s) for s in str(args.sizes).split(",") if s.strip()]
    if not sizes or min(sizes) < 1:
        raise UsageError("--sizes must be a comma-separated list of positive integers")
    spec = make_kernel(args, args.length)
    rows = run_bench(spec, sizes, args.length, args.classes, args.seed)
    print(f"kernel {spec.to_dict()}  classes {args.classes}")
    print(f"{'p':>7s} {'N':>7s} {'gram s':>10s} {'eig s':>10s} {'train s':>10s} {'infer s':>10s}")
    for r in rows:
        print(f"{r['p']:7d} {r['N']:7d} {r['gram_s']:10.4f} {r['eig_s']:10.4f} {r['train_s']:10.4f} {r['inference_s']:10.4f}")
    if args.out:
        _write_json(args.out, {"schema": "dynafit-bench", "schema_version": 1, "kernel": spec.to_dict(), "rows": rows})
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _kernel_flags(p, default=None):
    p.add_argument("--kernel", choices=KERNELS, default=default,
                   help=f"kernel family ({', '.join(KERNELS)})")
    p.add_argument("--degree", type=int, default=2, help="polynomial degree (default 2)")
    p.add_argument("--sigma", type=float, default=None,
                   help="gaussian width; defaults by prefix length: "
                        + ", ".join(f"{k}->{v}" for k, v in GAUSS_SIGMA_BY_LENGTH.items()))
    p.add_argument("--eig-threshold", type=float, default=DEFAULT_EIGEN_THRESHOLD,
                   help="discard Gram eigenvalues below this fraction of the largest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynafit", description="Kernel distance-to-dynamics classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="YAML or JSON file of option defaults")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a labelled logistic-map dataset")
    p.add_argument("--per-class", type=int, default=2000)
    p.add_argument("--length", type=int, default=1000, help="trajectory length N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r-min", type=float, default=3.5)
    p.add_argument("--r-max", type=float, default=4.0)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--lyapunov-iters", type=int, default=10_000)
    p.add_argument("--margin", type=float, default=0.01, help="lyapunov rejection margin")
    p.add_argument("--out", default="data", help="output directory")

    p = add("train", cmd_train, "fit one metric per class and save the model")
    p.add_argument("--manifest", required=True)
    _kernel_flags(p, default="poly")
    p.add_argument("--prefix-len", type=int, default=None)
    p.add_argument("--one-class", action="store_true", help="fit a one-class detector instead")
    p.add_argument("--label", default=None, help="class used for --one-class (default: first label)")
    p.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE)
    p.add_argument("--train-fraction", type=float, default=0.5,
                   help="with --one-class: fraction used for fitting, the rest calibrates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.dynafit")

    p = add("eval", cmd_eval, "evaluate a model, or run repeated split/train/test trials")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", default=None, help="evaluate this model on the whole manifest")
    _kernel_flags(p, default="poly")
    p.add_argument("--prefix-len", type=int, default=None)
    p.add_argument("--train-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", default=None, help="write the JSON report here")

    p = add("predict", cmd_predict, "label trajectories with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--prefix-len", type=int, default=None)
    p.add_argument("--out", default=None)

    p = add("bench", cmd_bench, "time Gram, eigendecomposition and inference")
    _kernel_flags(p, default="logistic")
    p.add_argument("--sizes", default="100,200")
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--classes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if not known.config or command not in subparsers:
        return parser.parse_args(argv)
    with open(known.config) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise UsageError(f"{known.config}: config must be a mapping")
    cfg = {str(k).replace("-", "_"): v for k, v in cfg.items()}
    sub = subparsers[command]
    dests = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - dests)
    if unknown:
        raise UsageError(f"{known.config}: unknown option(s) for {command}: {unknown}")
    # Config values act as defaults; explicit flags still win.
    sub.set_defaults(**cfg)
    for action in sub._actions:
        if action.dest in cfg:
            action.required = False
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"dynafit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DynafitError, OSError, ValueError) as exc:
        print(f"dynafit: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
