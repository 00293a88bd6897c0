#!/usr/bin/env python3
"""Convert the UCI "Character Trajectories" MATLAB file to a dynafit dataset.

The source file (``mixoutALL_shifted.mat``) holds a cell array ``mixout`` of
``3 x T`` pen-tip velocity recordings (x, y, pen force) of varying length and
a struct ``consts`` whose ``charlabels`` index into ``key`` (the letters).

Recordings are padded with trailing zeros to the longest length, which
corresponds to the pen at rest after the stroke ends. Classification only
uses a prefix of each trajectory (``--prefix-len``), so for prefixes no longer
than the shortest recording the padding never enters the kernel.

    python scripts/convert_character_trajectories.py mixoutALL_shifted.mat chars/
    dynafit eval --manifest chars/manifest.json --kernel poly --degree 2 \\
        --prefix-len 100 --train-fraction 0.1 --trials 10
"""
from __future__ import annotations

import argparse
import sys

import numpy as np
from scipy import io

from dynafit.data import write_dataset


def load_character_mat(path):
    """Return ``(recordings, labels)`` from the MATLAB file."""
    mat = io.loadmat(path, squeeze_me=True, struct_as_record=False)
    consts = mat["consts"]
    keys = [str(k) for k in np.atleast_1d(consts.key)]
    labels = [keys[int(i) - 1] for i in np.atleast_1d(consts.charlabels)]
    recordings = [np.asarray(r, dtype=np.float64) for r in np.atleast_1d(mat["mixout"])]
    if len(recordings) != len(labels):
        raise ValueError(f"{len(recordings)} recordings but {len(labels)} labels")
    return recordings, labels


def pad_recordings(recordings, length=None):
    """Stack ``(3, T_i)`` recordings into ``(p, 3, length)`` with zero padding."""
    length = max(r.shape[1] for r in recordings) if length is None else length
    out = np.zeros((len(recordings), recordings[0].shape[0], length))
    for i, r in enumerate(recordings):
        T = min(length, r.shape[1])
        out[i, :, :T] = r[:, :T]
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mat", help="path to mixoutALL_shifted.mat")
    ap.add_argument("out", help="output directory for CSV files and manifest.json")
    args = ap.parse_args(argv)
    recordings, labels = load_character_mat(args.mat)
    lengths = [r.shape[1] for r in recordings]
    X = pad_recordings(recordings)
    meta = {"source": "UCI Character Trajectories", "padding": "trailing zeros",
            "min_length": min(lengths), "max_length": max(lengths)}
    mpath = write_dataset(args.out, X, labels, meta, header=["vx", "vy", "force"])
    print(f"wrote {len(labels)} trajectories, {len(set(labels))} classes, "
          f"lengths {min(lengths)}..{max(lengths)} (padded to {X.shape[-1]}) -> {mpath}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
