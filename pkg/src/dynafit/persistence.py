"""Model files.

Layout::

    b"DYNAFIT\\x00"            8-byte magic
    uint64 little-endian       header length in bytes
    header                     UTF-8 JSON: format_name, version, kind, kernel,
                               classes (label, p, n, N, k, eigen_threshold_rel),
                               threshold (one-class only), payload_bytes
    payload                    per class: train_set (p, n, N), V (p, k),
                               sigma (k,), H (p, p); row-major float64 LE
    sha256                     32-byte digest of everything above

Matrices round-trip bit-exactly.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

from .core import ClassModel, DynafitClassifier, OneClassDetector
from .exceptions import ChecksumError, ModelFormatError, ModelVersionError
from .kernels import kernel_from_dict

__all__ = ["FORMAT_NAME", "FORMAT_VERSION", "save_model", "load_model", "dumps", "loads"]

FORMAT_NAME = "dynafit-model"
FORMAT_VERSION = 1
MAGIC = b"DYNAFIT\x00"
_F8 = np.dtype("<f8")
_DIGEST = 32


def _record(label: str, m: ClassModel) -> tuple[dict, list[np.ndarray]]:
    p, n, N = m.train_set.shape
    meta = {
        "label": label,
        "p": p,
        "n": n,
        "N": N,
        "k": m.rank,
        "eigen_threshold_rel": m.eigen_threshold_rel,
    }
    return meta, [m.train_set, m.V, m.sigma, m.H]


def dumps(obj: DynafitClassifier | OneClassDetector) -> bytes:
    """Serialise a classifier or one-class detector to bytes."""
    if isinstance(obj, DynafitClassifier):
        kind, entries, extra = "classifier", obj.classes, {}
    elif isinstance(obj, OneClassDetector):
        kind, entries, extra = "one-class", [("normal", obj.model)], {"threshold": obj.threshold}
    else:
        raise TypeError(f"cannot save object of type {type(obj).__name__}")
    kernels = {m.kernel for _, m in entries}
    if len(kernels) != 1:
        raise ValueError("all class models in a file must share one kernel")

    records, blobs = [], []
    for label, m in entries:
        meta, arrays = _record(label, m)
        records.append(meta)
        blobs.extend(np.ascontiguousarray(a, dtype=_F8).tobytes() for a in arrays)
    payload = b"".join(blobs)
    header = {
        "format_name": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": kind,
        "kernel": kernels.pop().to_dict(),
        "classes": records,
        "payload_bytes": len(payload),
        **extra,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = MAGIC + struct.pack("<Q", len(head)) + head + payload
    return body + hashlib.sha256(body).digest()


def loads(data: bytes) -> DynafitClassifier | OneClassDetector:
    """Inverse of :func:`dumps`."""
    if len(data) < len(MAGIC) + 8 or data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a dynafit model file (bad magic)")
    (head_len,) = struct.unpack_from("<Q", data, len(MAGIC))
    start = len(MAGIC) + 8
    if start + head_len > len(data):
        raise ModelFormatError("model file truncated inside header")
    try:
        header = json.loads(data[start:start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable model header: {exc}") from exc
    if not isinstance(header, dict):
        raise ModelFormatError("model header is not an object")
    if header.get("format_name") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format {header.get('format_name')!r} version {header.get('version')!r}; "
            f"expected {FORMAT_NAME!r} version {FORMAT_VERSION}"
        )
    try:
        payload_len = int(header["payload_bytes"])
        kind = header["kind"]
        records = header["classes"]
        spec = kernel_from_dict(header["kernel"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"incomplete model header: {exc}") from exc
    body_end = start + head_len + payload_len
    if len(data) != body_end + _DIGEST:
        raise ModelFormatError(f"model file is {len(data)} bytes, header implies {body_end + _DIGEST}")
    if hashlib.sha256(data[:body_end]).digest() != data[body_end:]:
        raise ChecksumError("model file checksum mismatch")

    offset = start + head_len

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        if offset + count * 8 > body_end:
            raise ModelFormatError("payload shorter than the class records declare")
        arr = np.frombuffer(data, dtype=_F8, count=count, offset=offset).reshape(shape)
        offset += count * 8
        return arr.astype(np.float64)

    entries = []
    try:
        for rec in records:
            p, n, N, k = (int(rec[key]) for key in ("p", "n", "N", "k"))
            train = take((p, n, N))
            V = take((p, k))
            sigma = take((k,))
            H = take((p, p))
            model = ClassModel(spec, train, V, sigma, H, float(rec["eigen_threshold_rel"]))
            entries.append((rec["label"], model))
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed class record: {exc}") from exc
    if offset != body_end:
        raise ModelFormatError("payload longer than the class records declare")

    if kind == "classifier":
        return DynafitClassifier(entries)
    if kind == "one-class":
        if len(entries) != 1 or "threshold" not in header:
            raise ModelFormatError("one-class model needs exactly one class and a threshold")
        return OneClassDetector(entries[0][1], float(header["threshold"]))
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(obj: DynafitClassifier | OneClassDetector, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(obj))


def load_model(path: str | os.PathLike) -> DynafitClassifier | OneClassDetector:
    with open(path, "rb") as fh:
        return loads(fh.read())
