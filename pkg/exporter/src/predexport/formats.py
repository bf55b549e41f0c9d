"""Writers for the divshift file formats: DDPM v1 predictions, labels CSV.

Implemented from the published format description, deliberately without
importing the analysis toolkit: this package is format glue only, so the
metric semantics stay in one implementation.

DDPM v1: little-endian header `<4sHHII` = magic "DDPM", version 1, flags
(bit 0: logits block), n, k; then row-major float32 probabilities and,
when flagged, float32 logits. Payload length must equal
n*k*4*(1 + logits_flag) and n*k must stay below 2^31.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"DDPM"
VERSION = 1
FLAG_LOGITS = 0x0001
HEADER = struct.Struct("<4sHHII")
MAX_CELLS = 2**31


class ExportError(Exception):
    pass


def write_prediction_file(path, probs: np.ndarray, logits: np.ndarray | None = None) -> None:
    """Write probabilities (and optionally logits) as a DDPM v1 file."""
    probs = np.asarray(probs)
    if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
        raise ExportError(f"probabilities must be a nonempty N x K matrix, got {probs.shape}")
    n, k = probs.shape
    if n * k > MAX_CELLS:
        raise ExportError(f"n*k = {n * k} exceeds the format limit {MAX_CELLS}")
    if logits is not None and np.asarray(logits).shape != (n, k):
        raise ExportError(
            f"logits shape {np.asarray(logits).shape} does not match probabilities {(n, k)}"
        )
    flags = FLAG_LOGITS if logits is not None else 0
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, flags, n, k))
        fh.write(np.ascontiguousarray(probs, dtype="<f4").tobytes())
        if logits is not None:
            fh.write(np.ascontiguousarray(logits, dtype="<f4").tobytes())


def write_label_file(path, labels) -> None:
    """One integer per line under a "label" header."""
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.size == 0:
        raise ExportError(f"labels must be a nonempty vector, got shape {arr.shape}")
    if np.any(arr < 0):
        raise ExportError("labels must be nonnegative")
    with open(path, "w", newline="") as fh:
        fh.write("label\n")
        for v in arr:
            fh.write(f"{int(v)}\n")
