"""Bit-exact file formats: prediction matrices, label CSVs, manifests.

Prediction files ("DDPM" v1) are a 16-byte little-endian header followed by
row-major float32 payloads:

    bytes 0-3   magic "DDPM"
    bytes 4-5   version, uint16 (= 1)
    bytes 6-7   flags, uint16 (bit 0 set when a logits block follows)
    bytes 8-11  n samples, uint32
    bytes 12-15 k classes, uint32

then n*k probabilities and, when flagged, n*k logits. Everything is pinned
little-endian so files are identical across platforms. Labels are plain CSV,
one integer per line, with an optional "label" header. Storage is float32
(typical model-export precision); all in-memory arithmetic is float64.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import (
    EmptyLabels,
    EnsembleManifest,
    LabelVector,
    ManifestError,
    Pairing,
    PredictionSet,
    ShapeMismatch,
    ValidationError,
    validate_labels,
    validate_prediction_set,
)

MAGIC = b"DDPM"
VERSION = 1
FLAG_LOGITS = 0x0001
_HEADER = struct.Struct("<4sHHII")
MAX_CELLS = 2**31


class FormatError(ValidationError):
    """Malformed prediction file."""


class BadMagic(FormatError):
    pass


class BadVersion(FormatError):
    pass


class TruncatedPayload(FormatError):
    pass


class ShapeOverflow(FormatError):
    pass


def write_predictions(pred: PredictionSet, path) -> None:
    """Write a prediction set; probabilities block, then optional logits."""
    n, k = pred.probs.shape
    if n * k > MAX_CELLS:
        raise ShapeOverflow(f"n*k = {n * k} exceeds the format limit {MAX_CELLS}")
    flags = FLAG_LOGITS if pred.logits is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flags, n, k))
        fh.write(np.ascontiguousarray(pred.probs, dtype="<f4").tobytes())
        if pred.logits is not None:
            fh.write(np.ascontiguousarray(pred.logits, dtype="<f4").tobytes())


def read_prediction_header(path):
    """(n, k, has_logits) from the file header, payload untouched."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, flags, n, k = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"{path}: unsupported version {version}")
    if n * k > MAX_CELLS:
        raise ShapeOverflow(f"{path}: n*k = {n * k} exceeds the format limit {MAX_CELLS}")
    return int(n), int(k), bool(flags & FLAG_LOGITS)


def read_predictions(path, *, model_id: str = "", split_id: str = "") -> PredictionSet:
    """Read a prediction file, preserving the stored float32 values exactly.

    Only the format is checked here; value-level validation (and the exact
    renormalization) happens in validate_prediction_set at manifest load.
    """
    n, k, has_logits = read_prediction_header(path)
    blocks = 2 if has_logits else 1
    expected = n * k * 4 * blocks
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        payload = fh.read()
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4")
    probs = data[: n * k].reshape(n, k).astype(np.float64)
    logits = data[n * k :].reshape(n, k).astype(np.float64) if has_logits else None
    return PredictionSet(model_id=model_id, split_id=split_id, probs=probs, logits=logits)


def write_labels(labels, path) -> None:
    arr = np.asarray(labels.labels if isinstance(labels, LabelVector) else labels, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        fh.write("label\n")
        for v in arr:
            fh.write(f"{int(v)}\n")


def read_labels(path, *, split_id: str = "") -> LabelVector:
    """One integer per line; a leading "label" header line is allowed."""
    values = []
    with open(path, "r", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if lineno == 1 and text.lower() == "label":
                continue
            try:
                value = int(text)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-integer label {text!r}") from None
            if value < 0:
                raise ValidationError(f"{path}:{lineno}: negative label {value}")
            values.append(value)
    if not values:
        raise EmptyLabels(f"{path}: no labels")
    return LabelVector(split_id=split_id, labels=np.asarray(values, dtype=np.int64))


def read_predictions_csv(path, *, model_id: str = "", split_id: str = ""):
    """Import a CSV with header p0..p{K-1} plus optional trailing y column.

    Values pass through float32, so the import is lossless with respect to
    the binary format. Returns (PredictionSet, LabelVector or None).
    """
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        has_labels = bool(header) and header[-1] == "y"
        prob_cols = header[:-1] if has_labels else header
        expected = [f"p{i}" for i in range(len(prob_cols))]
        if prob_cols != expected:
            raise ValidationError(
                f"{path}: header must be p0..p{{K-1}}[,y], got {','.join(header)}"
            )
        rows = []
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row[: len(prob_cols)]])
                if has_labels:
                    labels.append(int(row[-1]))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: malformed numeric field") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    probs = np.asarray(rows, dtype=np.float32).astype(np.float64)
    pred = PredictionSet(model_id=model_id, split_id=split_id, probs=probs)
    vec = LabelVector(split_id=split_id, labels=np.asarray(labels, dtype=np.int64)) if has_labels else None
    return pred, vec


# ---------------------------------------------------------------------------
# Manifests.

_MANIFEST_KEYS = {"k", "id_split", "ood_splits", "models", "pairing", "labels", "options"}


def write_manifest(manifest: EnsembleManifest, path) -> None:
    doc = {
        "k": manifest.k,
        "id_split": manifest.id_split,
        "ood_splits": list(manifest.ood_splits),
        "models": [
            {"id": mid, "predictions": dict(paths)} for mid, paths in manifest.models
        ],
        "pairing": (
            {"mode": "anchor", "anchor": manifest.pairing.anchor}
            if manifest.pairing.mode == "anchor"
            else {"mode": "all_pairs"}
        ),
        "labels": dict(manifest.labels),
        "options": _plain(manifest.options),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> EnsembleManifest:
    """Parse and fully validate a manifest; paths come back absolute.

    Every referenced file must exist; prediction headers must agree on the
    sample count per split and on k; label files must match their split's
    sample count with values inside [0, k).
    """
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    unknown = set(doc) - _MANIFEST_KEYS
    if unknown:
        raise ManifestError(f"{path}: unknown manifest keys {sorted(unknown)}")
    for key in ("k", "id_split", "models", "pairing"):
        if key not in doc:
            raise ManifestError(f"{path}: missing required key {key!r}")
    base = path.parent

    def resolve(p):
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    k = doc["k"]
    if not isinstance(k, int) or k < 2:
        raise ManifestError(f"{path}: k must be an integer >= 2")
    id_split = doc["id_split"]
    ood_splits = doc.get("ood_splits", [])
    if not isinstance(ood_splits, list):
        raise ManifestError(f"{path}: ood_splits must be a list")
    splits = [id_split] + list(ood_splits)

    models = []
    if not isinstance(doc["models"], list) or not doc["models"]:
        raise ManifestError(f"{path}: models must be a nonempty list")
    for entry in doc["models"]:
        if not isinstance(entry, dict) or "id" not in entry or "predictions" not in entry:
            raise ManifestError(f"{path}: each model needs 'id' and 'predictions'")
        preds = {split: resolve(p) for split, p in entry["predictions"].items()}
        models.append((entry["id"], preds))

    pairing_doc = doc["pairing"]
    if not isinstance(pairing_doc, dict) or "mode" not in pairing_doc:
        raise ManifestError(f"{path}: pairing needs a 'mode'")
    mode = pairing_doc["mode"]
    if mode in ("all_pairs", "all-pairs"):
        pairing = Pairing.all_pairs()
    elif mode == "anchor":
        if "anchor" not in pairing_doc:
            raise ManifestError(f"{path}: anchor pairing needs an 'anchor' model id")
        pairing = Pairing.with_anchor(pairing_doc["anchor"])
    else:
        raise ManifestError(f"{path}: unknown pairing mode {mode!r}")

    labels = {split: resolve(p) for split, p in doc.get("labels", {}).items()}
    manifest = EnsembleManifest(
        k=k,
        id_split=id_split,
        ood_splits=tuple(ood_splits),
        models=tuple(models),
        pairing=pairing,
        labels=labels,
        options=doc.get("options", {}),
    )

    shapes = {}
    for model_id, paths in manifest.models:
        for split in splits:
            fpath = paths[split]
            if not Path(fpath).is_file():
                raise ManifestError(f"{path}: missing prediction file {fpath} ({model_id}/{split})")
            n, file_k, _ = read_prediction_header(fpath)
            if file_k != k:
                raise ShapeMismatch(f"{fpath}: k={file_k}, manifest says {k}")
            if split in shapes and shapes[split] != n:
                raise ShapeMismatch(
                    f"{fpath}: split {split!r} has n={n}, other models have n={shapes[split]}"
                )
            shapes[split] = n
    for split, lpath in labels.items():
        if split not in splits:
            raise ManifestError(f"{path}: labels given for unknown split {split!r}")
        if not Path(lpath).is_file():
            raise ManifestError(f"{path}: missing label file {lpath}")
        vec = read_labels(lpath, split_id=split)
        validate_labels(vec, k, shapes[split])
    return manifest


@dataclass(frozen=True)
class LoadedEnsemble:
    """All predictions and labels of a manifest, validated and renormalized."""

    manifest: EnsembleManifest
    predictions: Mapping[tuple[str, str], PredictionSet]
    labels: Mapping[str, LabelVector]

    def labels_for(self, split_id: str) -> LabelVector | None:
        return self.labels.get(split_id)


def load_ensemble(manifest: EnsembleManifest) -> LoadedEnsemble:
    predictions = {}
    for model_id, paths in manifest.models:
        for split in manifest.splits:
            raw = read_predictions(paths[split], model_id=model_id, split_id=split)
            predictions[(model_id, split)] = validate_prediction_set(
                raw.probs, manifest.k, model_id=model_id, split_id=split, logits=raw.logits
            )
    labels = {
        split: validate_labels(read_labels(lpath, split_id=split), manifest.k)
        for split, lpath in manifest.labels.items()
    }
    return LoadedEnsemble(manifest=manifest, predictions=predictions, labels=labels)


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj
