"""Batched inference driver that emits divshift-ready files.

The model is any callable mapping a batch of samples to an N x K score
matrix (logits by default). The exporter batches the dataset through it,
derives probabilities, writes the DDPM prediction file plus the labels CSV,
and returns a manifest fragment ready to paste into a divshift manifest.
No metrics are computed here.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import ExportError, write_label_file, write_prediction_file

SCORES_LOGITS = "logits"
SCORES_PROBS = "probs"


@dataclass(frozen=True)
class ExportJob:
    """One model evaluated on one split.

    ``model`` is a callable or an import path "package.module:attr".
    ``scores`` declares what the model emits: raw logits (probabilities are
    their softmax) or ready-made probabilities (no logits block possible).
    """

    model: object
    model_id: str
    split_id: str
    samples: object
    labels: object | None
    predictions_path: str
    labels_path: str | None = None
    batch_size: int = 256
    include_logits: bool = True
    scores: str = SCORES_LOGITS

    def __post_init__(self):
        if self.batch_size < 1:
            raise ExportError(f"batch size must be >= 1, got {self.batch_size}")
        if self.scores not in (SCORES_LOGITS, SCORES_PROBS):
            raise ExportError(f"scores must be 'logits' or 'probs', got {self.scores!r}")
        if self.scores == SCORES_PROBS and self.include_logits:
            raise ExportError("a probability-emitting model has no logits to include")
        if self.labels_path is not None and self.labels is None:
            raise ExportError("labels_path given but the job has no labels")


def resolve_model(spec):
    """A callable as-is, or import "package.module:attr"."""
    if callable(spec):
        return spec
    if isinstance(spec, str) and ":" in spec:
        module_name, attr = spec.split(":", 1)
        module = importlib.import_module(module_name)
        try:
            fn = getattr(module, attr)
        except AttributeError:
            raise ExportError(f"{module_name!r} has no attribute {attr!r}") from None
        if not callable(fn):
            raise ExportError(f"{spec!r} is not callable")
        return fn
    raise ExportError(f"model must be callable or 'module:attr', got {spec!r}")


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def run_model(job: ExportJob) -> tuple[np.ndarray, np.ndarray | None]:
    """Batch the samples through the model; returns (probs, logits)."""
    model = resolve_model(job.model)
    samples = np.asarray(job.samples)
    if samples.shape[0] < 1:
        raise ExportError("empty sample set")
    chunks = []
    for start in range(0, samples.shape[0], job.batch_size):
        out = np.asarray(model(samples[start : start + job.batch_size]), dtype=np.float64)
        if out.ndim != 2 or out.shape[0] != min(job.batch_size, samples.shape[0] - start):
            raise ExportError(
                f"model returned shape {out.shape} for a batch of "
                f"{min(job.batch_size, samples.shape[0] - start)}"
            )
        chunks.append(out)
    scores = np.vstack(chunks)
    if not np.all(np.isfinite(scores)):
        raise ExportError("model produced non-finite scores")
    widths = {c.shape[1] for c in chunks}
    if len(widths) != 1:
        raise ExportError(f"inconsistent class counts across batches: {sorted(widths)}")
    if job.scores == SCORES_PROBS:
        if np.any(scores < 0.0):
            raise ExportError("probability outputs must be nonnegative")
        return scores, None
    logits = scores
    return softmax(logits), logits if job.include_logits else None


def export(job: ExportJob) -> dict:
    """Run the job, write the files, and return the manifest fragment.

    The fragment maps straight into a divshift manifest's "models" entry
    (plus a "labels" entry when labels were written).
    """
    probs, logits = run_model(job)
    n, k = probs.shape
    if job.labels is not None:
        labels = np.asarray(job.labels)
        if labels.shape != (n,):
            raise ExportError(f"{n} samples but labels shape {labels.shape}")
        if np.any(labels < 0) or np.any(labels >= k):
            raise ExportError(f"labels outside [0, {k})")
    write_prediction_file(job.predictions_path, probs, logits)
    fragment = {
        "model": {"id": job.model_id, "predictions": {job.split_id: str(job.predictions_path)}},
        "n": int(n),
        "k": int(k),
        "logits": logits is not None,
    }
    if job.labels_path is not None:
        write_label_file(job.labels_path, job.labels)
        fragment["labels"] = {job.split_id: str(job.labels_path)}
    return fragment


def fragment_to_json(fragment: dict) -> str:
    return json.dumps(fragment, indent=2, sort_keys=True)


def load_dataset(path):
    """Samples (and labels, when present) from an .npz or .npy file.

    .npz files use array "x" for samples and optional "y" for labels;
    .npy files hold samples only.
    """
    path = Path(path)
    if not path.is_file():
        raise ExportError(f"dataset not found: {path}")
    if path.suffix == ".npz":
        with np.load(path) as data:
            if "x" not in data:
                raise ExportError(f"{path}: .npz dataset needs an 'x' array")
            return data["x"], data["y"] if "y" in data else None
    if path.suffix == ".npy":
        return np.load(path), None
    raise ExportError(f"unsupported dataset format {path.suffix!r} (use .npz or .npy)")
