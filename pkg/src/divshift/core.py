"""Shared domain types, validation, and model-pairing logic.

Everything here is immutable after construction; instances can be shared
freely across worker threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

ROW_SUM_TOL = 1e-4
# Rows whose sum is already this close to 1 are left untouched so that
# renormalization is a fixed point (validate twice == validate once).
RENORM_SKIP_TOL = 1e-9

PAIRING_ALL_PAIRS = "all-pairs"
PAIRING_ANCHOR = "anchor"


class ValidationError(Exception):
    """Bad input data or configuration. CLI exit code 1."""


class NumericalError(Exception):
    """A computation could not be carried out. CLI exit code 2."""


class RowSumViolation(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass


class EmptyLabels(ValidationError):
    pass


class ZeroTruth(ValidationError):
    pass


class ManifestError(ValidationError):
    pass


class DegenerateAbscissa(NumericalError):
    pass


class SingularFit(NumericalError):
    pass


def _frozen_array(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PredictionSet:
    """Per-sample class probabilities of one model on one dataset split.

    ``probs`` is an N x K row-stochastic matrix; ``logits``, when present,
    has the same shape. Use :func:`validate_prediction_set` to build a
    checked, renormalized instance from raw data.
    """

    model_id: str
    split_id: str
    probs: np.ndarray
    logits: np.ndarray | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise ShapeMismatch(f"probs must be a nonempty 2-D matrix, got shape {probs.shape}")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if self.logits is not None:
            logits = np.asarray(self.logits, dtype=np.float64)
            if logits.shape != probs.shape:
                raise ShapeMismatch(
                    f"logits shape {logits.shape} does not match probs shape {probs.shape}"
                )
            logits = logits.copy()
            logits.setflags(write=False)
            object.__setattr__(self, "logits", logits)

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class LabelVector:
    """Ground-truth class indices for one split."""

    split_id: str
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ShapeMismatch(f"labels must be 1-D, got shape {labels.shape}")
        if labels.size == 0:
            raise EmptyLabels(f"empty label vector for split {self.split_id!r}")
        object.__setattr__(self, "labels", _frozen_array(labels, np.int64))

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class Pairing:
    """Which model pairs disagreement is computed for."""

    mode: str
    anchor: str | None = None

    def __post_init__(self):
        if self.mode not in (PAIRING_ALL_PAIRS, PAIRING_ANCHOR):
            raise ValidationError(f"unknown pairing mode {self.mode!r}")
        if self.mode == PAIRING_ANCHOR and not self.anchor:
            raise ValidationError("anchor pairing requires an anchor model id")
        if self.mode == PAIRING_ALL_PAIRS and self.anchor is not None:
            raise ValidationError("all-pairs pairing takes no anchor")

    @staticmethod
    def all_pairs() -> "Pairing":
        return Pairing(PAIRING_ALL_PAIRS)

    @staticmethod
    def with_anchor(model_id: str) -> "Pairing":
        return Pairing(PAIRING_ANCHOR, model_id)


@dataclass(frozen=True)
class EnsembleManifest:
    """Describes one evaluation run: splits, models, prediction files, labels.

    ``models`` maps are ordered; anchor pairing preserves that order.
    Label files are optional per split (estimation works without OOD labels,
    MAPE reporting does not).
    """

    k: int
    id_split: str
    ood_splits: tuple[str, ...]
    models: tuple[tuple[str, Mapping[str, str]], ...]
    pairing: Pairing
    labels: Mapping[str, str] = field(default_factory=dict)
    options: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 2:
            raise ManifestError(f"k must be >= 2, got {self.k}")
        ids = [m for m, _ in self.models]
        if len(set(ids)) != len(ids):
            raise ManifestError("duplicate model ids in manifest")
        for name in ids + list(self.splits):
            # ids flow into CSV cells and "a|b" pair keys verbatim
            if not name or any(ch in name for ch in ",|\n"):
                raise ManifestError(f"invalid model/split id {name!r}")
        if self.id_split in self.ood_splits:
            raise ManifestError(f"id split {self.id_split!r} repeated in ood splits")
        if self.pairing.mode == PAIRING_ANCHOR and self.pairing.anchor not in ids:
            raise ManifestError(f"anchor model {self.pairing.anchor!r} not in model list")
        for model_id, paths in self.models:
            for split in self.splits:
                if split not in paths:
                    raise ManifestError(f"model {model_id!r} has no predictions for split {split!r}")

    @property
    def splits(self) -> tuple[str, ...]:
        return (self.id_split,) + tuple(self.ood_splits)

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.models)

    @property
    def estimated_model_ids(self) -> tuple[str, ...]:
        """Models whose OOD error gets estimated (anchor excluded)."""
        if self.pairing.mode == PAIRING_ANCHOR:
            return tuple(m for m in self.model_ids if m != self.pairing.anchor)
        return self.model_ids

    def severity_of(self, split_id: str) -> int | None:
        """Severity level of a split: explicit manifest override, else the
        trailing integer of the split id, else None."""
        overrides = self.options.get("severity", {}) if self.options else {}
        if split_id in overrides:
            return int(overrides[split_id])
        digits = ""
        for ch in reversed(split_id):
            if ch.isdigit():
                digits = ch + digits
            else:
                break
        return int(digits) if digits else None


def enumerate_pairs(manifest: EnsembleManifest):
    """All model pairs to evaluate, in a deterministic order.

    All-pairs mode yields the M(M-1)/2 unordered pairs in lexicographic
    model-id order; anchor mode yields (anchor, m) for every other model m
    in manifest order.
    """
    ids = list(manifest.model_ids)
    if len(ids) < 2:
        raise ValidationError(f"need at least 2 models, got {len(ids)}")
    if manifest.pairing.mode == PAIRING_ANCHOR:
        anchor = manifest.pairing.anchor
        if anchor not in ids:
            raise ValidationError(f"anchor model {anchor!r} not in model list")
        return [(anchor, m) for m in ids if m != anchor]
    return list(itertools.combinations(sorted(ids), 2))


def validate_prediction_set(raw, k=None, *, model_id="", split_id="", logits=None) -> PredictionSet:
    """Check and renormalize a raw probability matrix.

    Rejects negative or non-finite entries and rows whose sum is farther
    than ROW_SUM_TOL from 1; accepted rows are renormalized by dividing by
    their sum. Renormalizing an already renormalized matrix is a no-op.
    """
    probs = np.asarray(raw, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeMismatch(f"expected an N x K matrix, got shape {probs.shape}")
    if k is not None and probs.shape[1] != k:
        raise ShapeMismatch(f"expected k={k} classes, file has {probs.shape[1]}")
    if not np.all(np.isfinite(probs)):
        bad = int(np.flatnonzero(~np.isfinite(probs).all(axis=1))[0])
        raise NonFinite(f"non-finite probability in row {bad}" + _where(model_id, split_id))
    if np.any(probs < 0.0):
        bad = int(np.flatnonzero((probs < 0.0).any(axis=1))[0])
        raise NonFinite(f"negative probability in row {bad}" + _where(model_id, split_id))
    sums = probs.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > ROW_SUM_TOL):
        bad = int(np.argmax(off))
        raise RowSumViolation(
            f"row {bad} sums to {sums[bad]:.6f}, outside 1 +/- {ROW_SUM_TOL}" + _where(model_id, split_id)
        )
    needs = off > RENORM_SKIP_TOL
    if np.any(needs):
        probs = probs.copy()
        probs[needs] /= sums[needs, None]
    return PredictionSet(model_id=model_id, split_id=split_id, probs=probs, logits=logits)


def validate_labels(labels, k, n=None, *, split_id="") -> LabelVector:
    """Check label values against the class count (and optionally length)."""
    vec = labels if isinstance(labels, LabelVector) else LabelVector(split_id=split_id, labels=labels)
    arr = vec.labels
    if n is not None and arr.shape[0] != n:
        raise ShapeMismatch(f"expected {n} labels for split {vec.split_id!r}, got {arr.shape[0]}")
    if np.any(arr < 0) or np.any(arr >= k):
        bad = int(np.flatnonzero((arr < 0) | (arr >= k))[0])
        raise LabelOutOfRange(
            f"label {arr[bad]} at row {bad} outside [0, {k}) for split {vec.split_id!r}"
        )
    return vec


def one_hot(y: int, k: int) -> np.ndarray:
    v = np.zeros(k, dtype=np.float64)
    v[y] = 1.0
    return v


def _where(model_id, split_id):
    if model_id or split_id:
        return f" (model={model_id!r}, split={split_id!r})"
    return ""
