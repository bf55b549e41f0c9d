"""Class-aggregated calibration error (CACE).

For every class k and every equal-width confidence bin, CACE accumulates the
absolute gap between the mean predicted probability of class k and the
empirical frequency of class k, weighted by the bin's share of samples, then
sums over classes. Each class contributes its full mass, so the value lives
in [0, K], not [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LabelVector, PredictionSet, ShapeMismatch, ValidationError


@dataclass(frozen=True)
class CalibrationConfig:
    """Equal-width binning over [0, 1]."""

    n_bins: int = 15

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValidationError(f"n_bins must be >= 2, got {self.n_bins}")


DEFAULT_CALIBRATION = CalibrationConfig()


def cace(pred: PredictionSet, labels: LabelVector, config: CalibrationConfig | None = None) -> float:
    """Class-aggregated calibration error of one model on one split.

    Bin b of class k collects samples whose predicted probability for k
    falls in [b/B, (b+1)/B), with the last bin closed. Empty bins contribute
    nothing. Bin sums use exact summation, so the value is independent of
    sample order and of dataset duplication.
    """
    cfg = config or DEFAULT_CALIBRATION
    if len(labels) != pred.n_samples:
        raise ShapeMismatch(
            f"{pred.n_samples} rows but {len(labels)} labels on split {pred.split_id!r}"
        )
    n, k = pred.probs.shape
    nbins = cfg.n_bins
    y = labels.labels
    total = 0.0
    for cls in range(k):
        conf = pred.probs[:, cls]
        bins = np.minimum((conf * nbins).astype(np.int64), nbins - 1)
        hits = (y == cls)
        for b in np.unique(bins):
            mask = bins == b
            count = int(mask.sum())
            mean_conf = math.fsum(conf[mask]) / count
            freq = math.fsum(hits[mask].astype(np.float64)) / count
            total += (count / n) * abs(mean_conf - freq)
    return total


def ensemble_cace(
    predictions, labels: LabelVector, config: CalibrationConfig | None = None
) -> float:
    """Arithmetic mean of per-model CACE over an ensemble."""
    preds = list(predictions)
    if not preds:
        raise ValidationError("ensemble_cace needs at least one model")
    return math.fsum(cace(p, labels, config) for p in preds) / len(preds)
