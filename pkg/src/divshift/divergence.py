"""Disagreement and error notions over categorical predictive distributions.

Four notions are implemented: top-1 (argmax mismatch), Hellinger distance,
Jensen-Shannon divergence, and symmetrized Kullback-Leibler divergence.
Each comes in three forms: a pointwise disagreement between two probability
rows, a pointwise error against an integer label, and a dataset-level mean.

All logarithms are natural, so the JSD ceiling is ln 2. Dataset means use
compensated (Kahan) summation in fixed row order; parallelism is only ever
applied across model pairs, never inside one reduction, so reports are
bit-stable regardless of worker count.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import LabelOutOfRange, LabelVector, PredictionSet, ShapeMismatch, ValidationError

LN2 = math.log(2.0)


class Notion(enum.Enum):
    TOP1 = "top1"
    HD = "hd"
    JSD = "jsd"
    KLD = "kld"

    @property
    def bound(self) -> float:
        """Least upper bound of the notion's value range."""
        return _BOUNDS[self]

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.bound)

    @classmethod
    def from_name(cls, name: str) -> "Notion":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown notion {name!r}; pick from {[n.value for n in cls]}") from None


_BOUNDS = {Notion.TOP1: 1.0, Notion.HD: 1.0, Notion.JSD: LN2, Notion.KLD: math.inf}

ALL_NOTIONS = (Notion.TOP1, Notion.HD, Notion.JSD, Notion.KLD)


@dataclass(frozen=True)
class EpsilonPolicy:
    """Floor used to keep KLD finite on zero-probability entries."""

    eps: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.eps < 1e-3):
            raise ValidationError(f"eps must be in (0, 1e-3), got {self.eps}")


DEFAULT_EPS = EpsilonPolicy()


@dataclass(frozen=True)
class DisagreementRecord:
    """Mean disagreement of one model pair on one split under one notion."""

    pair: tuple[str, str]
    split_id: str
    notion: Notion
    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= self.notion.bound):
            raise ValidationError(
                f"{self.notion.value} disagreement {self.value} outside [0, {self.notion.bound}]"
            )


# ---------------------------------------------------------------------------
# Row-wise kernels. Inputs are N x K matrices of validated probabilities;
# outputs are length-N vectors. Every kernel is written so that swapping the
# two arguments produces bitwise-identical results.


def _check_rows(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeMismatch(f"shape mismatch: {p.shape} vs {q.shape}")
    if p.shape[-1] < 2:
        raise ShapeMismatch(f"need at least 2 classes, got {p.shape[-1]}")
    return p, q


def pointwise_disagreement(notion: Notion, probs_a, probs_b, eps_policy: EpsilonPolicy | None = None):
    """Per-sample disagreement values for two aligned probability matrices."""
    p, q = _check_rows(np.atleast_2d(probs_a), np.atleast_2d(probs_b))
    eps = (eps_policy or DEFAULT_EPS).eps
    if notion is Notion.TOP1:
        # np.argmax returns the first maximal index, which is the required
        # lowest-class-index tie rule.
        return (p.argmax(axis=1) != q.argmax(axis=1)).astype(np.float64)
    if notion is Notion.HD:
        sq = ((np.sqrt(p) - np.sqrt(q)) ** 2).sum(axis=1)
        return np.minimum(np.sqrt(0.5 * sq), 1.0)
    if notion is Notion.JSD:
        m = 0.5 * (p + q)
        return np.minimum(0.5 * (_kl_rows_mixture(p, m) + _kl_rows_mixture(q, m)), LN2)
    if notion is Notion.KLD:
        pc = _clamp_rows(p, eps)
        qc = _clamp_rows(q, eps)
        return 0.5 * ((pc * np.log(pc / qc)).sum(axis=1) + (qc * np.log(qc / pc)).sum(axis=1))
    raise ValidationError(f"unknown notion {notion!r}")


def pointwise_error(notion: Notion, probs, labels, eps_policy: EpsilonPolicy | None = None):
    """Per-sample error values for a probability matrix against labels.

    Uses the closed forms of each notion specialized to a one-hot first
    argument; for HD and JSD these agree with
    ``pointwise_disagreement(notion, one_hot(y), p)``, for KLD the error is
    the plain forward term -ln p_y (not the symmetrized divergence).
    """
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels))
    if y.shape[0] != p.shape[0]:
        raise ShapeMismatch(f"{p.shape[0]} rows but {y.shape[0]} labels")
    if np.any(y < 0) or np.any(y >= p.shape[1]):
        raise LabelOutOfRange(f"label outside [0, {p.shape[1]})")
    eps = (eps_policy or DEFAULT_EPS).eps
    py = p[np.arange(p.shape[0]), y.astype(np.int64)]
    if notion is Notion.TOP1:
        return (p.argmax(axis=1) != y).astype(np.float64)
    if notion is Notion.HD:
        rest = np.maximum(1.0 - py, 0.0)  # sum over k != y of p_k, rows sum to 1
        return np.minimum(np.sqrt(0.5 * ((np.sqrt(py) - 1.0) ** 2 + rest)), 1.0)
    if notion is Notion.JSD:
        with np.errstate(divide="ignore", invalid="ignore"):
            mid = np.where(py > 0.0, py * np.log(2.0 * py / (1.0 + py)), 0.0)
        rest = np.maximum(1.0 - py, 0.0)
        return np.minimum(0.5 * (np.log(2.0 / (1.0 + py)) + mid + rest * LN2), LN2)
    if notion is Notion.KLD:
        return -np.log(np.maximum(py, eps)) + 0.0  # + 0.0 folds -0.0 into 0.0
    raise ValidationError(f"unknown notion {notion!r}")


def _kl_rows_mixture(p, m):
    # KL(p || m) with m a pointwise mixture that is positive wherever p is;
    # 0 * log 0 counts as 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0.0, p * np.log(p / m), 0.0)
    return t.sum(axis=1)


def _clamp_rows(p, eps):
    c = np.maximum(p, eps)
    return c / c.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Scalar convenience wrappers over single rows.


def dis_top1(p, q) -> float:
    """1.0 iff the argmax classes differ (ties break to the lowest index)."""
    return float(pointwise_disagreement(Notion.TOP1, p, q)[0])


def dis_hellinger(p, q) -> float:
    """Hellinger distance, a metric in [0, 1]."""
    return float(pointwise_disagreement(Notion.HD, p, q)[0])


def dis_jsd(p, q, eps_policy: EpsilonPolicy | None = None) -> float:
    """Jensen-Shannon divergence (natural log), in [0, ln 2]."""
    return float(pointwise_disagreement(Notion.JSD, p, q, eps_policy)[0])


def dis_kld_sym(p, q, eps_policy: EpsilonPolicy | None = None) -> float:
    """Mean of forward and reverse KL after clamping both rows to eps."""
    return float(pointwise_disagreement(Notion.KLD, p, q, eps_policy)[0])


def dis(notion: Notion, p, q, eps_policy: EpsilonPolicy | None = None) -> float:
    return float(pointwise_disagreement(notion, p, q, eps_policy)[0])


def error_pointwise(notion: Notion, p, y: int, eps_policy: EpsilonPolicy | None = None) -> float:
    """Error of a single prediction row against class index y."""
    return float(pointwise_error(notion, p, [y], eps_policy)[0])


# ---------------------------------------------------------------------------
# Dataset-level aggregation.


def compensated_mean(values) -> float:
    """Mean with exact compensated summation (Shewchuk's fsum).

    The sum is exactly rounded, so the result does not depend on element
    order and is identical across worker counts.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("mean of empty sequence")
    return math.fsum(values) / values.size


def aggregate_disagreement(
    notion: Notion,
    pred_a: PredictionSet,
    pred_b: PredictionSet,
    eps_policy: EpsilonPolicy | None = None,
) -> DisagreementRecord:
    """Mean pointwise disagreement of two prediction sets on one split."""
    if pred_a.split_id != pred_b.split_id:
        raise ShapeMismatch(
            f"split mismatch: {pred_a.split_id!r} vs {pred_b.split_id!r}"
        )
    if pred_a.probs.shape != pred_b.probs.shape:
        raise ShapeMismatch(
            f"shape mismatch on split {pred_a.split_id!r}: "
            f"{pred_a.probs.shape} vs {pred_b.probs.shape}"
        )
    values = pointwise_disagreement(notion, pred_a.probs, pred_b.probs, eps_policy)
    mean = compensated_mean(values)
    mean = min(max(mean, 0.0), notion.bound) if notion.bounded else max(mean, 0.0)
    return DisagreementRecord(
        pair=(pred_a.model_id, pred_b.model_id),
        split_id=pred_a.split_id,
        notion=notion,
        value=mean,
    )


def aggregate_error(
    notion: Notion,
    pred: PredictionSet,
    labels: LabelVector,
    eps_policy: EpsilonPolicy | None = None,
) -> float:
    """Mean pointwise error of a prediction set; for top-1 this equals
    1 minus top-1 accuracy."""
    if len(labels) != pred.n_samples:
        raise ShapeMismatch(
            f"{pred.n_samples} rows but {len(labels)} labels on split {pred.split_id!r}"
        )
    values = pointwise_error(notion, pred.probs, labels.labels, eps_policy)
    return compensated_mean(values)


# ---------------------------------------------------------------------------
# Grid generators behind the landscape and curve figures.

GRID_MODE_ANCHOR = "anchor"
GRID_MODE_ERROR = "error"

# Fixed reference distribution for the 3-class disagreement landscape.
DEFAULT_ANCHOR = (0.35, 0.325, 1.0 - 0.35 - 0.325)


def simplex_grid(
    notion: Notion,
    resolution: int,
    mode: str = GRID_MODE_ANCHOR,
    anchor=None,
    label: int = 0,
    eps_policy: EpsilonPolicy | None = None,
) -> np.ndarray:
    """Evaluate a notion over the 3-class probability simplex.

    Returns rows (p1, p2, value) for every grid point with step
    1/resolution and p1 + p2 <= 1; the third coordinate is 1 - p1 - p2.
    In anchor mode the value is the disagreement against ``anchor``
    (default DEFAULT_ANCHOR); in error mode the error for class ``label``.
    """
    if resolution < 2:
        raise ValidationError(f"resolution must be >= 2, got {resolution}")
    if mode not in (GRID_MODE_ANCHOR, GRID_MODE_ERROR):
        raise ValidationError(f"unknown grid mode {mode!r}")
    pts = []
    for i in range(resolution + 1):
        p1 = i / resolution
        for j in range(resolution + 1 - i):
            p2 = j / resolution
            pts.append((p1, p2, max(1.0 - p1 - p2, 0.0)))
    grid = np.array(pts, dtype=np.float64)
    if mode == GRID_MODE_ANCHOR:
        if anchor is None:
            anchor = DEFAULT_ANCHOR
        anchor = np.asarray(anchor, dtype=np.float64)
        if anchor.shape != (3,):
            raise ShapeMismatch("anchor must be a 3-class distribution")
        ref = np.broadcast_to(anchor, grid.shape)
        values = pointwise_disagreement(notion, grid, ref, eps_policy)
    else:
        if not 0 <= label < 3:
            raise ValidationError(f"label must be in [0, 3), got {label}")
        values = pointwise_error(notion, grid, np.full(grid.shape[0], label), eps_policy)
    return np.column_stack([grid[:, 0], grid[:, 1], values])


def binary_error_curve(
    notion: Notion, resolution: int, eps_policy: EpsilonPolicy | None = None
) -> np.ndarray:
    """Error of p = (t, 1-t) against y = 0 on a uniform t grid in [0, 1].

    Returns resolution + 1 rows (t, value). At t = 0 the KLD error hits the
    eps clamp instead of diverging.
    """
    if resolution < 2:
        raise ValidationError(f"resolution must be >= 2, got {resolution}")
    t = np.arange(resolution + 1, dtype=np.float64) / resolution
    probs = np.column_stack([t, 1.0 - t])
    values = pointwise_error(notion, probs, np.zeros(t.shape[0], dtype=np.int64), eps_policy)
    return np.column_stack([t, values])
