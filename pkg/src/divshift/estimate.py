"""Unlabeled OOD test-error estimation from disagreement line fits.

Two estimators are provided. The simple one extrapolates the fitted
ID-to-OOD disagreement line with each model's ID error. The direct one
additionally constrains each pair of models with its observed OOD
disagreement: unknown (transformed) OOD errors v_i are solved in least
squares from one equation per pair, (v_i + v_j) / 2 = T(Dis_OOD(i, j)),
plus one anchored equation per model, v_i = a T(err_ID_i) + b, weighted by
``alined_anchor_weight``. As that weight grows the direct method collapses
onto the simple one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import ShapeMismatch, SingularFit, ValidationError, ZeroTruth
from .divergence import Notion
from .linefit import LineFit, TransformKind, apply_transform, invert_transform


class Method(enum.Enum):
    ALINE_S = "aline-s"
    ALINE_D = "aline-d"

    @classmethod
    def from_name(cls, name: str) -> "Method":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown method {name!r}") from None


@dataclass(frozen=True)
class EstimationConfig:
    notion: Notion
    transform: TransformKind = TransformKind.IDENTITY
    method: Method = Method.ALINE_S
    r2_gate: float = 0.95
    alined_anchor_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.r2_gate <= 1.0:
            raise ValidationError(f"r2_gate must be in (0, 1], got {self.r2_gate}")
        if self.alined_anchor_weight <= 0.0:
            raise ValidationError(
                f"alined_anchor_weight must be positive, got {self.alined_anchor_weight}"
            )


@dataclass(frozen=True)
class EstimateRow:
    model_id: str
    estimate: float
    true_error: float | None = None
    clamped: bool = False


@dataclass(frozen=True)
class EstimationReport:
    """Per-model OOD error estimates for one (split, notion, method)."""

    split_id: str
    notion: Notion
    method: Method
    fit: LineFit
    rows: tuple[EstimateRow, ...]
    mape: float | None = None
    gated: bool = False

    def __post_init__(self):
        for row in self.rows:
            if not math.isfinite(row.estimate):
                raise ValidationError(f"non-finite estimate for model {row.model_id!r}")


def clamp_to_notion_range(notion: Notion, values):
    """Clip estimates into the notion's valid range; flags what was clipped."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = 0.0, notion.bound
    clamped = (v < lo) | (v > hi)
    return np.clip(v, lo, hi if math.isfinite(hi) else None), clamped


def _aline_s_raw(fit: LineFit, id_errors) -> np.ndarray:
    notion = _fit_notion(fit)
    errs = np.asarray(id_errors, dtype=np.float64)
    return np.array(
        [
            invert_transform(fit.transform, notion, fit.predict(apply_transform(fit.transform, notion, e)))
            for e in errs
        ]
    )


def aline_s(fit: LineFit, id_errors) -> np.ndarray:
    """Extrapolate the disagreement line with each model's ID error.

    estimate_i = T^-1(a * T(err_ID_i) + b), clamped to the notion's range.
    """
    est, _ = clamp_to_notion_range(_fit_notion(fit), _aline_s_raw(fit, id_errors))
    return est


def _aline_d_raw(
    fit: LineFit,
    model_ids: Sequence[str],
    id_errors,
    pairs: Sequence[tuple[str, str]],
    ood_pair_disagreements,
    config: EstimationConfig,
) -> np.ndarray:
    notion = _fit_notion(fit)
    ids = list(model_ids)
    errs = np.asarray(id_errors, dtype=np.float64)
    dis = np.asarray(ood_pair_disagreements, dtype=np.float64)
    if errs.shape[0] != len(ids):
        raise ShapeMismatch(f"{len(ids)} models but {errs.shape[0]} ID errors")
    if dis.shape[0] != len(pairs):
        raise ShapeMismatch(f"{len(pairs)} pairs but {dis.shape[0]} OOD disagreements")
    index = {m: i for i, m in enumerate(ids)}
    w = config.alined_anchor_weight
    covered = set()
    rows = []
    rhs = []
    for (ma, mb), d in zip(pairs, dis):
        if ma not in index or mb not in index:
            raise ValidationError(f"pair ({ma!r}, {mb!r}) references an unknown model")
        r = np.zeros(len(ids))
        r[index[ma]] = 0.5
        r[index[mb]] = 0.5
        rows.append(r)
        rhs.append(apply_transform(fit.transform, notion, float(d)))
        covered.add(ma)
        covered.add(mb)
    if w == 0.0 and covered != set(ids):
        missing = sorted(set(ids) - covered)
        raise ValidationError(f"models {missing} appear in no pair and anchor weight is 0")
    for i, m in enumerate(ids):
        r = np.zeros(len(ids))
        r[i] = w
        rows.append(r)
        rhs.append(w * fit.predict(apply_transform(fit.transform, notion, float(errs[i]))))
    a = np.asarray(rows)
    b = np.asarray(rhs)
    solution, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < len(ids):
        raise SingularFit("ALine-D normal system is rank deficient")
    return np.array([invert_transform(fit.transform, notion, float(v)) for v in solution])


def aline_d(
    fit: LineFit,
    model_ids: Sequence[str],
    id_errors,
    pairs: Sequence[tuple[str, str]],
    ood_pair_disagreements,
    config: EstimationConfig,
) -> np.ndarray:
    """Least-squares estimates that also match observed OOD pair disagreement.

    Every model must appear in at least one pair or carry a positive anchor
    weight, otherwise the system is underdetermined.
    """
    raw = _aline_d_raw(fit, model_ids, id_errors, pairs, ood_pair_disagreements, config)
    est, _ = clamp_to_notion_range(_fit_notion(fit), raw)
    return est


def build_estimation_report(
    fit: LineFit,
    model_ids: Sequence[str],
    id_errors,
    pairs: Sequence[tuple[str, str]],
    ood_pair_disagreements,
    config: EstimationConfig,
    *,
    split_id: str,
    estimated_ids: Sequence[str] | None = None,
    true_errors: Mapping[str, float] | None = None,
    gated: bool = False,
) -> EstimationReport:
    """Run the configured estimator and assemble the per-model report.

    ``estimated_ids`` restricts the reported models (anchor pairing drops
    the anchor); MAPE is filled in iff ``true_errors`` is given.
    """
    if config.method is Method.ALINE_D:
        raw = _aline_d_raw(fit, model_ids, id_errors, pairs, ood_pair_disagreements, config)
    else:
        raw = _aline_s_raw(fit, id_errors)
    estimates, clamped = clamp_to_notion_range(_fit_notion(fit), raw)
    by_model = dict(zip(model_ids, zip(estimates, clamped)))
    report_ids = list(estimated_ids if estimated_ids is not None else model_ids)
    rows = tuple(
        EstimateRow(
            model_id=m,
            estimate=float(by_model[m][0]),
            true_error=None if true_errors is None else float(true_errors[m]),
            clamped=bool(by_model[m][1]),
        )
        for m in report_ids
    )
    value = None
    if true_errors is not None:
        value = mape([r.estimate for r in rows], [r.true_error for r in rows])
    return EstimationReport(
        split_id=split_id,
        notion=config.notion,
        method=config.method,
        fit=fit,
        rows=rows,
        mape=value,
        gated=gated,
    )


def mape(estimates, truths) -> float:
    """Mean absolute percentage error, in percent."""
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truths, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 1:
        raise ShapeMismatch(f"shape mismatch: {est.shape} vs {tru.shape}")
    if est.size == 0:
        raise ValidationError("mape of empty vectors")
    if np.any(tru <= 0.0):
        raise ZeroTruth("true errors must be positive for MAPE")
    return 100.0 * float(np.mean(np.abs(est - tru) / tru))


def gate_by_r2(
    fits_by_split: Mapping[str, Mapping[Notion, LineFit]],
    r2_gate: float,
    notions: Sequence[Notion],
) -> list[str]:
    """Splits whose agreement-line R-squared clears the gate for every notion."""
    admitted = []
    for split in fits_by_split:
        fits = fits_by_split[split]
        for notion in notions:
            if notion not in fits:
                raise ValidationError(f"split {split!r} has no fit for notion {notion.value}")
        if min(fits[n].r2 for n in notions) > r2_gate:
            admitted.append(split)
    return admitted


def _fit_notion(fit: LineFit) -> Notion:
    if fit.notion is None:
        raise ValidationError("fit carries no notion; estimation needs the notion's range")
    if fit.transform is TransformKind.PROBIT and not fit.notion.bounded:
        raise ValidationError(f"probit fit is invalid for unbounded notion {fit.notion.value}")
    return fit.notion
