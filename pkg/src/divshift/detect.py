"""Per-sample OOD scoring and ROC-AUC evaluation of ID/OOD separation.

Scores follow the convention "higher means more out-of-distribution":
negated max softmax probability, negated max logit, or the pointwise
disagreement of a model pair under any notion. AUC uses midranks, so tied
scores are handled exactly and the complement identity
``roc_auc(a, b) + roc_auc(b, a) == 1`` holds bitwise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import PredictionSet, ShapeMismatch, ValidationError
from .divergence import EpsilonPolicy, Notion, pointwise_disagreement

KIND_NEG_MSP = "neg-msp"
KIND_NEG_MAXLOGIT = "neg-maxlogit"
KIND_PAIR = "pair"


@dataclass(frozen=True)
class ScoreKind:
    """An OOD score family: a single-model baseline or a pair disagreement."""

    kind: str
    notion: Notion | None = None

    def __post_init__(self):
        if self.kind not in (KIND_NEG_MSP, KIND_NEG_MAXLOGIT, KIND_PAIR):
            raise ValidationError(f"unknown score kind {self.kind!r}")
        if self.kind == KIND_PAIR and self.notion is None:
            raise ValidationError("pair disagreement scores need a notion")
        if self.kind != KIND_PAIR and self.notion is not None:
            raise ValidationError(f"{self.kind} takes no notion")

    @staticmethod
    def neg_msp() -> "ScoreKind":
        return ScoreKind(KIND_NEG_MSP)

    @staticmethod
    def neg_maxlogit() -> "ScoreKind":
        return ScoreKind(KIND_NEG_MAXLOGIT)

    @staticmethod
    def pair(notion: Notion) -> "ScoreKind":
        return ScoreKind(KIND_PAIR, notion)

    @classmethod
    def parse(cls, name: str) -> "ScoreKind":
        s = name.strip().lower()
        if s == KIND_NEG_MSP:
            return cls.neg_msp()
        if s == KIND_NEG_MAXLOGIT:
            return cls.neg_maxlogit()
        if s.startswith("pair-"):
            return cls.pair(Notion.from_name(s[len("pair-"):]))
        raise ValidationError(
            f"unknown score kind {name!r}; expected neg-msp, neg-maxlogit, or pair-<notion>"
        )

    @property
    def name(self) -> str:
        if self.kind == KIND_PAIR:
            return f"pair-{self.notion.value}"
        return self.kind

    @property
    def needs_pair(self) -> bool:
        return self.kind == KIND_PAIR

    @property
    def needs_logits(self) -> bool:
        return self.kind == KIND_NEG_MAXLOGIT


DEFAULT_SCORE_KINDS = (
    ScoreKind.neg_msp(),
    ScoreKind.neg_maxlogit(),
    ScoreKind.pair(Notion.TOP1),
    ScoreKind.pair(Notion.HD),
    ScoreKind.pair(Notion.JSD),
    ScoreKind.pair(Notion.KLD),
)


@dataclass(frozen=True)
class DetectionResult:
    """AUC of one scorer separating one OOD split from the ID split."""

    score_kind: ScoreKind
    subject: str
    id_split: str
    ood_split: str
    auc: float
    n_id: int
    n_ood: int

    def __post_init__(self):
        if not 0.0 <= self.auc <= 1.0:
            raise ValidationError(f"auc {self.auc} outside [0, 1]")


def sample_score(kind: ScoreKind, row_p, row_q=None, row_logits=None) -> float:
    """Score a single sample; higher means more OOD."""
    p = np.asarray(row_p, dtype=np.float64)
    if kind.kind == KIND_NEG_MSP:
        return float(-p.max())
    if kind.kind == KIND_NEG_MAXLOGIT:
        if row_logits is None:
            raise ValidationError("neg-maxlogit needs logits")
        return float(-np.asarray(row_logits, dtype=np.float64).max())
    if row_q is None:
        raise ValidationError("pair disagreement needs a second model's row")
    return float(pointwise_disagreement(kind.notion, p, np.asarray(row_q, dtype=np.float64))[0])


def score_samples(
    kind: ScoreKind,
    pred: PredictionSet,
    other: PredictionSet | None = None,
    eps_policy: EpsilonPolicy | None = None,
) -> np.ndarray:
    """Per-sample scores for a whole prediction set."""
    if kind.kind == KIND_NEG_MSP:
        return -pred.probs.max(axis=1)
    if kind.kind == KIND_NEG_MAXLOGIT:
        if pred.logits is None:
            raise ValidationError(f"model {pred.model_id!r} has no logits for neg-maxlogit")
        return -pred.logits.max(axis=1)
    if other is None:
        raise ValidationError("pair disagreement needs two prediction sets")
    if pred.probs.shape != other.probs.shape:
        raise ShapeMismatch(
            f"shape mismatch: {pred.probs.shape} vs {other.probs.shape}"
        )
    return pointwise_disagreement(kind.notion, pred.probs, other.probs, eps_policy)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    n = values.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # 1-based midrank
        i = j + 1
    return ranks


def roc_auc(id_scores, ood_scores) -> float:
    """Probability that a random OOD score outranks a random ID score,
    counting ties as one half (the Mann-Whitney statistic)."""
    s_id = np.asarray(id_scores, dtype=np.float64)
    s_ood = np.asarray(ood_scores, dtype=np.float64)
    if s_id.ndim != 1 or s_ood.ndim != 1:
        raise ShapeMismatch("scores must be 1-D vectors")
    if s_id.size == 0 or s_ood.size == 0:
        raise ValidationError("roc_auc needs nonempty score vectors on both sides")
    ranks = _midranks(np.concatenate([s_id, s_ood]))
    n_id, n_ood = s_id.size, s_ood.size
    # Midrank sums are exact in binary (halves only), so u is exact.
    u = ranks[n_id:].sum() - n_ood * (n_ood + 1) / 2.0
    return u / (n_ood * n_id)


def severity_from_split(split_id: str, overrides: Mapping[str, int] | None = None) -> int | None:
    """Severity of a split: explicit override, else the trailing integer of
    the split id, else None."""
    if overrides and split_id in overrides:
        return int(overrides[split_id])
    digits = ""
    for ch in reversed(split_id):
        if ch.isdigit():
            digits = ch + digits
        else:
            break
    return int(digits) if digits else None


def detection_suite(
    predictions: Mapping[tuple[str, str], PredictionSet],
    id_split: str,
    ood_splits: Sequence[str],
    kinds: Sequence[ScoreKind],
    model_ids: Sequence[str],
    pairs: Sequence[tuple[str, str]],
    *,
    pooled: bool = False,
    severity_overrides: Mapping[str, int] | None = None,
    eps_policy: EpsilonPolicy | None = None,
    workers: int = 1,
):
    """AUC table over (score kind x subject x OOD split) plus aggregates.

    Subjects are single models for the baselines and model pairs for
    disagreement scores. With ``pooled`` the per-sample scores are averaged
    over subjects first, yielding one AUC per (kind, split). Aggregates are
    the mean AUC per (kind, split) and, for splits with a severity, the mean
    of those split means per (kind, severity).

    Returns (results, split_means, severity_means) where the means are
    dicts keyed by (kind name, split) and (kind name, severity).
    """

    def subjects_for(kind: ScoreKind):
        if kind.needs_pair:
            return [(f"{a}|{b}", (a, b)) for a, b in pairs]
        return [(m, (m,)) for m in model_ids]

    def score_vec(kind: ScoreKind, subject, split):
        if kind.needs_pair:
            a, b = subject
            return score_samples(kind, predictions[(a, split)], predictions[(b, split)], eps_policy)
        return score_samples(kind, predictions[(subject[0], split)], None, eps_policy)

    tasks = []
    for kind in kinds:
        for split in ood_splits:
            if pooled:
                tasks.append((kind, "__pooled__", None, split))
            else:
                for name, subject in subjects_for(kind):
                    tasks.append((kind, name, subject, split))

    def run(task):
        kind, name, subject, split = task
        if subject is None:  # pooled over subjects
            subs = [s for _, s in subjects_for(kind)]
            sid = np.mean([score_vec(kind, s, id_split) for s in subs], axis=0)
            sood = np.mean([score_vec(kind, s, split) for s in subs], axis=0)
        else:
            sid = score_vec(kind, subject, id_split)
            sood = score_vec(kind, subject, split)
        return DetectionResult(
            score_kind=kind,
            subject=name,
            id_split=id_split,
            ood_split=split,
            auc=roc_auc(sid, sood),
            n_id=sid.shape[0],
            n_ood=sood.shape[0],
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    split_means = {}
    for kind in kinds:
        for split in ood_splits:
            aucs = [r.auc for r in results if r.score_kind == kind and r.ood_split == split]
            split_means[(kind.name, split)] = float(np.mean(aucs))
    severity_means = {}
    for kind in kinds:
        by_sev = {}
        for split in ood_splits:
            sev = severity_from_split(split, severity_overrides)
            if sev is None:
                continue
            by_sev.setdefault(sev, []).append(split_means[(kind.name, split)])
        for sev in sorted(by_sev):
            severity_means[(kind.name, sev)] = float(np.mean(by_sev[sev]))
    return results, split_means, severity_means
