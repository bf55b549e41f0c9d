import json

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)


def random_simplex(rng, n, k):
    """n uniform points on the k-simplex (normalized exponentials)."""
    e = rng.exponential(size=(n, k))
    return e / e.sum(axis=1, keepdims=True)


PLANTED_SLOPE = 1.7
PLANTED_INTERCEPT = 0.03


def write_planted_manifest(outdir):
    """A file-backed world whose ID-to-OOD metrics sit exactly on
    y = 1.7 x + 0.03 for every notion.

    All labels are class 0; wrong predictions are one-hot on class 1. Each
    model errs on a block shared by all models plus a private block, with
    private blocks disjoint across models, so pairwise top-1 disagreement is
    the sum of the two private fractions. Block sizes are chosen so both the
    agreement line and the accuracy line have slope 1.7 and intercept 0.03.
    """
    from divshift import PredictionSet, write_labels, write_predictions

    outdir.mkdir(parents=True, exist_ok=True)
    n, k = 2000, 3
    privates_id = [10, 20, 30, 40, 50, 60]
    common_id = 100
    privates_ood = [int(PLANTED_SLOPE * c + 0.015 * n) for c in privates_id]
    common_ood = int(PLANTED_SLOPE * common_id + 0.015 * n)

    def build(common, privates, index):
        wrong = np.zeros(n, dtype=bool)
        wrong[:common] = True
        start = common
        for i, width in enumerate(privates):
            if i == index:
                wrong[start : start + width] = True
            start += width
        probs = np.zeros((n, k))
        probs[wrong, 1] = 1.0
        probs[~wrong, 0] = 1.0
        return probs

    model_ids = [f"m{i + 1}" for i in range(len(privates_id))]
    models = []
    for i, mid in enumerate(model_ids):
        paths = {}
        for split, common, privates in (
            ("clean", common_id, privates_id),
            ("shift1", common_ood, privates_ood),
        ):
            pred = PredictionSet(
                model_id=mid, split_id=split, probs=build(common, privates, i)
            )
            path = outdir / f"{mid}_{split}.ddpm"
            write_predictions(pred, path)
            paths[split] = path.name
        models.append({"id": mid, "predictions": paths})
    write_labels(np.zeros(n, dtype=np.int64), outdir / "labels.csv")
    manifest = {
        "k": k,
        "id_split": "clean",
        "ood_splits": ["shift1"],
        "models": models,
        "pairing": {"mode": "all_pairs"},
        "labels": {"clean": "labels.csv", "shift1": "labels.csv"},
        "options": {},
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
