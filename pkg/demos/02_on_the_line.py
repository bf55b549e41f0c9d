"""Agreement-on-the-line and unlabeled OOD error estimation, end to end.

Generates a synthetic ensemble whose splits degrade with severity, fits the
ID-vs-OOD disagreement line per notion, and uses it to estimate each model's
OOD error without touching OOD labels. The labels exist here, so we can
score the estimates with MAPE afterwards.
"""

import itertools

import numpy as np

from divshift import (
    EstimationConfig,
    Method,
    Notion,
    SynthConfig,
    aggregate_disagreement,
    aggregate_error,
    build_estimation_report,
    generate_world,
    ols_fit,
)

world = generate_world(SynthConfig(n_models=12, n_samples=1500, seed=202))
ids = world.model_ids
pairs = list(itertools.combinations(ids, 2))
id_split, ood_split = "sev1", "sev2"
labels = {s: world.label_vector(s) for s in (id_split, ood_split)}

print(f"{len(ids)} models, {len(pairs)} pairs, ID={id_split}, OOD={ood_split}\n")
print(f"{'notion':<8}{'agree R2':>10}{'acc R2':>10}{'slope':>9}{'intercept':>11}")

fits = {}
for notion in Notion:
    dis_id = [
        aggregate_disagreement(notion, world.predictions[(a, id_split)],
                               world.predictions[(b, id_split)]).value
        for a, b in pairs
    ]
    dis_ood = [
        aggregate_disagreement(notion, world.predictions[(a, ood_split)],
                               world.predictions[(b, ood_split)]).value
        for a, b in pairs
    ]
    fits[notion] = ols_fit(dis_id, dis_ood, notion=notion)
    err_id = [aggregate_error(notion, world.predictions[(m, id_split)], labels[id_split]) for m in ids]
    err_ood = [aggregate_error(notion, world.predictions[(m, ood_split)], labels[ood_split]) for m in ids]
    acc_fit = ols_fit(err_id, err_ood)
    f = fits[notion]
    print(f"{notion.value:<8}{f.r2:>10.4f}{acc_fit.r2:>10.4f}{f.slope:>9.3f}{f.intercept:>11.4f}")

# Estimate OOD error from the agreement line plus ID errors only, then
# reveal the held-back OOD labels to score the estimates.
print("\nMAPE (%) of unlabeled OOD error estimates:")
print(f"{'notion':<8}{'aline-s':>10}{'aline-d':>10}")
for notion in Notion:
    err_id = np.array(
        [aggregate_error(notion, world.predictions[(m, id_split)], labels[id_split]) for m in ids]
    )
    truths = {
        m: aggregate_error(notion, world.predictions[(m, ood_split)], labels[ood_split]) for m in ids
    }
    dis_ood = [
        aggregate_disagreement(notion, world.predictions[(a, ood_split)],
                               world.predictions[(b, ood_split)]).value
        for a, b in pairs
    ]
    cells = []
    for method in (Method.ALINE_S, Method.ALINE_D):
        config = EstimationConfig(notion=notion, method=method)
        report = build_estimation_report(
            fits[notion], ids, err_id, pairs, dis_ood, config,
            split_id=ood_split, true_errors=truths,
        )
        cells.append(report.mape)
    print(f"{notion.value:<8}{cells[0]:>10.2f}{cells[1]:>10.2f}")

print("\n(aline-d leans on the raw pair disagreement level; when that level")
print("sits away from the error level its estimates degrade, which is the")
print("reason anchor-mode manifests default to aline-s.)")
