"""How miscalibration interacts with the on-the-line correlations.

Regenerates the same ensemble at several fixed temperatures. Sharper
temperatures (below 1) make every model overconfident, inflating the
class-aggregated calibration error; the ID-vs-OOD agreement correlation is
then tracked alongside. A cubic trend over (CACE, R^2) pairs is what the
`calibrate` subcommand exports for plotting.
"""

import itertools

from divshift import (
    Notion,
    SynthConfig,
    aggregate_disagreement,
    ensemble_cace,
    generate_world,
    ols_fit,
    polyfit3,
)

BASE = dict(n_models=10, n_samples=1000, n_classes=10, severities=(0.25, 0.6), seed=55)
temperatures = (0.3, 0.45, 0.7, 1.0, 1.4)

points = []
print(f"{'temperature':>12}{'ensemble CACE':>15}{'agreement R2 (hd)':>19}")
for temp in temperatures:
    world = generate_world(SynthConfig(temperature=(temp, temp), **BASE))
    ids = world.model_ids
    pairs = list(itertools.combinations(ids, 2))
    labels = world.label_vector("sev1")
    cace_value = ensemble_cace([world.predictions[(m, "sev1")] for m in ids], labels)
    dis_id = [
        aggregate_disagreement(Notion.HD, world.predictions[(a, "sev1")],
                               world.predictions[(b, "sev1")]).value
        for a, b in pairs
    ]
    dis_ood = [
        aggregate_disagreement(Notion.HD, world.predictions[(a, "sev2")],
                               world.predictions[(b, "sev2")]).value
        for a, b in pairs
    ]
    r2 = ols_fit(dis_id, dis_ood).r2
    points.append((cace_value, r2))
    print(f"{temp:>12.2f}{cace_value:>15.4f}{r2:>19.4f}")

coeffs = polyfit3([p[0] for p in points], [p[1] for p in points])
print("\ncubic trend R2 ~ f(CACE), ascending coefficients:")
print("  " + ", ".join(f"{c:+.4f}" for c in coeffs))
print("\nunit temperature sits closest to calibrated in this generator, so")
print("CACE is smallest there; both sharpening and flattening move the")
print("ensemble away from calibration.")
