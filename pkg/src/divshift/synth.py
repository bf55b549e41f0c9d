"""Deterministic synthetic-ensemble generator.

Produces labeled worlds of prediction sets with controllable skill,
miscalibration (temperature), and shift severity, small enough to validate
every pipeline at desk scale.

The corruption model: for a sample with label y, model m with skill s_m and
temperature t_m sees the logit vector

    z = (s_m / (1 + sigma)) * onehot(y) + NOISE_SCALE * g,      g ~ N(0, I)

and reports logits z / t_m with probabilities softmax(z / t_m). Severity
sigma attenuates the class-evidence margin against a fixed-scale noise
field, so growing severity simultaneously raises error, lowers max-softmax
and max-logit scores, and inflates pairwise disagreement. NOISE_SCALE is
chosen so a unit-temperature model is roughly calibrated at mid skill,
which lets temperature sweeps steer calibration error in the expected
direction. Noise is drawn fresh per severity.

Generation is a pure function of (config, seed). Streams come from numpy's
PCG64 via SeedSequence(seed, spawn_key): (0,) labels, (1, m) model
parameters, (2, m, j) the noise of model m at severity index j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import LabelVector, PredictionSet, Pairing, EnsembleManifest, ValidationError

NOISE_SCALE = 3.0
GENERATOR_NAME = "numpy-pcg64-seedsequence/v1"


@dataclass(frozen=True)
class SynthConfig:
    n_models: int = 20
    n_samples: int = 2000
    n_classes: int = 10
    skill: tuple[float, float] = (7.0, 13.0)
    temperature: tuple[float, float] = (0.8, 1.2)
    severities: tuple[float, ...] = (0.25, 0.4, 0.8, 1.3, 1.9)
    seed: int = 123

    def __post_init__(self):
        object.__setattr__(self, "skill", tuple(float(v) for v in self.skill))
        object.__setattr__(self, "temperature", tuple(float(v) for v in self.temperature))
        object.__setattr__(self, "severities", tuple(float(v) for v in self.severities))
        if self.n_models < 1 or self.n_samples < 1 or self.n_classes < 2:
            raise ValidationError("need n_models >= 1, n_samples >= 1, n_classes >= 2")
        if len(self.skill) != 2 or not 0.0 < self.skill[0] <= self.skill[1]:
            raise ValidationError(f"skill range must be 0 < lo <= hi, got {self.skill}")
        if len(self.temperature) != 2 or not 0.0 < self.temperature[0] <= self.temperature[1]:
            raise ValidationError(f"temperature range must be 0 < lo <= hi, got {self.temperature}")
        if not self.severities:
            raise ValidationError("need at least one severity")
        if any(s < 0.0 for s in self.severities):
            raise ValidationError(f"severities must be >= 0, got {self.severities}")


@dataclass(frozen=True)
class SynthWorld:
    """Labels plus one prediction set per (model, severity split).

    Split ids are sev1..sevS in severity order; by convention the first
    severity plays the in-distribution role when a manifest is written.
    """

    config: SynthConfig
    split_ids: tuple[str, ...]
    labels: np.ndarray
    predictions: Mapping[tuple[str, str], PredictionSet]
    model_params: Mapping[str, tuple[float, float]]

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.model_params))

    def label_vector(self, split_id: str) -> LabelVector:
        return LabelVector(split_id=split_id, labels=self.labels)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def model_id_for(index: int, n_models: int) -> str:
    width = max(2, len(str(n_models)))
    return f"m{index + 1:0{width}d}"


def generate_world(config: SynthConfig) -> SynthWorld:
    """Generate the world; identical (config, seed) give identical bytes."""
    n, k = config.n_samples, config.n_classes
    labels = _stream(config.seed, 0).integers(0, k, size=n)
    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0
    split_ids = tuple(f"sev{j + 1}" for j in range(len(config.severities)))
    params = {}
    predictions = {}
    for m in range(config.n_models):
        rng = _stream(config.seed, 1, m)
        skill = float(rng.uniform(*config.skill))
        temp = float(rng.uniform(*config.temperature))
        model_id = model_id_for(m, config.n_models)
        params[model_id] = (skill, temp)
        for j, sigma in enumerate(config.severities):
            g = _stream(config.seed, 2, m, j).standard_normal((n, k))
            z = (skill / (1.0 + sigma)) * onehot + NOISE_SCALE * g
            logits = z / temp
            predictions[(model_id, split_ids[j])] = PredictionSet(
                model_id=model_id,
                split_id=split_ids[j],
                probs=_softmax(logits),
                logits=logits,
            )
    return SynthWorld(
        config=config,
        split_ids=split_ids,
        labels=labels,
        predictions=predictions,
        model_params=params,
    )


def write_world(world: SynthWorld, outdir, *, force: bool = False) -> str:
    """Write prediction files, a shared labels CSV, and a manifest.

    Returns the manifest path. Paths inside the manifest are relative to
    the output directory. Refuses to overwrite existing files unless forced.
    """
    from . import io as dio
    from pathlib import Path

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    pred_paths = {}
    for (mid, split), pred in world.predictions.items():
        pred_paths[(mid, split)] = f"{mid}_{split}.ddpm"
    label_paths = {split: "labels.csv" for split in world.split_ids}
    targets = sorted(set(pred_paths.values())) + ["labels.csv", "manifest.json"]
    if not force:
        for name in targets:
            if (out / name).exists():
                raise ValidationError(f"{out / name} exists; pass force to overwrite")
    for (mid, split), name in pred_paths.items():
        dio.write_predictions(world.predictions[(mid, split)], out / name)
    dio.write_labels(world.labels, out / "labels.csv")
    manifest = world_manifest(world, pred_paths, label_paths)
    manifest_path = out / "manifest.json"
    dio.write_manifest(manifest, manifest_path)
    return str(manifest_path)


def world_manifest(world: SynthWorld, prediction_paths, label_paths) -> EnsembleManifest:
    """Manifest describing a written world: first severity is the ID split."""
    cfg = world.config
    split_ids = world.split_ids
    models = tuple(
        (mid, {split: prediction_paths[(mid, split)] for split in split_ids})
        for mid in world.model_ids
    )
    options = {
        "generator": GENERATOR_NAME,
        "seed": cfg.seed,
        "noise_scale": NOISE_SCALE,
        "severity": {split: j + 1 for j, split in enumerate(split_ids)},
        "sigma": {split: cfg.severities[j] for j, split in enumerate(split_ids)},
        "skill": list(cfg.skill),
        "temperature": list(cfg.temperature),
    }
    return EnsembleManifest(
        k=cfg.n_classes,
        id_split=split_ids[0],
        ood_splits=tuple(split_ids[1:]),
        models=models,
        pairing=Pairing.all_pairs(),
        labels=dict(label_paths),
        options=options,
    )
