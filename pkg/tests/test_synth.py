"""Synthetic world generation: determinism, monotone degradation, validity."""

import numpy as np
import pytest

from divshift import (
    LabelVector,
    Notion,
    SynthConfig,
    ValidationError,
    aggregate_error,
    generate_world,
)

TEST_CONFIG = SynthConfig(
    n_models=6,
    n_samples=600,
    n_classes=5,
    skill=(7.0, 13.0),
    temperature=(0.8, 1.2),
    severities=(0.25, 0.5, 1.0, 1.6, 2.4),
    seed=4242,
)


def test_config_validation():
    with pytest.raises(ValidationError):
        SynthConfig(n_classes=1)
    with pytest.raises(ValidationError):
        SynthConfig(skill=(0.0, 5.0))
    with pytest.raises(ValidationError):
        SynthConfig(skill=(5.0, 4.0))
    with pytest.raises(ValidationError):
        SynthConfig(temperature=(0.0, 1.0))
    with pytest.raises(ValidationError):
        SynthConfig(severities=())
    with pytest.raises(ValidationError):
        SynthConfig(severities=(0.5, -1.0))


def test_identical_config_gives_identical_bytes():
    w1 = generate_world(TEST_CONFIG)
    w2 = generate_world(TEST_CONFIG)
    assert w1.labels.tobytes() == w2.labels.tobytes()
    assert w1.split_ids == w2.split_ids
    for key in w1.predictions:
        assert w1.predictions[key].probs.tobytes() == w2.predictions[key].probs.tobytes()
        assert w1.predictions[key].logits.tobytes() == w2.predictions[key].logits.tobytes()


def test_different_seed_changes_world():
    w1 = generate_world(TEST_CONFIG)
    w2 = generate_world(SynthConfig(**{**TEST_CONFIG.__dict__, "seed": 999}))
    key = next(iter(w1.predictions))
    assert w1.predictions[key].probs.tobytes() != w2.predictions[key].probs.tobytes()


def test_top1_error_monotone_in_severity():
    world = generate_world(TEST_CONFIG)
    means = []
    for split in world.split_ids:
        labels = world.label_vector(split)
        errs = [
            aggregate_error(Notion.TOP1, world.predictions[(m, split)], labels)
            for m in world.model_ids
        ]
        means.append(np.mean(errs))
    assert all(means[i] <= means[i + 1] for i in range(len(means) - 1))


def test_rows_are_valid_distributions():
    world = generate_world(TEST_CONFIG)
    for pred in world.predictions.values():
        sums = pred.probs.sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-6
        assert np.all(pred.probs >= 0.0)
        assert np.all(np.isfinite(pred.logits))


def test_probs_are_softmax_of_logits():
    world = generate_world(TEST_CONFIG)
    pred = world.predictions[(world.model_ids[0], "sev1")]
    z = pred.logits - pred.logits.max(axis=1, keepdims=True)
    soft = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    assert np.max(np.abs(soft - pred.probs)) < 1e-12


def test_high_skill_world_is_near_perfect():
    config = SynthConfig(
        n_models=2,
        n_samples=2000,
        n_classes=10,
        skill=(20.0, 20.0),
        temperature=(1.0, 1.0),
        severities=(0.0,),
        seed=7,
    )
    world = generate_world(config)
    labels = world.label_vector("sev1")
    for m in world.model_ids:
        pred = world.predictions[(m, "sev1")]
        assert aggregate_error(Notion.TOP1, pred, labels) < 0.01
        assert pred.probs.max(axis=1).mean() > 0.95


def test_model_params_within_ranges():
    world = generate_world(TEST_CONFIG)
    for skill, temp in world.model_params.values():
        assert TEST_CONFIG.skill[0] <= skill <= TEST_CONFIG.skill[1]
        assert TEST_CONFIG.temperature[0] <= temp <= TEST_CONFIG.temperature[1]


def test_label_vector_shares_labels():
    world = generate_world(TEST_CONFIG)
    vec = world.label_vector("sev2")
    assert isinstance(vec, LabelVector)
    assert np.array_equal(vec.labels, world.labels)
