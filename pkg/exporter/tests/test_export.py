"""Exporter behavior plus the cross-component golden contract.

The golden tests read exporter-written files back through the primary
divshift toolkit (installed separately); the exporter library itself never
imports it.
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np
import pytest

from predexport import (
    ExportError,
    ExportJob,
    export,
    load_dataset,
    resolve_model,
    run_model,
    softmax,
    write_prediction_file,
)
from predexport.cli import main

sys.path.insert(0, str(Path(__file__).parent))
from make_golden import GOLDEN, LABELS, W, X, linear_model


def _job(tmp_path, **kw):
    defaults = dict(
        model=linear_model,
        model_id="m",
        split_id="s",
        samples=X,
        labels=LABELS,
        predictions_path=tmp_path / "pred.ddpm",
        labels_path=tmp_path / "labels.csv",
    )
    defaults.update(kw)
    return ExportJob(**defaults)


def test_header_matches_shapes(tmp_path):
    # 3 samples, 4 classes: payload is 48 bytes, or 96 with logits
    job = _job(tmp_path, samples=X[:3], labels=LABELS[:3])
    fragment = export(job)
    blob = (tmp_path / "pred.ddpm").read_bytes()
    magic, version, flags, n, k = struct.unpack("<4sHHII", blob[:16])
    assert (magic, version, flags, n, k) == (b"DDPM", 1, 1, 3, 4)
    assert len(blob) == 16 + 96
    assert fragment["n"] == 3 and fragment["k"] == 4 and fragment["logits"]

    bare = _job(
        tmp_path,
        samples=X[:3],
        labels=None,
        labels_path=None,
        include_logits=False,
        predictions_path=tmp_path / "bare.ddpm",
    )
    export(bare)
    blob = (tmp_path / "bare.ddpm").read_bytes()
    assert struct.unpack("<H", blob[6:8])[0] == 0
    assert len(blob) == 16 + 48


def test_batching_matches_single_shot(tmp_path):
    whole = run_model(_job(tmp_path, batch_size=1024))
    chunked = run_model(_job(tmp_path, batch_size=2))
    assert np.array_equal(whole[0], chunked[0])
    assert np.array_equal(whole[1], chunked[1])


def test_probs_are_softmax_of_scores(tmp_path):
    probs, logits = run_model(_job(tmp_path))
    assert np.max(np.abs(probs - softmax(X @ W))) < 1e-12
    assert np.array_equal(logits, X @ W)


def test_probability_mode(tmp_path):
    rows = np.tile([0.25, 0.25, 0.5], (4, 1))
    job = _job(
        tmp_path,
        model=lambda b: rows[: len(b)],
        samples=np.zeros((4, 1)),
        labels=None,
        labels_path=None,
        scores="probs",
        include_logits=False,
    )
    fragment = export(job)
    assert fragment["logits"] is False
    with pytest.raises(ExportError):
        _job(tmp_path, scores="probs", include_logits=True)


def test_validation_errors(tmp_path):
    with pytest.raises(ExportError):
        export(_job(tmp_path, model=lambda b: np.full((len(b), 3), np.nan)))
    with pytest.raises(ExportError):
        export(_job(tmp_path, model=lambda b: np.zeros((len(b) + 1, 3))))
    with pytest.raises(ExportError):
        export(_job(tmp_path, labels=LABELS[:-1]))
    with pytest.raises(ExportError):
        export(_job(tmp_path, labels=np.full(6, 9)))
    with pytest.raises(ExportError):
        _job(tmp_path, batch_size=0)
    with pytest.raises(ExportError):
        _job(tmp_path, labels=None)  # labels_path still set
    with pytest.raises(ExportError):
        write_prediction_file(tmp_path / "x.ddpm", np.zeros((2, 2)), np.zeros((2, 3)))


def test_resolve_model_import_path():
    fn = resolve_model("math:sqrt")
    assert fn(4.0) == 2.0
    with pytest.raises(ExportError):
        resolve_model("math:no_such_thing")
    with pytest.raises(ExportError):
        resolve_model(123)


def test_load_dataset(tmp_path):
    np.savez(tmp_path / "d.npz", x=X, y=LABELS)
    samples, labels = load_dataset(tmp_path / "d.npz")
    assert np.array_equal(samples, X) and np.array_equal(labels, LABELS)
    np.save(tmp_path / "d.npy", X)
    samples, labels = load_dataset(tmp_path / "d.npy")
    assert labels is None
    with pytest.raises(ExportError):
        load_dataset(tmp_path / "missing.npz")


def test_cli_end_to_end(tmp_path, capsys, monkeypatch):
    np.savez(tmp_path / "d.npz", x=X, y=LABELS)
    monkeypatch.syspath_prepend(str(Path(__file__).parent))
    rc = main(
        [
            "--model", "make_golden:linear_model",
            "--model-id", "m7",
            "--data", str(tmp_path / "d.npz"),
            "--split", "val",
            "--out-predictions", str(tmp_path / "m7.ddpm"),
            "--out-labels", str(tmp_path / "labels.csv"),
        ]
    )
    assert rc == 0
    fragment = json.loads(capsys.readouterr().out)
    assert fragment["model"]["id"] == "m7"
    assert fragment["n"] == 6 and fragment["k"] == 4
    assert (tmp_path / "m7.ddpm").is_file()
    assert (tmp_path / "labels.csv").read_text().splitlines()[0] == "label"
    rc = main(["--model", "nope", "--model-id", "x", "--data", str(tmp_path / "d.npz"),
               "--split", "s", "--out-predictions", str(tmp_path / "x.ddpm")])
    assert rc == 1


# --- Cross-component golden contract (requires the divshift package). ---

divshift = pytest.importorskip("divshift")


def test_golden_vectors_are_reproducible(tmp_path):
    export(
        ExportJob(
            model=linear_model,
            model_id="golden",
            split_id="train",
            samples=X,
            labels=LABELS,
            predictions_path=tmp_path / "golden_logits.ddpm",
            labels_path=tmp_path / "golden_labels.csv",
            batch_size=4,
        )
    )
    assert (tmp_path / "golden_logits.ddpm").read_bytes() == (GOLDEN / "golden_logits.ddpm").read_bytes()
    assert (tmp_path / "golden_labels.csv").read_bytes() == (GOLDEN / "golden_labels.csv").read_bytes()


def test_primary_toolkit_reads_golden_bit_identically():
    pred = divshift.read_predictions(GOLDEN / "golden_logits.ddpm", model_id="golden", split_id="train")
    expected_logits = (X @ W).astype(np.float32)
    expected_probs = softmax(X @ W).astype(np.float32)
    assert pred.logits.astype(np.float32).tobytes() == expected_logits.tobytes()
    assert pred.probs.astype(np.float32).tobytes() == expected_probs.tobytes()
    labels = divshift.read_labels(GOLDEN / "golden_labels.csv", split_id="train")
    assert np.array_equal(labels.labels, LABELS)

    bare = divshift.read_predictions(GOLDEN / "golden_nologits.ddpm")
    assert bare.logits is None
    assert bare.probs.astype(np.float32).tobytes() == expected_probs.tobytes()


def test_exported_probs_are_softmax_of_exported_logits():
    pred = divshift.read_predictions(GOLDEN / "golden_logits.ddpm")
    recomputed = softmax(pred.logits)  # float64 softmax of the stored float32 logits
    assert np.max(np.abs(recomputed - pred.probs)) < 1e-5


def test_onehot_model_scores_zero_error_in_primary(tmp_path):
    k = 4
    onehot = np.zeros((6, k))
    onehot[np.arange(6), LABELS] = 1.0
    job = ExportJob(
        model=lambda batch: onehot[: len(batch)],
        model_id="oracle",
        split_id="train",
        samples=X,
        labels=LABELS,
        predictions_path=tmp_path / "oracle.ddpm",
        labels_path=tmp_path / "labels.csv",
        scores="probs",
        include_logits=False,
        batch_size=1024,
    )
    export(job)
    pred_raw = divshift.read_predictions(tmp_path / "oracle.ddpm", model_id="oracle", split_id="train")
    pred = divshift.validate_prediction_set(
        pred_raw.probs, k, model_id="oracle", split_id="train"
    )
    labels = divshift.validate_labels(
        divshift.read_labels(tmp_path / "labels.csv", split_id="train"), k
    )
    assert divshift.aggregate_error(divshift.Notion.TOP1, pred, labels) == 0.0
