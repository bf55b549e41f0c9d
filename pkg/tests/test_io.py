"""File formats: binary predictions, label CSVs, manifests."""

import json
import struct

import numpy as np
import pytest

from divshift import (
    BadMagic,
    BadVersion,
    EmptyLabels,
    LabelOutOfRange,
    ManifestError,
    ShapeMismatch,
    ShapeOverflow,
    SynthConfig,
    TruncatedPayload,
    ValidationError,
    enumerate_pairs,
    generate_world,
    load_ensemble,
    load_manifest,
    read_labels,
    read_prediction_header,
    read_predictions,
    read_predictions_csv,
    validate_prediction_set,
    write_labels,
    write_manifest,
    write_predictions,
    write_world,
)

from conftest import random_simplex


def _pset(rng, n=100, k=10, logits=True):
    probs = random_simplex(rng, n, k).astype(np.float32).astype(np.float64)
    lg = rng.normal(size=(n, k)).astype(np.float32).astype(np.float64) if logits else None
    return validate_prediction_set(probs, model_id="m", split_id="s", logits=lg)


def test_roundtrip_bit_identical(rng, tmp_path):
    pred = _pset(rng)
    path = tmp_path / "pred.ddpm"
    write_predictions(pred, path)
    back = read_predictions(path, model_id="m", split_id="s")
    assert back.probs.astype(np.float32).tobytes() == pred.probs.astype(np.float32).tobytes()
    assert back.logits.astype(np.float32).tobytes() == pred.logits.astype(np.float32).tobytes()
    # writing what was read reproduces the file byte for byte
    path2 = tmp_path / "again.ddpm"
    write_predictions(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_roundtrip_without_logits(rng, tmp_path):
    pred = _pset(rng, logits=False)
    path = tmp_path / "pred.ddpm"
    write_predictions(pred, path)
    n, k, has_logits = read_prediction_header(path)
    assert (n, k, has_logits) == (100, 10, False)
    assert read_predictions(path).logits is None


def test_header_layout(rng, tmp_path):
    pred = _pset(rng, n=3, k=4, logits=True)
    path = tmp_path / "pred.ddpm"
    write_predictions(pred, path)
    blob = path.read_bytes()
    assert blob[:4] == b"DDPM"
    assert struct.unpack("<H", blob[4:6])[0] == 1
    assert struct.unpack("<H", blob[6:8])[0] == 1  # logits flag
    assert struct.unpack("<I", blob[8:12])[0] == 3
    assert struct.unpack("<I", blob[12:16])[0] == 4
    assert len(blob) == 16 + 3 * 4 * 4 * 2


def _header(magic=b"DDPM", version=1, flags=0, n=10, k=10):
    return struct.pack("<4sHHII", magic, version, flags, n, k)


MALFORMED_CASES = [
    ("bad magic", _header(magic=b"XXXX") + b"\0" * 400, BadMagic),
    ("version 0", _header(version=0) + b"\0" * 400, BadVersion),
    ("version 2", _header(version=2) + b"\0" * 400, BadVersion),
    ("short header", _header()[:10], TruncatedPayload),
    ("short payload", _header() + b"\0" * (399 * 4), TruncatedPayload),
    ("extra bytes", _header() + b"\0" * (401 * 4), TruncatedPayload),
    ("shape overflow", _header(n=2**16, k=2**16), ShapeOverflow),
]


@pytest.mark.parametrize("name,blob,exc", MALFORMED_CASES, ids=[c[0] for c in MALFORMED_CASES])
def test_malformed_files_rejected(tmp_path, name, blob, exc):
    path = tmp_path / "bad.ddpm"
    path.write_bytes(blob)
    with pytest.raises(exc):
        read_predictions(path)


def test_labels_roundtrip(tmp_path):
    path = tmp_path / "labels.csv"
    write_labels([0, 2, 1], path)
    vec = read_labels(path, split_id="s")
    assert list(vec.labels) == [0, 2, 1]


def test_labels_without_header(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("0\n2\n1\n")
    assert list(read_labels(path).labels) == [0, 2, 1]


def test_labels_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0\nx\n")
    with pytest.raises(ValidationError):
        read_labels(bad)
    neg = tmp_path / "neg.csv"
    neg.write_text("0\n-1\n")
    with pytest.raises(ValidationError):
        read_labels(neg)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(EmptyLabels):
        read_labels(empty)


def test_csv_import_lossless(rng, tmp_path):
    probs32 = random_simplex(rng, 20, 3).astype(np.float32)
    path = tmp_path / "pred.csv"
    lines = ["p0,p1,p2,y"]
    y = rng.integers(0, 3, size=20)
    for row, label in zip(probs32, y):
        lines.append(",".join(repr(float(v)) for v in row) + f",{label}")
    path.write_text("\n".join(lines) + "\n")
    pred, labels = read_predictions_csv(path, model_id="m", split_id="s")
    assert pred.probs.astype(np.float32).tobytes() == probs32.tobytes()
    assert np.array_equal(labels.labels, y)
    # converts losslessly to the binary format
    ddpm = tmp_path / "pred.ddpm"
    write_predictions(pred, ddpm)
    assert read_predictions(ddpm).probs.astype(np.float32).tobytes() == probs32.tobytes()


def test_csv_import_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0.5,0.5\n")
    with pytest.raises(ValidationError):
        read_predictions_csv(path)
    path.write_text("p0,p1\n0.5\n")
    with pytest.raises(ValidationError):
        read_predictions_csv(path)
    path.write_text("p0,p1\n")
    with pytest.raises(ValidationError):
        read_predictions_csv(path)


# --- Manifests. ---


def _write_minimal_world(tmp_path, seed=5):
    config = SynthConfig(
        n_models=2, n_samples=40, n_classes=3, severities=(0.25, 0.9), seed=seed
    )
    return write_world(generate_world(config), tmp_path)


def test_minimal_manifest_loads(tmp_path):
    manifest_path = _write_minimal_world(tmp_path)
    manifest = load_manifest(manifest_path)
    assert manifest.k == 3
    assert manifest.id_split == "sev1"
    assert manifest.ood_splits == ("sev2",)
    assert len(enumerate_pairs(manifest)) == 1
    ensemble = load_ensemble(manifest)
    assert set(ensemble.labels) == {"sev1", "sev2"}
    assert ensemble.predictions[("m01", "sev1")].n_samples == 40


def test_manifest_anchor_must_exist(tmp_path):
    manifest_path = _write_minimal_world(tmp_path)
    doc = json.loads(open(manifest_path).read())
    doc["pairing"] = {"mode": "anchor", "anchor": "ghost"}
    path = tmp_path / "anchored.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_manifest_shape_mismatch(tmp_path, rng):
    manifest_path = _write_minimal_world(tmp_path)
    doc = json.loads(open(manifest_path).read())
    # overwrite one model's sev1 predictions with a different sample count
    short = validate_prediction_set(random_simplex(rng, 39, 3), model_id="m02", split_id="sev1")
    write_predictions(short, tmp_path / "m02_sev1.ddpm")
    path = tmp_path / "mismatch.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ShapeMismatch):
        load_manifest(path)


def test_manifest_schema_errors(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(ManifestError):
        load_manifest(path)
    path.write_text(json.dumps({"k": 3}))
    with pytest.raises(ManifestError):
        load_manifest(path)
    path.write_text(json.dumps({"k": 3, "id_split": "a", "models": [], "pairing": {"mode": "all_pairs"}}))
    with pytest.raises(ManifestError):
        load_manifest(path)
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "missing.json")


def test_manifest_label_validation(tmp_path):
    manifest_path = _write_minimal_world(tmp_path)
    (tmp_path / "labels.csv").write_text("label\n" + "\n".join(["7"] * 40) + "\n")
    with pytest.raises(LabelOutOfRange):
        load_manifest(manifest_path)


def test_write_manifest_roundtrip(tmp_path):
    manifest_path = _write_minimal_world(tmp_path)
    manifest = load_manifest(manifest_path)
    out = tmp_path / "copy.json"
    write_manifest(manifest, out)
    again = load_manifest(out)  # absolute paths survive a rewrite
    assert again.model_ids == manifest.model_ids
    assert again.options["severity"] == {"sev1": 1, "sev2": 2}


def test_write_world_refuses_overwrite(tmp_path):
    _write_minimal_world(tmp_path)
    with pytest.raises(ValidationError):
        _write_minimal_world(tmp_path)
    config = SynthConfig(n_models=2, n_samples=40, n_classes=3, severities=(0.25, 0.9), seed=5)
    write_world(generate_world(config), tmp_path, force=True)
