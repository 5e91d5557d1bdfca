import csv
import json

import jsonschema
import numpy as np
import pytest
from importlib import resources

from memeforge import cli, synthetic
from memeforge.manifest import ManifestRecord, read_manifest, write_manifest


@pytest.fixture(scope="module")
def workspace(small_dataset, toy_embeddings, tmp_path_factory):
    """Ingested + captioned manifest and a run config for the 30-meme set."""
    root = tmp_path_factory.mktemp("ws")
    manifest = root / "manifest.jsonl"
    rc = cli.main(["ingest", "--images", str(small_dataset["images"]),
                   "--labels", str(small_dataset["labels_csv"]),
                   "--out", str(manifest)])
    assert rc == 0
    rc = cli.main(["ocr", "--manifest", str(manifest),
                   "--offline", str(small_dataset["captions"])])
    assert rc == 0
    config = root / "config.json"
    config.write_text(json.dumps({
        "model": {"img_h": 32, "img_w": 32},
        "train": {"epochs": 2, "batch_size": 8, "seed": 1},
        "embeddings": {"toy": str(toy_embeddings)},
        "combinations": [["toy"]],
    }), encoding="utf-8")
    return {"root": root, "manifest": manifest, "config": config}


# --- manifest roundtrip ---

def test_manifest_roundtrip(tmp_path):
    records = [
        ManifestRecord(id="a", image_path="x/a.png", label="satirical",
                       caption_raw="kya baat"),
        ManifestRecord(id="b", image_path="x/b.png",
                       annotator_labels=["satirical"] * 3,
                       warnings=["ocr: timeout"]),
    ]
    path = tmp_path / "m.jsonl"
    write_manifest(records, path)
    loaded = read_manifest(path)
    assert loaded == records


def test_manifest_json_is_sorted(tmp_path):
    rec = ManifestRecord(id="a", image_path="p", label="satirical")
    d = json.loads(rec.to_json())
    assert list(d) == sorted(d)


# --- ingest ---

def test_ingest_manifest_contents(workspace):
    records = read_manifest(workspace["manifest"])
    assert len(records) == 30
    assert sum(r.label == "hate_inducing" for r in records) == 10
    assert all(r.caption_raw for r in records)


def test_ingest_duplicate_id_exit_2(small_dataset, tmp_path):
    rows = list(csv.reader(open(small_dataset["labels_csv"], encoding="utf-8")))
    rows.append(rows[0])
    bad = tmp_path / "dup.csv"
    with open(bad, "w", newline="", encoding="utf-8") as f:
        csv.writer(f).writerows(rows)
    rc = cli.main(["ingest", "--images", str(small_dataset["images"]),
                   "--labels", str(bad), "--out", str(tmp_path / "m.jsonl")])
    assert rc == 2


def test_ingest_unknown_label_exit_2(small_dataset, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,non_offensive_000.png,very_bad\n", encoding="utf-8")
    rc = cli.main(["ingest", "--images", str(small_dataset["images"]),
                   "--labels", str(bad), "--out", str(tmp_path / "m.jsonl")])
    assert rc == 2


def test_ingest_missing_image_exit_2(small_dataset, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,nope.png,satirical\n", encoding="utf-8")
    rc = cli.main(["ingest", "--images", str(small_dataset["images"]),
                   "--labels", str(bad), "--out", str(tmp_path / "m.jsonl")])
    assert rc == 2


def test_ingest_missing_csv_exit_2(small_dataset, tmp_path):
    rc = cli.main(["ingest", "--images", str(small_dataset["images"]),
                   "--labels", str(tmp_path / "absent.csv"),
                   "--out", str(tmp_path / "m.jsonl")])
    assert rc == 2


def test_unknown_subcommand_exit_1():
    assert cli.main(["frobnicate"]) == 1


# --- ocr ---

def test_ocr_missing_caption_is_warning(workspace, small_dataset, tmp_path):
    captions = tmp_path / "partial.jsonl"
    lines = open(small_dataset["captions"], encoding="utf-8").read().splitlines()
    captions.write_text("\n".join(lines[:-2]) + "\n", encoding="utf-8")
    out = tmp_path / "m.jsonl"
    rc = cli.main(["ocr", "--manifest", str(workspace["manifest"]),
                   "--offline", str(captions), "--out", str(out)])
    assert rc == 0  # per-record problems do not fail the batch
    records = read_manifest(out)
    flagged = [r for r in records if r.warnings]
    assert len(flagged) == 2
    assert all("MissingCaption" in r.warnings[-1] for r in flagged)


# --- features ---

def test_features_csv(workspace, tmp_path):
    out = tmp_path / "features.csv"
    rc = cli.main(["features", "--manifest", str(workspace["manifest"]),
                   "--families", "glcm,colorfulness,tamura,face",
                   "--out", str(out)])
    assert rc == 0
    with open(out, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["id", "glcm_contrast", "glcm_correlation", "glcm_energy",
                       "glcm_homogeneity", "colorfulness", "tamura_coarseness",
                       "tamura_directionality", "face_count", "face_max_rel_area"]
    assert len(rows) == 31
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    assert np.isfinite(values).all()
    # full-precision floats should round-trip exactly
    assert rows[1][5] == repr(float(values[0][4]))


def test_features_unknown_family_exit_1(workspace, tmp_path):
    rc = cli.main(["features", "--manifest", str(workspace["manifest"]),
                   "--families", "glcm,sift", "--out", str(tmp_path / "f.csv")])
    assert rc == 1


# --- train / predict ---

def test_train_and_predict_lstm(workspace, small_dataset, tmp_path):
    ckpt = tmp_path / "lstm.ckpt"
    rc = cli.main(["train", "--manifest", str(workspace["manifest"]),
                   "--config", str(workspace["config"]),
                   "--kind", "lstm_only", "--out", str(ckpt)])
    assert rc == 0
    assert ckpt.exists()
    history = ckpt.with_suffix(".history.csv")
    with open(history, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["epoch", "loss", "accuracy"]
    assert len(rows) == 3  # header + 2 epochs
    img = small_dataset["images"] / "satirical_000.png"
    rc = cli.main(["predict", "--model", str(ckpt), "--image", str(img),
                   "--caption", "neta pogo dekhta hai",
                   "--config", str(workspace["config"])])
    assert rc == 0


def test_predict_requires_caption_or_ocr(workspace, small_dataset, tmp_path):
    ckpt = tmp_path / "m.ckpt"
    cli.main(["train", "--manifest", str(workspace["manifest"]),
              "--config", str(workspace["config"]),
              "--kind", "lstm_only", "--out", str(ckpt)])
    img = small_dataset["images"] / "satirical_000.png"
    rc = cli.main(["predict", "--model", str(ckpt), "--image", str(img)])
    assert rc == 1


def test_predict_corrupt_checkpoint_exit_2(small_dataset, tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    img = small_dataset["images"] / "satirical_000.png"
    rc = cli.main(["predict", "--model", str(bad), "--image", str(img),
                   "--caption", "x"])
    assert rc == 2


# --- eval ---

def test_eval_lstm_report_schema(workspace, tmp_path):
    out = tmp_path / "rep"
    rc = cli.main(["eval", "--manifest", str(workspace["manifest"]),
                   "--config", str(workspace["config"]),
                   "--kind", "lstm", "--k", "3", "--seed", "0",
                   "--out", str(out)])
    assert rc == 0
    payload = json.loads((out / "report.json").read_text(encoding="utf-8"))
    schema = json.loads(resources.files("memeforge").joinpath(
        "data/report.schema.json").read_text(encoding="utf-8"))
    jsonschema.validate(payload, schema)
    assert payload["kind"] == "lstm"
    assert payload["k"] == 3
    assert len(payload["rows"]) == 1
    assert len(payload["rows"][0]["per_fold"]) == 3
    text = (out / "report.txt").read_text(encoding="utf-8")
    assert "F1-Score" in text


def test_eval_baseline_requires_family(workspace, tmp_path):
    rc = cli.main(["eval", "--manifest", str(workspace["manifest"]),
                   "--config", str(workspace["config"]),
                   "--kind", "svm", "--k", "3", "--out", str(tmp_path / "r")])
    assert rc == 1


def test_eval_bad_config_exit_1(workspace, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"cnn_input": "grayscale"}), encoding="utf-8")
    rc = cli.main(["eval", "--manifest", str(workspace["manifest"]),
                   "--config", str(cfg), "--kind", "lstm", "--k", "3",
                   "--out", str(tmp_path / "r")])
    assert rc == 1


# --- report ---

def test_report_with_annotators(tmp_path, capsys):
    labels_csv, captions = synthetic.generate_memes(tmp_path, per_class=4,
                                                    size=24, seed=3,
                                                    annotators=True)
    manifest = tmp_path / "m.jsonl"
    assert cli.main(["ingest", "--images", str(tmp_path / "images"),
                     "--labels", str(labels_csv), "--out", str(manifest)]) == 0
    assert cli.main(["ocr", "--manifest", str(manifest),
                     "--offline", str(captions)]) == 0
    assert cli.main(["report", "--manifest", str(manifest)]) == 0
    out = capsys.readouterr().out
    assert "Class distribution" in out
    assert "total                12" in out.replace("  ", " ") or "12" in out
    assert "Fleiss's kappa: 1.000" in out
    assert "Multilingual index:" in out
