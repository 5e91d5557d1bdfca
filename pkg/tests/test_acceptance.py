"""Acceptance suite: each test prints a single PASS/FAIL line."""

import contextlib
import csv
import json
import time
from fractions import Fraction

import numpy as np
import pytest
from importlib import resources

from memeforge import baselines as bl
from memeforge import cli, metrics, synthetic, vision
from memeforge.manifest import LABELS, ManifestRecord, write_manifest
from memeforge.nn import FusionModelConfig, TrainConfig, build_model, train
from memeforge.nn import models as M
from memeforge.nn.models import conv_chain_sizes, flatten_width

import oracles


@contextlib.contextmanager
def outcome(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def test_gradient_oracle():
    with outcome("gradient-oracle"):
        start = time.monotonic()
        cfg = FusionModelConfig(
            img_h=32, img_w=32, conv1_filters=4, conv2_filters=3,
            cnn_dense=5, embed_dim=8, lstm_units=16, lstm_dense1=6,
            lstm_dense2=5, fuse_dense1=4, max_len=5,
            cnn_dropout=0.0, lstm_input_dropout=0.0, embed_dropout=0.0)
        rng = np.random.default_rng(0)
        images = rng.random((2, 32, 32, 3))
        vocab = rng.normal(size=(20, cfg.embed_dim))
        seqs = vocab[rng.integers(0, 20, size=(2, cfg.max_len))]
        onehot = np.eye(3)[[0, 2]]
        params = build_model("fusion", cfg, seed=1)

        def loss_fn():
            loss, _ = M.loss_and_grads(params, cfg, "fusion", images, seqs,
                                       onehot, l2_lambda=1e-3, training=False)
            return loss

        _, grads = M.loss_and_grads(params, cfg, "fusion", images, seqs,
                                    onehot, l2_lambda=1e-3, training=False)
        numeric = oracles.finite_difference_grads(loss_fn, params)
        worst = oracles.max_relative_error(grads, numeric)
        elapsed = time.monotonic() - start
        assert worst < 1e-4, f"max relative error {worst}"
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_shape_reproduction():
    with outcome("shape-reproduction"):
        cfg = FusionModelConfig()
        sizes = conv_chain_sizes(cfg)
        assert [s[0] for s in sizes] == [64, 60, 12, 10, 3]
        assert [s[1] for s in sizes] == [64, 60, 12, 10, 3]
        assert flatten_width(cfg) == 288
        assert cfg.cnn_dense + cfg.lstm_dense2 == 64  # fusion concat width
        params = build_model("fusion", cfg, seed=0)
        assert params["cnn_dense_w"].shape == (288, 32)
        assert params["fuse_w"].shape == (64, 32)
        assert params["out_w"].shape == (32, 3)


def run_overfit(root, seed):
    labels_csv, captions = synthetic.generate_memes(root, per_class=8,
                                                    size=32, seed=21)
    import memeforge.pipeline as pl
    import memeforge.manifest as mf
    records = mf.ingest(root / "images", labels_csv)
    caption_map = {json.loads(line)["id"]: json.loads(line)["text"]
                   for line in open(captions, encoding="utf-8")}
    for rec in records:
        rec.caption_raw = caption_map[rec.id]
    import conftest
    emb = conftest.write_embeddings(root / "toy.vec",
                                    conftest.caption_vocab(captions),
                                    dim=16, seed=2)
    import dataclasses
    cfg = pl.RunConfig.from_dict({
        "model": {"img_h": 32, "img_w": 32},
        "embeddings": {"toy": str(emb)}, "combinations": [["toy"]]})
    table = cfg.load_combination(["toy"])
    model_cfg = pl.model_config_for_table(cfg, table)
    cfg = dataclasses.replace(cfg, model=model_cfg)
    images, seqs, _, onehot = pl.prepare_dataset(records, cfg, table, True, True)
    params = build_model("fusion", model_cfg, seed=seed)
    tcfg = TrainConfig(epochs=150, batch_size=8, seed=seed)
    params, history = train(params, model_cfg, "fusion", images, seqs,
                            onehot, tcfg)
    return history


def test_overfit_smoke(tmp_path):
    with outcome("overfit-smoke"):
        start = time.monotonic()
        h1 = run_overfit(tmp_path / "a", seed=5)
        best = max(h.accuracy for h in h1)
        assert best >= 0.95, f"best training accuracy {best}"
        assert len(h1) <= 300
        h2 = run_overfit(tmp_path / "b", seed=5)
        assert [(h.loss, h.accuracy) for h in h1] == \
            [(h.loss, h.accuracy) for h in h2]
        elapsed = time.monotonic() - start
        assert elapsed < 300.0, f"took {elapsed:.1f}s"


def test_end_to_end_pipeline(small_dataset, toy_embeddings, tmp_path):
    with outcome("end-to-end-pipeline"):
        start = time.monotonic()
        manifest = tmp_path / "manifest.jsonl"
        assert cli.main(["ingest", "--images", str(small_dataset["images"]),
                         "--labels", str(small_dataset["labels_csv"]),
                         "--out", str(manifest)]) == 0
        assert cli.main(["ocr", "--manifest", str(manifest),
                         "--offline", str(small_dataset["captions"])]) == 0
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "model": {"img_h": 32, "img_w": 32},
            "train": {"epochs": 5, "batch_size": 8, "seed": 3},
            "embeddings": {"toy": str(toy_embeddings)},
            "combinations": [["toy"]],
        }), encoding="utf-8")
        ckpt = tmp_path / "fusion.ckpt"
        assert cli.main(["train", "--manifest", str(manifest),
                         "--config", str(config), "--kind", "fusion",
                         "--out", str(ckpt)]) == 0
        out = tmp_path / "report"
        assert cli.main(["eval", "--manifest", str(manifest),
                         "--config", str(config), "--kind", "fusion",
                         "--k", "3", "--seed", "0", "--out", str(out)]) == 0
        payload = json.loads((out / "report.json").read_text(encoding="utf-8"))
        import jsonschema
        schema = json.loads(resources.files("memeforge").joinpath(
            "data/report.schema.json").read_text(encoding="utf-8"))
        jsonschema.validate(payload, schema)
        for row in payload["rows"]:
            for key in ("precision", "recall", "f1"):
                assert 0.0 <= row[key] <= 1.0
            for pc in row["per_class"]:
                assert 0.0 <= pc["f1"] <= 1.0
        elapsed = time.monotonic() - start
        assert elapsed < 600.0, f"took {elapsed:.1f}s"


def test_glcm_bruteforce_equivalence():
    with outcome("glcm-bruteforce"):
        rng = np.random.default_rng(101)
        for _ in range(200):
            h = int(rng.integers(2, 9))
            w = int(rng.integers(2, 9))
            img = rng.integers(0, 256, (h, w), np.uint8)
            levels = int(rng.choice([2, 4, 8]))
            ours = vision.compute_glcm(img, levels=levels)
            ref = oracles.glcm_naive(img, levels, vision.GLCM_OFFSETS)
            assert np.array_equal(ours, ref)


def test_emd_exhaustive():
    with outcome("emd-exhaustive"):
        rng = np.random.default_rng(103)
        size = 6
        pts = rng.random((size, 2))
        cost = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        for _ in range(100):
            p = np.zeros(size)
            q = np.zeros(size)
            for hist in (p, q):
                active = int(rng.integers(1, 5))
                idx = rng.choice(size, size=active, replace=False)
                mass = rng.random(active)
                hist[idx] = mass / mass.sum()
            ours = vision.emd(p, q, cost)
            ref = oracles.emd_enumerate(p, q, cost)
            assert abs(ours - ref) <= 1e-9, f"{ours} vs {ref}"
        # one pixel per RGB bin -> histogram identical to the uniform reference
        centers = np.array([32, 96, 160, 224], np.uint8)
        pixels = [(r, g, b) for r in centers for g in centers for b in centers]
        uniform_img = np.array(pixels, np.uint8).reshape(8, 8, 3)
        assert vision.colorfulness(uniform_img) == pytest.approx(0.0, abs=1e-9)


def test_deskew_recovery():
    with outcome("deskew-recovery"):
        img = np.full((120, 160), 255, np.uint8)
        for r in range(10, 110, 12):
            img[r:r + 4, 10:150] = 0
        for theta in (-10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0):
            rotated = vision.rotate(img, theta)
            est = vision.estimate_skew(rotated)
            assert not est.degenerate
            assert abs(est.angle - theta) <= 0.5, \
                f"theta {theta}: estimated {est.angle}"


def test_agreement_metrics():
    with outcome("agreement-metrics"):
        # balanced disagreement: po = 0.5, pe = 0.5 -> kappa = 0
        assert abs(metrics.cohen_kappa([0, 0, 1, 1], [0, 1, 0, 1])) <= 1e-9
        # perfect agreement
        assert abs(metrics.cohen_kappa([0, 1, 2, 1, 0], [0, 1, 2, 1, 0]) - 1.0) <= 1e-9
        assert abs(metrics.fleiss_kappa([[0, 0], [1, 1], [2, 2]]).value - 1.0) <= 1e-9
        # fixed 10-item 3-rater table; hand-worked value:
        # P_bar = 3/5, P_e = 77/225, kappa = (135-77)/(225-77) = 29/74
        table = [
            [0, 0, 1], [1, 1, 1], [2, 0, 2], [0, 0, 0], [1, 2, 1],
            [2, 2, 2], [0, 1, 0], [1, 1, 0], [2, 2, 1], [0, 0, 0],
        ]
        expected = float(Fraction(29, 74))
        got = metrics.fleiss_kappa(table)
        assert not got.degenerate
        assert abs(got.value - expected) <= 1e-9
        assert metrics.m_index({"hindi": 50, "english": 50}) == 1.0


def test_baseline_sanity():
    with outcome("baseline-sanity"):
        start = time.monotonic()
        rng = np.random.default_rng(41)
        centers = np.array([[0.0, 0.0], [6.0, 0.0], [3.0, 6.0 * np.sqrt(3) / 2]])
        x = np.vstack([c + rng.normal(size=(100, 2)) for c in centers])
        y = np.repeat(np.arange(3), 100)

        def svm_trainer(train_idx, test_idx):
            x_tr, mean, std = bl.standardize(x[train_idx])
            model = bl.svm_train(x_tr, y[train_idx], seed=0)
            return bl.svm_predict(model, bl.apply_standardize(x[test_idx],
                                                              mean, std))

        pooled, _, cm = metrics.cross_validate(svm_trainer, y, k=10, seed=0)
        svm_acc = np.trace(cm) / cm.sum()
        assert svm_acc >= 0.9, f"svm held-out accuracy {svm_acc}"

        def rf_trainer(train_idx, test_idx):
            model = bl.rf_train(x[train_idx], y[train_idx],
                                bl.RfConfig(n_estimators=600, max_depth=12, seed=0))
            return bl.rf_predict(model, x[test_idx])

        pooled, _, cm = metrics.cross_validate(rf_trainer, y, k=10, seed=0)
        rf_acc = np.trace(cm) / cm.sum()
        assert rf_acc >= 0.9, f"rf held-out accuracy {rf_acc}"
        elapsed = time.monotonic() - start
        assert elapsed < 120.0, f"took {elapsed:.1f}s"


def test_determinism(small_dataset, toy_embeddings, tmp_path):
    with outcome("determinism"):
        manifest = tmp_path / "manifest.jsonl"
        assert cli.main(["ingest", "--images", str(small_dataset["images"]),
                         "--labels", str(small_dataset["labels_csv"]),
                         "--out", str(manifest)]) == 0
        assert cli.main(["ocr", "--manifest", str(manifest),
                         "--offline", str(small_dataset["captions"])]) == 0
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "model": {"img_h": 32, "img_w": 32},
            "train": {"epochs": 3, "batch_size": 8, "seed": 9},
            "embeddings": {"toy": str(toy_embeddings)},
            "combinations": [["toy"]],
        }), encoding="utf-8")
        ckpts = []
        for tag in ("a", "b"):
            out = tmp_path / f"{tag}.ckpt"
            assert cli.main(["train", "--manifest", str(manifest),
                             "--config", str(config), "--kind", "fusion",
                             "--out", str(out), "--seed", "9"]) == 0
            ckpts.append(out.read_bytes())
        assert ckpts[0] == ckpts[1], "checkpoints differ between runs"
        reports = []
        for tag in ("r1", "r2"):
            out = tmp_path / tag
            assert cli.main(["eval", "--manifest", str(manifest),
                             "--config", str(config), "--kind", "fusion",
                             "--k", "3", "--seed", "9", "--out", str(out)]) == 0
            reports.append((out / "report.json").read_bytes())
        assert reports[0] == reports[1], "reports differ between runs"


def test_class_count_report(tmp_path, capsys):
    with outcome("class-count-report"):
        counts = {"non_offensive": 339, "satirical": 427, "hate_inducing": 452}
        records = []
        for label, n in counts.items():
            for i in range(n):
                records.append(ManifestRecord(id=f"{label}_{i}",
                                              image_path=f"{label}_{i}.png",
                                              label=label))
        manifest = tmp_path / "corpus.jsonl"
        write_manifest(records, manifest)
        assert cli.main(["report", "--manifest", str(manifest)]) == 0
        out = capsys.readouterr().out
        assert "339" in out and "427" in out and "452" in out
        assert "1218" in out
        for label in LABELS:
            assert label in out
