"""Command-line operator surface: ingest, ocr, features, train, eval,
predict, report.

Per-record failures are warnings (the batch continues); batch-level failures
exit nonzero. Exit codes: 0 success, 1 usage/config error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import errors, metrics, ocr, vision
from .baselines import (
    apply_standardize,
    rf_predict,
    rf_train,
    standardize,
    svm_predict,
    svm_train,
)
from .manifest import (
    LABEL_INDEX,
    LABELS,
    ManifestRecord,
    ingest,
    load_face_boxes,
    read_manifest,
    write_manifest,
)
from .nn import build_model, load_checkpoint, predict, save_checkpoint, train
from .nn.models import predict_batch
from .pipeline import (
    RunConfig,
    caption_to_sequence,
    load_image_tensor,
    model_config_for_table,
    prepare_dataset,
)

log = logging.getLogger(__name__)

USAGE_ERROR, DATA_ERROR, INTERNAL_ERROR = 1, 2, 3

DATA_ERRORS = (
    errors.DuplicateId, errors.UnknownLabel, errors.MissingImage,
    errors.MalformedImage, errors.UnsupportedFormat, errors.MissingCaption,
    errors.TooFewItems, errors.CorruptCheckpoint, errors.EmptyFile,
    errors.InconsistentDim, FileNotFoundError,
)

FEATURE_FAMILIES = ("glcm", "colorfulness", "tamura", "face")
FAMILY_COLUMNS = {
    "glcm": ["glcm_contrast", "glcm_correlation", "glcm_energy", "glcm_homogeneity"],
    "colorfulness": ["colorfulness"],
    "tamura": ["tamura_coarseness", "tamura_directionality"],
    "face": ["face_count", "face_max_rel_area"],
}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    records = ingest(args.images, args.labels)
    write_manifest(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_ocr(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    records = read_manifest(args.manifest)
    warnings = 0
    offline_captions = None
    if args.offline:
        offline_captions = ocr.load_offline_captions(args.offline)
    elif cfg.ocr.mode == "offline":
        raise errors.ConfigError("offline OCR mode requires --offline captions.jsonl")
    for rec in records:
        try:
            if offline_captions is not None:
                if rec.id not in offline_captions:
                    raise errors.MissingCaption(rec.id)
                rec.caption_raw = offline_captions[rec.id]
            else:
                with open(rec.image_path, "rb") as f:
                    result = ocr.extract_remote(rec.id, f.read(), cfg.ocr)
                rec.caption_raw = result.raw_text
        except (errors.MemeforgeError, OSError) as exc:
            warnings += 1
            rec.warnings.append(f"ocr: {type(exc).__name__}: {exc}")
            log.warning("OCR failed for %s: %s", rec.id, exc)
    write_manifest(records, args.out or args.manifest)
    print(f"captions filled for {len(records) - warnings}/{len(records)} records"
          f" ({warnings} warnings)")
    return 0


def _record_features(rec: ManifestRecord, families: list[str]) -> list[float]:
    with open(rec.image_path, "rb") as f:
        rgb = vision.decode_image(f.read())
    gray = vision.to_grayscale(rgb)
    values: list[float] = []
    for family in families:
        if family == "glcm":
            feats = vision.glcm_features(vision.compute_glcm(gray))
            values += [feats.contrast, feats.correlation, feats.energy,
                       feats.homogeneity]
        elif family == "colorfulness":
            values.append(vision.colorfulness(rgb))
        elif family == "tamura":
            values.append(vision.tamura_coarseness(gray))
            values.append(vision.tamura_directionality(gray).value)
        elif family == "face":
            boxes = [vision.FaceBox(**b) for b in load_face_boxes(rec.image_path)]
            ff = vision.face_features(boxes, rgb.shape[1], rgb.shape[0])
            values += [float(ff.count), ff.max_rel_area]
    return values


def cmd_features(args) -> int:
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for family in families:
        if family not in FEATURE_FAMILIES:
            raise errors.ConfigError(f"unknown feature family {family!r}")
    records = read_manifest(args.manifest)
    skipped = 0
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        header = ["id"] + [c for fam in families for c in FAMILY_COLUMNS[fam]]
        writer.writerow(header)
        for rec in records:
            try:
                values = _record_features(rec, families)
            except (errors.MemeforgeError, OSError) as exc:
                skipped += 1
                log.warning("skipping %s: %s", rec.id, exc)
                continue
            writer.writerow([rec.id] + [repr(v) for v in values])
    print(f"wrote features for {len(records) - skipped}/{len(records)} records"
          f" to {args.out}")
    return 0


def _needs(kind: str) -> tuple[bool, bool]:
    return kind in ("fusion", "cnn_only"), kind in ("fusion", "lstm_only")


def cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg.train = dataclasses.replace(cfg.train, seed=args.seed)
    kind = args.kind
    need_images, need_text = _needs(kind)
    table = cfg.load_combination(cfg.default_combination()) if need_text else None
    model_cfg = model_config_for_table(cfg, table)
    records = read_manifest(args.manifest)
    if need_text and any(r.caption_raw is None for r in records):
        raise errors.ConfigError("manifest has records without captions; run ocr first")
    cfg_for_data = dataclasses.replace(cfg, model=model_cfg)
    images, seqs, _, onehot = prepare_dataset(records, cfg_for_data, table,
                                              need_images, need_text)
    params = build_model(kind, model_cfg, seed=cfg.train.seed)
    params, history = train(params, model_cfg, kind, images, seqs, onehot, cfg.train)
    save_checkpoint(args.out, kind, model_cfg, params)
    history_path = Path(args.out).with_suffix(".history.csv")
    with open(history_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss", "accuracy"])
        for h in history:
            writer.writerow([h.epoch, repr(h.loss), repr(h.accuracy)])
    final_acc = history[-1].accuracy if history else float("nan")
    print(f"checkpoint written to {args.out}; final train accuracy {final_acc:.3f}")
    return 0


def _eval_neural(cfg: RunConfig, records, kind: str, k: int, seed: int):
    rows = []
    need_images, need_text = _needs(kind)
    if not need_text:
        combos = [None]
    elif kind == "fusion":  # one Table-6-style row per configured combination
        combos = cfg.combinations or [cfg.default_combination()]
    else:
        combos = [cfg.default_combination()]
    for combo in combos:
        table = cfg.load_combination(list(combo)) if combo else None
        model_cfg = model_config_for_table(cfg, table)
        cfg_for_data = dataclasses.replace(cfg, model=model_cfg)
        images, seqs, labels, onehot = prepare_dataset(
            records, cfg_for_data, table, need_images, need_text)

        def trainer(train_idx, test_idx):
            fold_seed_cfg = dataclasses.replace(cfg.train, seed=seed)
            params = build_model(kind, model_cfg, seed=fold_seed_cfg.seed)
            params, _ = train(
                params, model_cfg, kind,
                None if images is None else images[train_idx],
                None if seqs is None else seqs[train_idx],
                onehot[train_idx], fold_seed_cfg)
            probs = predict_batch(
                params, model_cfg, kind,
                None if images is None else images[test_idx],
                None if seqs is None else seqs[test_idx])
            return probs.argmax(axis=1)

        pooled, per_fold, _ = metrics.cross_validate(trainer, labels, k=k, seed=seed,
                                                     n_classes=cfg.model.classes)
        name = "+".join(combo) if combo else kind
        rows.append((name, pooled, per_fold))
    return rows


def _eval_baseline(cfg: RunConfig, records, kind: str, family: str, k: int, seed: int):
    families = [f.strip() for f in family.split(",") if f.strip()]
    x = []
    labels = []
    for rec in records:
        x.append(_record_features(rec, families))
        labels.append(LABEL_INDEX[rec.label])
    x = np.array(x, dtype=np.float64)
    labels = np.array(labels, dtype=np.int64)

    def trainer(train_idx, test_idx):
        x_tr, mean, std = standardize(x[train_idx])
        x_te = apply_standardize(x[test_idx], mean, std)
        if kind == "svm":
            model = svm_train(x_tr, labels[train_idx], cfg.svm, seed=seed)
            return svm_predict(model, x_te)
        rf_cfg = dataclasses.replace(cfg.rf, seed=seed)
        model = rf_train(x_tr, labels[train_idx], rf_cfg)
        return rf_predict(model, x_te)

    pooled, per_fold, _ = metrics.cross_validate(trainer, labels, k=k, seed=seed,
                                                 n_classes=len(LABELS))
    return [(f"{kind}:{family}", pooled, per_fold)]


def _report_payload(kind: str, k: int, seed: int, rows) -> dict:
    return {
        "kind": kind,
        "k": k,
        "seed": seed,
        "rows": [
            {
                "name": name,
                "precision": pooled.macro_precision,
                "recall": pooled.macro_recall,
                "f1": pooled.macro_f1,
                "per_class": pooled.to_dict()["per_class"],
                "per_fold": [r.to_dict() for r in per_fold],
            }
            for name, pooled, per_fold in rows
        ],
    }


def _report_text(payload: dict) -> str:
    lines = [f"{'Features':<24}{'Precision':>12}{'Recall':>12}{'F1-Score':>12}"]
    for row in payload["rows"]:
        lines.append(f"{row['name']:<24}{row['precision']:>12.3f}"
                     f"{row['recall']:>12.3f}{row['f1']:>12.3f}")
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    cfg = RunConfig.from_file(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    records = read_manifest(args.manifest)
    if any(r.label is None for r in records):
        raise errors.ConfigError("eval requires a fully labeled manifest")
    kind_map = {"fusion": "fusion", "cnn": "cnn_only", "lstm": "lstm_only"}
    if args.kind in kind_map:
        rows = _eval_neural(cfg, records, kind_map[args.kind], args.k, seed)
    elif args.kind in ("svm", "rf"):
        if not args.family:
            raise errors.ConfigError("baseline eval requires --family")
        rows = _eval_baseline(cfg, records, args.kind, args.family, args.k, seed)
    else:
        raise errors.ConfigError(f"unknown eval kind {args.kind!r}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = _report_payload(args.kind, args.k, seed, rows)
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    text = _report_text(payload)
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_predict(args) -> int:
    if args.caption is None and not args.ocr:
        raise errors.ConfigError("provide --caption or --ocr")
    kind, model_cfg, params = load_checkpoint(args.model)
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg = dataclasses.replace(cfg, model=model_cfg)
    try:
        with open(args.image, "rb") as f:
            img_bytes = f.read()
    except FileNotFoundError as exc:
        raise errors.MalformedImage(f"cannot read image {args.image}") from exc
    image = load_image_tensor(args.image, cfg) if kind != "lstm_only" else None
    seq = None
    if kind != "cnn_only":
        if args.ocr:
            caption = ocr.extract_remote(Path(args.image).stem, img_bytes, cfg.ocr).raw_text
        else:
            caption = args.caption
        table = cfg.load_combination(cfg.default_combination())
        if table.dim != model_cfg.embed_dim:
            raise errors.ConfigError(
                f"embedding dim {table.dim} != checkpoint embed_dim {model_cfg.embed_dim}")
        seq = caption_to_sequence(caption, cfg.load_lexicons(), table, model_cfg.max_len)
    probs = predict(params, model_cfg, kind, image, seq)
    label = LABELS[int(probs.argmax())]
    for name, p in zip(LABELS, probs):
        print(f"{name}: {p:.6f}")
    print(f"label: {label}")
    return 0


def cmd_report(args) -> int:
    records = read_manifest(args.manifest)
    counts = {label: 0 for label in LABELS}
    for rec in records:
        if rec.label in counts:
            counts[rec.label] += 1
    print("Class distribution")
    for label in LABELS:
        print(f"  {label:<16}{counts[label]:>6}")
    print(f"  {'total':<16}{sum(counts.values()):>6}")

    annotated = [r for r in records if r.annotator_labels]
    if annotated:
        n_raters = len(annotated[0].annotator_labels)
        columns = [[r.annotator_labels[i] for r in annotated] for i in range(n_raters)]
        print("\nCohen's kappa (pairwise)")
        header = "      " + "".join(f"{'A' + str(j + 1):>8}" for j in range(n_raters))
        print(header)
        for i in range(n_raters):
            cells = []
            for j in range(n_raters):
                if i == j:
                    cells.append(f"{'-':>8}")
                else:
                    cells.append(f"{metrics.cohen_kappa(columns[i], columns[j]):>8.3f}")
            print(f"  A{i + 1:<3}" + "".join(cells))
        fk = metrics.fleiss_kappa([r.annotator_labels for r in annotated])
        print(f"\nFleiss's kappa: {fk.value:.3f}")

    captioned = [r for r in records if r.caption_raw]
    if captioned:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        lex = cfg.load_lexicons()
        from . import textproc
        lang_counts: dict[str, int] = {}
        for rec in captioned:
            seq = textproc.normalize_caption(rec.caption_raw, lex)
            for tag in seq.lang_tags or []:
                if tag in (textproc.LANG_HINDI, textproc.LANG_ENGLISH):
                    lang_counts[tag] = lang_counts.get(tag, 0) + 1
        if lang_counts:
            print(f"\nMultilingual index: {metrics.m_index(lang_counts):.3f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memeforge",
                                     description="Hinglish meme classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a JSONL manifest from images + labels CSV")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ocr", help="fill captions via remote OCR or offline file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--offline", help="offline captions JSONL")
    p.add_argument("--out", help="output manifest (default: in place)")
    p.set_defaults(func=cmd_ocr)

    p = sub.add_parser("features", help="extract classical feature families to CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--families", required=True,
                   help="comma-separated subset of glcm,colorfulness,tamura,face")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--kind", required=True, choices=["fusion", "cnn_only", "lstm_only"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated evaluation report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--kind", required=True,
                   choices=["fusion", "cnn", "lstm", "svm", "rf"])
    p.add_argument("--family", help="feature families for baseline kinds")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify a single meme")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--caption")
    p.add_argument("--ocr", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="corpus statistics (distribution, agreement, M-index)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code else 0
    try:
        return args.func(args)
    except errors.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except DATA_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DATA_ERROR
    except errors.MemeforgeError as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
