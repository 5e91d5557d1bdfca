"""JSONL dataset manifest: one record per meme."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateId, MissingImage, UnknownLabel

LABELS = ("non_offensive", "satirical", "hate_inducing")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}


@dataclass
class ManifestRecord:
    id: str
    image_path: str
    label: str | None = None
    caption_raw: str | None = None
    annotator_labels: list[str] | None = None
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        d = {"id": self.id, "image_path": self.image_path}
        if self.label is not None:
            d["label"] = self.label
        if self.caption_raw is not None:
            d["caption_raw"] = self.caption_raw
        if self.annotator_labels is not None:
            d["annotator_labels"] = self.annotator_labels
        if self.warnings:
            d["warnings"] = self.warnings
        return json.dumps(d, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRecord":
        return cls(id=str(d["id"]), image_path=str(d["image_path"]),
                   label=d.get("label"), caption_raw=d.get("caption_raw"),
                   annotator_labels=d.get("annotator_labels"),
                   warnings=list(d.get("warnings", [])))


def write_manifest(records: list[ManifestRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")


def read_manifest(path) -> list[ManifestRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(ManifestRecord.from_dict(json.loads(line)))
    return records


def ingest(image_dir, labels_csv) -> list[ManifestRecord]:
    """Build manifest records from a labels CSV with rows
    id,relative_path,label[,a1,a2,a3]."""
    image_dir = Path(image_dir)
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    with open(labels_csv, encoding="utf-8", newline="") as f:
        for row_no, row in enumerate(csv.reader(f), 1):
            if not row or (row_no == 1 and row[0].strip().lower() == "id"):
                continue
            if len(row) not in (3, 6):
                raise UnknownLabel(f"row {row_no}: expected 3 or 6 columns, got {len(row)}")
            meme_id, rel_path, label = (c.strip() for c in row[:3])
            if meme_id in seen:
                raise DuplicateId(f"row {row_no}: duplicate id {meme_id!r}")
            seen.add(meme_id)
            if label not in LABELS:
                raise UnknownLabel(f"row {row_no}: unknown label {label!r}")
            image_path = image_dir / rel_path
            if not image_path.is_file():
                raise MissingImage(f"row {row_no}: {image_path} not found")
            annotators = None
            if len(row) == 6:
                annotators = [c.strip() for c in row[3:6]]
                for a in annotators:
                    if a not in LABELS:
                        raise UnknownLabel(f"row {row_no}: unknown annotator label {a!r}")
            records.append(ManifestRecord(id=meme_id, image_path=str(image_path),
                                          label=label, annotator_labels=annotators))
    return records


def load_face_boxes(image_path) -> list[dict]:
    """Read the optional X.faces.json sidecar next to image X.<ext>."""
    sidecar = Path(image_path).with_suffix(".faces.json")
    if not sidecar.is_file():
        return []
    with open(sidecar, encoding="utf-8") as f:
        return json.load(f)
