"""Synthetic meme generator for tests and demos.

Produces small PNG memes with class-correlated background colors and
rendered captions, plus the matching labels CSV and offline captions JSONL.
No real dataset images ship with this package.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .manifest import LABELS

# background color families per class, caption stubs are class-correlated too
_CLASS_COLORS = {
    "non_offensive": (60, 160, 60),
    "satirical": (60, 60, 180),
    "hate_inducing": (190, 60, 60),
}
_CLASS_CAPTIONS = {
    "non_offensive": ["kab milega dost", "ye acha hai", "paani bahut acha"],
    "satirical": ["neta pogo dekhta hai", "chunav drama dekho", "ye sarkar comedy hai"],
    "hate_inducing": ["ye log bura hai", "desh se niklo", "un logon se nafrat"],
}


def generate_memes(out_dir, per_class: int = 10, size: int = 64,
                   seed: int = 0, annotators: bool = False):
    """Write per_class memes per label under out_dir.

    Creates images/, labels.csv and captions.jsonl; returns the two file paths.
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    captions = []
    for label in LABELS:
        base = np.array(_CLASS_COLORS[label], dtype=np.float64)
        for i in range(per_class):
            meme_id = f"{label}_{i:03d}"
            jitter = rng.integers(-25, 26, size=3)
            color = tuple(int(c) for c in np.clip(base + jitter, 0, 255))
            img = Image.new("RGB", (size, size), color)
            draw = ImageDraw.Draw(img)
            caption = _CLASS_CAPTIONS[label][i % len(_CLASS_CAPTIONS[label])]
            draw.text((2, size // 3), caption[:12], fill=(255, 255, 255))
            rel = f"{meme_id}.png"
            img.save(img_dir / rel)
            row = [meme_id, rel, label]
            if annotators:
                row += [label, label, label]
            rows.append(row)
            captions.append({"id": meme_id, "text": caption})
    labels_csv = out_dir / "labels.csv"
    with open(labels_csv, "w", encoding="utf-8", newline="") as f:
        csv.writer(f).writerows(rows)
    captions_jsonl = out_dir / "captions.jsonl"
    with open(captions_jsonl, "w", encoding="utf-8") as f:
        for rec in captions:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return labels_csv, captions_jsonl
