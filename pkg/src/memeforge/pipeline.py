"""Run configuration and dataset preparation shared by the CLI commands."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import textproc, vision
from .baselines import RfConfig, SvmConfig
from .errors import ConfigError
from .manifest import LABEL_INDEX, ManifestRecord
from .nn import FusionModelConfig, TrainConfig
from .ocr import OcrConfig

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    model: FusionModelConfig = field(default_factory=FusionModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    rf: RfConfig = field(default_factory=RfConfig)
    ocr: OcrConfig = field(default_factory=lambda: OcrConfig(mode="offline"))
    lexicons: dict = field(default_factory=dict)  # step name -> path override
    embeddings: dict = field(default_factory=dict)  # table name -> file path
    combinations: list = field(default_factory=list)  # list of name lists
    train_combination: list = field(default_factory=list)
    cnn_input: str = "rgb"  # rgb | threshold
    seed: int = 0

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        def build(klass, key):
            return klass(**raw.get(key, {}))

        try:
            cfg = cls(
                model=build(FusionModelConfig, "model"),
                train=build(TrainConfig, "train"),
                svm=build(SvmConfig, "svm"),
                rf=build(RfConfig, "rf"),
                ocr=OcrConfig(**{"mode": "offline", **raw.get("ocr", {})}),
                lexicons=raw.get("lexicons", {}),
                embeddings=raw.get("embeddings", {}),
                combinations=raw.get("combinations", []),
                train_combination=raw.get("train_combination", []),
                cnn_input=raw.get("cnn_input", "rgb"),
                seed=int(raw.get("seed", 0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad run config: {exc}") from exc
        if cfg.cnn_input not in ("rgb", "threshold"):
            raise ConfigError(f"cnn_input must be rgb or threshold, got {cfg.cnn_input!r}")
        return cfg

    def load_lexicons(self) -> textproc.LexiconSet:
        lx = self.lexicons
        return textproc.load_lexicons(
            emoticons=lx.get("emoticons"), translit=lx.get("translit"),
            hinglish=lx.get("hinglish"), stopwords=lx.get("stopwords"),
            english=lx.get("english"))

    def load_combination(self, names: list[str]) -> textproc.EmbeddingTable:
        if not names:
            raise ConfigError("empty embedding combination")
        tables = []
        for name in names:
            if name not in self.embeddings:
                raise ConfigError(f"embedding table {name!r} not configured")
            tables.append(textproc.load_embedding_table(self.embeddings[name], name=name))
        combined = tables[0]
        for t in tables[1:]:
            combined = textproc.combine_tables(combined, t)
        return combined

    def default_combination(self) -> list[str]:
        if self.train_combination:
            return self.train_combination
        if self.combinations:
            return list(self.combinations[0])
        raise ConfigError("no embedding combination configured")


def load_image_tensor(image_path, cfg: RunConfig) -> np.ndarray:
    """Decode, rescale to the model input size, normalize to [0, 1].

    With cnn_input=threshold the CNN sees the OCR-style binarized image
    replicated across channels instead of the raw RGB."""
    with open(image_path, "rb") as f:
        rgb = vision.decode_image(f.read())
    model = cfg.model
    rgb = vision.rescale(rgb, model.img_w, model.img_h)
    if cfg.cnn_input == "threshold":
        binary = vision.adaptive_threshold(vision.to_grayscale(rgb))
        rgb = np.repeat(binary[:, :, None], model.img_channels, axis=2)
    return rgb.astype(np.float64) / 255.0


def caption_to_sequence(caption: str, lex: textproc.LexiconSet,
                        table: textproc.EmbeddingTable, max_len: int) -> np.ndarray:
    seq = textproc.normalize_caption(caption or "", lex)
    return textproc.embed_sequence(seq, table, max_len).data


def prepare_dataset(records: list[ManifestRecord], cfg: RunConfig,
                    table: textproc.EmbeddingTable | None,
                    need_images: bool, need_text: bool):
    """Assemble (images, seqs, labels, onehot) arrays for training/eval."""
    lex = cfg.load_lexicons() if need_text else None
    images = [] if need_images else None
    seqs = [] if need_text else None
    labels = []
    for rec in records:
        if rec.label is None:
            raise ConfigError(f"record {rec.id} is unlabeled")
        if need_images:
            images.append(load_image_tensor(rec.image_path, cfg))
        if need_text:
            seqs.append(caption_to_sequence(rec.caption_raw or "", lex, table,
                                            cfg.model.max_len))
        labels.append(LABEL_INDEX[rec.label])
    labels = np.array(labels, dtype=np.int64)
    onehot = np.zeros((len(labels), cfg.model.classes))
    onehot[np.arange(len(labels)), labels] = 1.0
    images_arr = np.stack(images) if need_images else None
    seqs_arr = np.stack(seqs) if need_text else None
    return images_arr, seqs_arr, labels, onehot


def model_config_for_table(cfg: RunConfig,
                           table: textproc.EmbeddingTable | None) -> FusionModelConfig:
    """Model config with embed_dim matched to the loaded embedding table."""
    if table is None:
        return cfg.model
    return dataclasses.replace(cfg.model, embed_dim=table.dim)
