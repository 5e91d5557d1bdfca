import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from memeforge import synthetic, textproc  # noqa: E402


@pytest.fixture(scope="session")
def lexicons():
    return textproc.load_lexicons()


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """30 synthetic memes (10 per class) with captions and labels."""
    root = tmp_path_factory.mktemp("memes30")
    labels_csv, captions = synthetic.generate_memes(root, per_class=10,
                                                    size=32, seed=7)
    return {"root": root, "labels_csv": labels_csv, "captions": captions,
            "images": root / "images"}


def caption_vocab(captions_path) -> set[str]:
    import json
    lex = textproc.load_lexicons()
    vocab = set()
    with open(captions_path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            vocab.update(textproc.normalize_caption(rec["text"], lex).tokens)
    return vocab


def write_embeddings(path, vocab, dim=16, seed=0):
    import numpy as np
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as f:
        for tok in sorted(vocab):
            vals = " ".join(f"{v:.6f}" for v in rng.normal(size=dim))
            f.write(f"{tok} {vals}\n")
    return path


@pytest.fixture(scope="session")
def toy_embeddings(small_dataset, tmp_path_factory):
    """A 16-dim embedding file covering the synthetic caption vocabulary."""
    root = tmp_path_factory.mktemp("emb")
    vocab = caption_vocab(small_dataset["captions"])
    return write_embeddings(root / "toy.vec", vocab, dim=16, seed=1)
