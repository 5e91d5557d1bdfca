"""Caption normalization for code-switched (Hinglish) text.

Pipeline order: strip noise -> replace emoticons -> transliterate Devanagari
-> tokenize + stopword filter -> dictionary translation with language tags.
The final step maps tokens to padded embedding matrices.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import EmptyFile, InconsistentDim

log = logging.getLogger(__name__)

LANG_HINDI = "hindi"
LANG_ENGLISH = "english"
LANG_OTHER = "other"

_DEVANAGARI_RE = re.compile(r"[ऀ-ॿ]")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
_NUMBER_TOKEN_RE = re.compile(r"(?<!\S)\d+(?!\S)")


@dataclass
class TokenSequence:
    tokens: list[str]
    lang_tags: list[str] | None = None

    def __post_init__(self):
        if self.lang_tags is not None and len(self.lang_tags) != len(self.tokens):
            raise ValueError("lang_tags length must match tokens")


@dataclass
class LexiconSet:
    emoticon_map: dict[str, str] = field(default_factory=dict)
    translit_table: dict[str, str] = field(default_factory=dict)
    hinglish_dict: dict[str, str] = field(default_factory=dict)
    stopwords: set[str] = field(default_factory=set)
    english_lexicon: set[str] = field(default_factory=set)


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    name: str = "embedding"


@dataclass
class SequenceMatrix:
    data: np.ndarray  # max_len x dim
    valid_len: int

    @property
    def max_len(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# lexicon loading
# ---------------------------------------------------------------------------

def _read_tsv(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("\t")
            out[key] = value
    return out


def _read_wordlist(path) -> set[str]:
    with open(path, encoding="utf-8") as f:
        return {line.strip().lower() for line in f if line.strip()}


def load_lexicons(emoticons=None, translit=None, hinglish=None,
                  stopwords=None, english=None) -> LexiconSet:
    """Load lexicon files; any path left as None falls back to the bundled data."""
    data_dir = resources.files("memeforge").joinpath("data")
    return LexiconSet(
        emoticon_map=_read_tsv(emoticons or data_dir / "emoticons.tsv"),
        translit_table=_read_tsv(translit or data_dir / "devanagari_translit.tsv"),
        hinglish_dict=_read_tsv(hinglish or data_dir / "hinglish_dict.tsv"),
        stopwords=_read_wordlist(stopwords or data_dir / "stopwords.txt"),
        english_lexicon=_read_wordlist(english or data_dir / "english_lexicon.txt"),
    )


# ---------------------------------------------------------------------------
# normalization steps
# ---------------------------------------------------------------------------

def strip_noise(raw: str) -> str:
    """Remove hashtags, URLs, @mentions and standalone numeric tokens."""
    s = _URL_RE.sub(" ", raw)
    s = _MENTION_RE.sub(" ", s)
    s = _HASHTAG_RE.sub(" ", s)
    s = _NUMBER_TOKEN_RE.sub(" ", s)
    return " ".join(s.split())


def replace_emoticons(s: str, emoticon_map: dict[str, str]) -> str:
    """Replace each maximal emoticon occurrence with its description,
    longest match first."""
    if not emoticon_map:
        return s
    keys = sorted(emoticon_map, key=len, reverse=True)
    pattern = re.compile("|".join(re.escape(k) for k in keys))
    return pattern.sub(lambda m: emoticon_map[m.group(0)], s)


def transliterate_devanagari(s: str, table: dict[str, str]) -> str:
    """Map Devanagari graphemes through `table` left to right; unmapped
    Devanagari characters are dropped (with a logged count)."""
    out = []
    dropped = 0
    for ch in s:
        if _DEVANAGARI_RE.match(ch):
            if ch in table:
                out.append(table[ch])
            else:
                dropped += 1
        else:
            out.append(ch)
    if dropped:
        log.warning("transliteration dropped %d unmapped Devanagari characters", dropped)
    return "".join(out)


_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize_and_filter(s: str, stopwords: set[str]) -> TokenSequence:
    """Lowercase, split on whitespace/punctuation, drop stopwords."""
    tokens = [t for t in _TOKEN_RE.findall(s.lower()) if t and t not in stopwords]
    return TokenSequence(tokens)


def translate_tokens(seq: TokenSequence, hinglish_dict: dict[str, str],
                     english_lexicon: set[str] = frozenset()) -> TokenSequence:
    """Word-level Hinglish -> English translation with language tagging.

    A token found in the dictionary is tagged hindi (and replaced); a token
    in the English lexicon is tagged english; everything else passes through
    tagged other.
    """
    tokens, tags = [], []
    for tok in seq.tokens:
        if tok in hinglish_dict:
            tokens.append(hinglish_dict[tok])
            tags.append(LANG_HINDI)
        elif tok in english_lexicon:
            tokens.append(tok)
            tags.append(LANG_ENGLISH)
        else:
            tokens.append(tok)
            tags.append(LANG_OTHER)
    return TokenSequence(tokens, tags)


def normalize_caption(raw: str, lex: LexiconSet) -> TokenSequence:
    """Run the full normalization chain on one raw caption."""
    s = strip_noise(raw)
    s = replace_emoticons(s, lex.emoticon_map)
    s = transliterate_devanagari(s, lex.translit_table)
    seq = tokenize_and_filter(s, lex.stopwords)
    return translate_tokens(seq, lex.hinglish_dict, lex.english_lexicon)


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

def load_embedding_table(path, name: str | None = None) -> EmbeddingTable:
    """Parse a whitespace-separated 'token v1 ... vD' text file."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            token, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
                if dim == 0:
                    raise InconsistentDim(f"{path}:{line_no}: row has no values")
            elif len(vals) != dim:
                raise InconsistentDim(
                    f"{path}:{line_no}: expected {dim} values, got {len(vals)}")
            if token in vectors:
                log.warning("duplicate embedding token %r at line %d; keeping first",
                            token, line_no)
                continue
            vectors[token] = np.array([float(v) for v in vals])
    if dim is None:
        raise EmptyFile(str(path))
    return EmbeddingTable(dim=dim, vectors=vectors,
                          name=name or Path(str(path)).stem)


def combine_tables(a: EmbeddingTable, b: EmbeddingTable) -> EmbeddingTable:
    """Concatenate two tables over the union vocabulary; a token missing from
    one side gets an all-zero block for that side."""
    dim = a.dim + b.dim
    zeros_a = np.zeros(a.dim)
    zeros_b = np.zeros(b.dim)
    vectors = {}
    for tok in a.vectors.keys() | b.vectors.keys():
        va = a.vectors.get(tok, zeros_a)
        vb = b.vectors.get(tok, zeros_b)
        vectors[tok] = np.concatenate([va, vb])
    return EmbeddingTable(dim=dim, vectors=vectors, name=f"{a.name}+{b.name}")


def embed_sequence(seq: TokenSequence, table: EmbeddingTable,
                   max_len: int = 32) -> SequenceMatrix:
    """First max_len tokens to vectors (OOV -> zero vector), zero-padded."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    data = np.zeros((max_len, table.dim))
    oov = 0
    tokens = seq.tokens[:max_len]
    for i, tok in enumerate(tokens):
        vec = table.vectors.get(tok)
        if vec is None:
            oov += 1
        else:
            data[i] = vec
    if oov:
        log.debug("%d/%d tokens out of vocabulary", oov, len(tokens))
    return SequenceMatrix(data=data, valid_len=len(tokens))
