import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memeforge import textproc as tp
from memeforge.errors import EmptyFile, InconsistentDim


# --- strip_noise ---

def test_strip_noise_example():
    assert tp.strip_noise("arre @user yeh #meme dekho http://x.co 123 lol") == \
        "arre yeh dekho lol"


def test_strip_noise_keeps_inline_digits():
    # numbers glued to words are not standalone numeric tokens
    assert tp.strip_noise("top10 memes") == "top10 memes"


def test_strip_noise_www_url():
    assert tp.strip_noise("see www.example.com/page now") == "see now"


# --- emoticons ---

def test_replace_emoticons_longest_first(lexicons):
    emap = {":)": "smile", ":))": "smile"}
    assert tp.replace_emoticons("ok :)) done", emap) == "ok smile done"


def test_replace_emoticons_xd(lexicons):
    assert tp.replace_emoticons("kya scene hai XD", lexicons.emoticon_map) == \
        "kya scene hai laughing"


def test_replace_emoticons_empty_map():
    assert tp.replace_emoticons("hi :)", {}) == "hi :)"


# --- transliteration ---

def test_transliterate_passthrough_ascii(lexicons):
    s = "plain ascii text"
    assert tp.transliterate_devanagari(s, lexicons.translit_table) == s


def test_transliterate_known_chars(lexicons):
    out = tp.transliterate_devanagari("क", lexicons.translit_table)
    assert out == lexicons.translit_table["क"]


def test_transliterate_unmapped_dropped():
    out = tp.transliterate_devanagari("aक़b", {})  # U+0958, not in table
    assert out == "ab"


def test_transliterate_no_devanagari_left(lexicons):
    out = tp.transliterate_devanagari("नमस्ते bhai", lexicons.translit_table)
    assert not tp._DEVANAGARI_RE.search(out)


# --- tokenize ---

def test_tokenize_lowercase_and_punct():
    seq = tp.tokenize_and_filter("Hello, WORLD! foo-bar", set())
    assert seq.tokens == ["hello", "world", "foo", "bar"]


def test_tokenize_stopwords_removed():
    seq = tp.tokenize_and_filter("yeh meme hai bhai", {"hai", "yeh"})
    assert seq.tokens == ["meme", "bhai"]


def test_tokenize_underscore_is_separator():
    assert tp.tokenize_and_filter("foo_bar", set()).tokens == ["foo", "bar"]


# --- translate ---

def test_translate_tags():
    seq = tp.TokenSequence(["kab", "when", "zzzq"])
    out = tp.translate_tokens(seq, {"kab": "when"}, {"when"})
    assert out.tokens == ["when", "when", "zzzq"]
    assert out.lang_tags == [tp.LANG_HINDI, tp.LANG_ENGLISH, tp.LANG_OTHER]


def test_translate_empty_sequence():
    out = tp.translate_tokens(tp.TokenSequence([]), {"a": "b"})
    assert out.tokens == [] and out.lang_tags == []


def test_token_sequence_tag_length_checked():
    with pytest.raises(ValueError):
        tp.TokenSequence(["a"], ["hindi", "other"])


# --- full chain ---

def test_normalize_caption_table_example(lexicons):
    seq = tp.normalize_caption("Udi baba, Mark, homse kab milega", lexicons)
    assert "when" in seq.tokens  # kab -> when
    assert "us" in seq.tokens  # homse -> us
    assert tp.LANG_HINDI in seq.lang_tags


def test_normalize_caption_noise_and_emoticons(lexicons):
    seq = tp.normalize_caption("#tag bahut swad XD http://a.b", lexicons)
    assert "tasty" in seq.tokens
    assert "laughing" in seq.tokens
    assert all("tag" != t for t in seq.tokens)


# --- embeddings ---

def write_vec(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_embedding_table(tmp_path):
    p = write_vec(tmp_path / "a.vec", ["foo 1 2 3", "bar 0 0 1"])
    table = tp.load_embedding_table(p)
    assert table.dim == 3
    assert np.allclose(table.vectors["foo"], [1, 2, 3])
    assert table.name == "a"


def test_load_embedding_inconsistent_dim(tmp_path):
    p = write_vec(tmp_path / "a.vec", ["foo 1 2 3", "bar 1 2"])
    with pytest.raises(InconsistentDim):
        tp.load_embedding_table(p)


def test_load_embedding_empty_file(tmp_path):
    p = tmp_path / "e.vec"
    p.write_text("", encoding="utf-8")
    with pytest.raises(EmptyFile):
        tp.load_embedding_table(p)


def test_load_embedding_duplicate_first_wins(tmp_path):
    p = write_vec(tmp_path / "a.vec", ["foo 1 2", "foo 9 9"])
    table = tp.load_embedding_table(p)
    assert np.allclose(table.vectors["foo"], [1, 2])


def test_combine_tables_union_and_zero_fill(tmp_path):
    a = tp.EmbeddingTable(2, {"x": np.array([1.0, 2.0])}, "a")
    b = tp.EmbeddingTable(1, {"y": np.array([5.0])}, "b")
    c = tp.combine_tables(a, b)
    assert c.dim == 3
    assert np.allclose(c.vectors["x"], [1, 2, 0])
    assert np.allclose(c.vectors["y"], [0, 0, 5])
    assert c.name == "a+b"


def test_embed_sequence_padding_and_oov():
    table = tp.EmbeddingTable(2, {"a": np.array([1.0, 1.0])})
    m = tp.embed_sequence(tp.TokenSequence(["a", "zz", "a"]), table, max_len=5)
    assert m.data.shape == (5, 2)
    assert m.valid_len == 3
    assert np.allclose(m.data[0], [1, 1])
    assert np.allclose(m.data[1], [0, 0])  # OOV -> zeros
    assert np.allclose(m.data[3:], 0.0)  # padding


def test_embed_sequence_truncation():
    table = tp.EmbeddingTable(1, {"a": np.array([2.0])})
    m = tp.embed_sequence(tp.TokenSequence(["a"] * 10), table, max_len=4)
    assert m.valid_len == 4
    assert np.allclose(m.data, 2.0)


@settings(max_examples=30, deadline=None)
@given(st.text(max_size=80))
def test_normalize_caption_total(lexicons, s):
    # the chain should never raise and always returns matched tags
    seq = tp.normalize_caption(s, lexicons)
    assert len(seq.tokens) == len(seq.lang_tags)
    assert all(t == t.lower() for t in seq.tokens)
