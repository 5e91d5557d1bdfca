"""memeforge: multimodal (image + Hinglish caption) meme classification pipeline."""

__version__ = "0.1.0"
