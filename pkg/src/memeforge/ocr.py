"""Caption extraction: remote OCR HTTP service or offline caption files.

The remote path POSTs the image to an ocr.space-style endpoint and joins the
parsed text regions with single spaces. The offline path reads a JSONL file
of {"id": ..., "text": ...} records, which keeps batch runs deterministic
and network-free.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass

import requests

from .errors import MissingCaption, OcrServiceError, OcrTimeout

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {429}


@dataclass
class OcrConfig:
    endpoint: str = "https://api.ocr.space/parse/image"
    api_key: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    mode: str = "remote"  # remote | offline

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class CaptionRecord:
    meme_id: str
    raw_text: str
    source: str  # remote | offline
    confidence: float | None = None

    def __post_init__(self):
        if not self.meme_id:
            raise ValueError("meme_id must be nonempty")


def _parse_ocr_response(body: dict) -> str:
    if body.get("IsErroredOnProcessing"):
        msgs = body.get("ErrorMessage") or body.get("ErrorDetails") or "unknown"
        raise OcrServiceError(f"service error flag set: {msgs}")
    results = body.get("ParsedResults") or []
    lines = []
    for region in results:
        text = (region.get("ParsedText") or "").strip()
        if text:
            lines.extend(text.split())
    return " ".join(lines)


def extract_remote(meme_id: str, img_bytes: bytes, cfg: OcrConfig,
                   post=requests.post, sleep=time.sleep) -> CaptionRecord:
    """POST the image to the OCR service; retries timeouts and 429s with
    exponential backoff (1s, 2s, 4s, ...). An empty parse is a warning, not
    an error."""
    attempts = max(1, cfg.max_retries)
    last_timeout = None
    for attempt in range(attempts):
        if attempt > 0:
            sleep(2.0 ** (attempt - 1))
        try:
            resp = post(
                cfg.endpoint,
                files={"file": (f"{meme_id}.png", img_bytes)},
                headers={"apikey": cfg.api_key},
                timeout=cfg.timeout,
            )
        except requests.Timeout as exc:
            last_timeout = exc
            continue
        status = getattr(resp, "status_code", 0)
        if status in RETRYABLE_STATUS:
            last_timeout = OcrServiceError(f"HTTP {status}")
            continue
        if not 200 <= status < 300:
            raise OcrServiceError(f"HTTP {status} from {cfg.endpoint}")
        try:
            body = resp.json()
        except (ValueError, json.JSONDecodeError) as exc:
            raise OcrServiceError(f"unparseable response body: {exc}") from exc
        text = _parse_ocr_response(body)
        if not text:
            log.warning("OCR returned no text for %s", meme_id)
        return CaptionRecord(meme_id=meme_id, raw_text=text, source="remote")
    raise OcrTimeout(
        f"{meme_id}: no response after {attempts} attempts") from last_timeout


def load_offline_captions(captions_file) -> dict[str, str]:
    """Read a JSONL captions file. Duplicate ids: last entry wins."""
    captions: dict[str, str] = {}
    with open(captions_file, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            meme_id = str(rec["id"])
            if meme_id in captions:
                log.warning("duplicate caption id %r at line %d; last entry wins",
                            meme_id, line_no)
            captions[meme_id] = str(rec["text"])
    return captions


def extract_offline(meme_id: str, captions_file) -> CaptionRecord:
    """Look up a caption in an offline JSONL file."""
    captions = load_offline_captions(captions_file)
    if meme_id not in captions:
        raise MissingCaption(f"{meme_id} not found in {captions_file}")
    return CaptionRecord(meme_id=meme_id, raw_text=captions[meme_id], source="offline")
