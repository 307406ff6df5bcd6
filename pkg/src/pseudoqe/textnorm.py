"""Normalization and tokenization into a stable token space.

Edit distance and alignment both run over the tokens produced here, so the
rules are deliberately simple and deterministic (tercom-style: lowercase,
split punctuation, collapse whitespace).
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

from .errors import InputEncodingError

TokenSeq = list[str]


@dataclass(frozen=True)
class NormPolicy:
    lowercase: bool = True
    split_punct: bool = True
    unicode_form: bool = True  # NFC composition

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "split_punct": self.split_punct,
            "unicode_form": self.unicode_form,
        }


DEFAULT_POLICY = NormPolicy()


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _split_punct(text: str) -> str:
    out = []
    n = len(text)
    for i, ch in enumerate(text):
        if _is_punct(ch):
            # keep "3.14" and "1,000" intact
            if (
                ch in ".,"
                and 0 < i < n - 1
                and text[i - 1].isdigit()
                and text[i + 1].isdigit()
            ):
                out.append(ch)
            else:
                out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out)


def normalize(text: str | bytes, policy: NormPolicy = DEFAULT_POLICY) -> str:
    """Normalize ``text`` according to ``policy``.

    Bytes are decoded as UTF-8; undecodable input raises
    :class:`InputEncodingError`.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputEncodingError(f"input is not valid UTF-8: {exc}") from exc
    if policy.unicode_form:
        text = unicodedata.normalize("NFC", text)
    if policy.lowercase:
        text = text.lower()
        if policy.unicode_form:
            # lowercasing can produce decomposed sequences (e.g. U+0130)
            text = unicodedata.normalize("NFC", text)
    if policy.split_punct:
        text = _split_punct(text)
    return " ".join(text.split())


def tokenize(text: str | bytes, policy: NormPolicy = DEFAULT_POLICY) -> TokenSeq:
    return normalize(text, policy).split()


def join(tokens: TokenSeq) -> str:
    return " ".join(tokens)
