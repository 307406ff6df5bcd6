"""Pseudo quality-estimation dataset generation.

Turns a monolingual target-language corpus (via round-trip translation) or a
parallel corpus (via forward translation) into sentence-level HTER scores and
word-level OK/BAD tags.
"""

__version__ = "0.1.0"
