"""Word-level OK/BAD annotations derived from an edit script.

MT word and gap tags come straight from the shift-free hyp->ref script.
Source tags are composed through the pseudo-reference: a source token is BAD
when it is aligned to a reference position the MT output got wrong.
"""

from __future__ import annotations

from typing import Sequence

from .aligner import Alignment
from .errors import InconsistentLengthsError, InconsistentScriptError, InvalidAlignmentError
from .ter import Del, Match, Shift, Sub

OK = "OK"
BAD = "BAD"


def mt_tags(script: Sequence, mt_len: int) -> tuple[list[str], list[str]]:
    """Return ``(word_tags, gap_tags)`` for an MT sentence of ``mt_len`` tokens."""
    word: list[str | None] = [None] * mt_len
    gap = [OK] * (mt_len + 1)
    seen = 0  # MT tokens covered so far; the next gap index
    for op in script:
        if isinstance(op, Shift):
            raise InconsistentScriptError("mt_tags needs a shift-free script")
        if isinstance(op, Del):
            gap[min(seen, mt_len)] = BAD
            continue
        if op.hyp_idx != seen or op.hyp_idx >= mt_len:
            raise InconsistentScriptError(
                f"script op {op} out of order or range for mt_len={mt_len}"
            )
        word[seen] = OK if isinstance(op, Match) else BAD
        seen += 1
    if seen != mt_len:
        raise InconsistentScriptError(f"script covers {seen} MT tokens, expected {mt_len}")
    return word, gap


def source_tags(src_pe_links: Alignment, script: Sequence, src_len: int) -> list[str]:
    """Tag each source token BAD iff it links to an errorful reference position.

    A reference position is errorful when it is the ref side of a Sub or a
    Del in ``script``. Unlinked source tokens stay OK.
    """
    errorful = set()
    for op in script:
        if isinstance(op, Sub):
            errorful.add(op.ref_idx)
        elif isinstance(op, Del):
            errorful.add(op.ref_idx)
    tags = [OK] * src_len
    for i, j in src_pe_links.links:
        if not 0 <= i < src_len or not 0 <= j < src_pe_links.tgt_len:
            raise InvalidAlignmentError(f"link {i}-{j} out of range (src_len={src_len})")
        if j in errorful:
            tags[i] = BAD
    return tags


def interleave(word: Sequence[str], gap: Sequence[str]) -> list[str]:
    """WMT layout: ``g0 w0 g1 w1 ... w(n-1) gn``."""
    if len(gap) != len(word) + 1:
        raise InconsistentLengthsError(
            f"gap tags ({len(gap)}) must be one longer than word tags ({len(word)})"
        )
    out = [gap[0]]
    for w, g in zip(word, gap[1:]):
        out.append(w)
        out.append(g)
    return out


def split_interleaved(tags: Sequence[str]) -> tuple[list[str], list[str]]:
    if len(tags) % 2 != 1:
        raise InconsistentLengthsError(f"interleaved tag line must have odd length, got {len(tags)}")
    return list(tags[1::2]), list(tags[0::2])
