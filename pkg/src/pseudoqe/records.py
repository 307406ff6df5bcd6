"""Data carried between the pipeline and the writers."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class QeRecord:
    src: list[str]
    mt: list[str]
    pe: list[str]
    hter: float
    src_tags: list[str] = field(default_factory=list)
    mt_word_tags: list[str] = field(default_factory=list)
    gap_tags: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    # full TerResult for in-process checks; never serialized
    ter: object = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "src": list(self.src),
            "mt": list(self.mt),
            "pe": list(self.pe),
            "hter": self.hter,
            "src_tags": list(self.src_tags),
            "mt_word_tags": list(self.mt_word_tags),
            "gap_tags": list(self.gap_tags),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QeRecord":
        return cls(
            src=list(obj["src"]),
            mt=list(obj["mt"]),
            pe=list(obj["pe"]),
            hter=float(obj["hter"]),
            src_tags=list(obj["src_tags"]),
            mt_word_tags=list(obj["mt_word_tags"]),
            gap_tags=list(obj["gap_tags"]),
            meta=dict(obj.get("meta", {})),
        )


@dataclass
class RunStats:
    input_lines: int = 0
    records_emitted: int = 0
    skipped: int = 0
    skipped_lines: list = field(default_factory=list)
    backend_calls: int = 0
    cache_hits: int = 0
    mean_hter: float = 0.0
    tag_counts: dict = field(default_factory=dict)
    aligner_skipped_pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "input_lines": self.input_lines,
            "records_emitted": self.records_emitted,
            "skipped": self.skipped,
            "skipped_lines": list(self.skipped_lines),
            "backend_calls": self.backend_calls,
            "cache_hits": self.cache_hits,
            "mean_hter": self.mean_hter,
            "tag_counts": self.tag_counts,
            "aligner_skipped_pairs": self.aligner_skipped_pairs,
        }
