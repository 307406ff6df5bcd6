"""Corpus-to-QE orchestration.

Both modes run in three phases because aligner training needs the whole
corpus before any record can be tagged:

A. translate (batched, cache-aware, checkpointed);
B. train forward and reverse aligners on (source, pseudo-reference) pairs;
C. score and tag each record.

Monolingual mode back-translates each target sentence to get a pseudo-source
and forward-translates that to get the MT output; parallel mode only
forward-translates the given source.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from filelock import FileLock, Timeout

from . import aligner as al
from .errors import BackendUnavailableError, DegenerateLineError, NoTrainableDataError, OutputLockedError
from .ioformats import write_jsonl, write_manifest, write_wmt
from .mtbackend import Translator, cache_key
from .records import QeRecord, RunStats
from .tags import BAD, OK, mt_tags, source_tags
from .ter import ShiftParams, hter, levenshtein_align, ter_score
from .textnorm import NormPolicy, tokenize

log = logging.getLogger(__name__)

LOCK_NAME = ".pseudoqe.lock"
CHECKPOINT_NAME = "checkpoint.jsonl"
MODES = ("mono", "parallel")
LEVELS = ("word", "sentence", "both")


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "mono"
    level: str = "both"
    src_lang: str = "en"
    tgt_lang: str = "de"
    norm: NormPolicy = NormPolicy()
    shift: ShiftParams = ShiftParams()
    aligner: al.AlignerConfig = al.AlignerConfig()
    heuristic: str = "grow-diag-final-and"
    clip_hter: bool = False
    max_tokens: int = 200
    strict: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.src_lang == self.tgt_lang:
            raise ValueError("source and target language must differ")

    @property
    def word_level(self) -> bool:
        return self.level in ("word", "both")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "level": self.level,
            "src_lang": self.src_lang,
            "tgt_lang": self.tgt_lang,
            "norm_policy": self.norm.to_dict(),
            "shift_params": self.shift.to_dict(),
            "aligner": self.aligner.to_dict(),
            "heuristic": self.heuristic,
            "clip_hter": self.clip_hter,
            "max_tokens": self.max_tokens,
            "strict": self.strict,
        }


@dataclass
class _Item:
    line: int
    pe_text: str
    src_text: str = ""
    mt_text: str = ""
    keys: list = field(default_factory=list)


class Checkpoint:
    """JSONL log of lines whose translations are complete, with their cache keys."""

    def __init__(self, path: str | os.PathLike | None):
        self.path = Path(path) if path else None
        if self.path is not None and self.path.exists():
            done = sum(1 for _ in open(self.path, encoding="utf-8"))
            if done:
                log.info("resuming: checkpoint lists %d translated lines", done)
            self.path.unlink()

    def record(self, items: Sequence[_Item]) -> None:
        if self.path is None:
            return
        with open(self.path, "a", encoding="utf-8") as fh:
            for it in items:
                fh.write(json.dumps({"line": it.line, "keys": it.keys}) + "\n")


def _keep(line_no: int, token_lists: Sequence[list[str]], cfg: PipelineConfig,
          stats: RunStats) -> bool:
    """True when the line should be kept; otherwise count and log the skip."""
    reason = None
    if any(not toks for toks in token_lists):
        reason = "empty after normalization"
    elif any(len(toks) > cfg.max_tokens for toks in token_lists):
        reason = f"longer than max_tokens={cfg.max_tokens}"
    if reason is None:
        return True
    if cfg.strict:
        raise DegenerateLineError(f"line {line_no}: {reason}", line_no)
    log.warning("skipping line %d: %s", line_no, reason)
    stats.skipped += 1
    stats.skipped_lines.append(line_no)
    return False


def _translate(items: list[_Item], translator: Translator, cfg: PipelineConfig,
               checkpoint: Checkpoint, round_trip: bool) -> None:
    tc = translator.cfg
    chunk = tc.batch_size * tc.max_in_flight
    eid = translator.engine_id
    done = 0
    try:
        for start in range(0, len(items), chunk):
            part = items[start:start + chunk]
            if round_trip:
                back = translator.translate_batch([it.pe_text for it in part],
                                                  cfg.tgt_lang, cfg.src_lang)
                for it, s in zip(part, back):
                    it.src_text = s
            fwd = translator.translate_batch([it.src_text for it in part],
                                             cfg.src_lang, cfg.tgt_lang)
            for it, m in zip(part, fwd):
                it.mt_text = m
                it.keys = ([cache_key(eid, cfg.tgt_lang, cfg.src_lang, it.pe_text)] if round_trip
                           else []) + [cache_key(eid, cfg.src_lang, cfg.tgt_lang, it.src_text)]
            checkpoint.record(part)
            done += len(part)
    except BackendUnavailableError as exc:
        exc.completed_lines = [it.line for it in items[:done]]
        log.error("backend failed after %d of %d lines; checkpoint flushed", done, len(items))
        raise


def _assemble(items: list[_Item], translator: Translator, cfg: PipelineConfig,
              stats: RunStats) -> list[QeRecord]:
    toks = [(tokenize(it.src_text, cfg.norm), tokenize(it.mt_text, cfg.norm),
             tokenize(it.pe_text, cfg.norm)) for it in items]
    fwd = rev = None
    if cfg.word_level:
        bitext = [(src, pe) for src, _, pe in toks]
        fwd, rev = al.train_bidirectional(bitext, cfg.aligner)
        stats.aligner_skipped_pairs = fwd.skipped

    records = []
    for it, (src, mt, pe) in zip(items, toks):
        result = ter_score(mt, pe, cfg.shift)
        rec = QeRecord(
            src=src, mt=mt, pe=pe,
            hter=hter(result, cfg.clip_hter),
            meta={"mode": cfg.mode, "src_lang": cfg.src_lang, "tgt_lang": cfg.tgt_lang,
                  "engine": translator.engine_id, "line": it.line},
            ter=result,
        )
        if cfg.word_level:
            _, script = levenshtein_align(mt, pe)
            rec.mt_word_tags, rec.gap_tags = mt_tags(script, len(mt))
            links = al.align_pair(fwd, rev, src, pe, cfg.heuristic)
            rec.src_tags = source_tags(links, script, len(src))
        records.append(rec)
    return records


def run_stats(records: Sequence[QeRecord], stats: RunStats, translator: Translator | None = None,
              calls_before: int = 0, hits_before: int = 0) -> RunStats:
    """Fill the derived fields of ``stats`` from the emitted records."""
    stats.records_emitted = len(records)
    if translator is not None:
        stats.backend_calls = translator.backend_calls - calls_before
        stats.cache_hits = translator.cache_hits - hits_before
    stats.mean_hter = sum(r.hter for r in records) / len(records) if records else 0.0
    counts = {k: {OK: 0, BAD: 0} for k in ("mt_word", "gap", "source")}
    for r in records:
        for kind, tags in (("mt_word", r.mt_word_tags), ("gap", r.gap_tags), ("source", r.src_tags)):
            for t in tags:
                counts[kind][t] += 1
    stats.tag_counts = counts
    return stats


def build_mono(corpus: Sequence[str], translator: Translator, cfg: PipelineConfig,
               checkpoint_path: str | os.PathLike | None = None) -> tuple[list[QeRecord], RunStats]:
    """Round-trip ``corpus`` (target-language sentences) into QE records."""
    stats = RunStats(input_lines=len(corpus))
    calls0, hits0 = translator.backend_calls, translator.cache_hits
    items = [
        _Item(line=no, pe_text=text)
        for no, text in enumerate(corpus, 1)
        if _keep(no, [tokenize(text, cfg.norm)], cfg, stats)
    ]
    if not items:
        raise NoTrainableDataError("every input line was filtered out")
    _translate(items, translator, cfg, Checkpoint(checkpoint_path), round_trip=True)
    records = _assemble(items, translator, cfg, stats)
    return records, run_stats(records, stats, translator, calls0, hits0)


def build_parallel(corpus: Sequence[tuple[str, str]], translator: Translator, cfg: PipelineConfig,
                   checkpoint_path: str | os.PathLike | None = None) -> tuple[list[QeRecord], RunStats]:
    """Forward-translate each source and score it against the given target."""
    stats = RunStats(input_lines=len(corpus))
    calls0, hits0 = translator.backend_calls, translator.cache_hits
    items = [
        _Item(line=no, pe_text=tgt, src_text=src)
        for no, (src, tgt) in enumerate(corpus, 1)
        if _keep(no, [tokenize(src, cfg.norm), tokenize(tgt, cfg.norm)], cfg, stats)
    ]
    if not items:
        raise NoTrainableDataError("every input line was filtered out")
    _translate(items, translator, cfg, Checkpoint(checkpoint_path), round_trip=False)
    records = _assemble(items, translator, cfg, stats)
    return records, run_stats(records, stats, translator, calls0, hits0)


def run_to_directory(corpus, translator: Translator, cfg: PipelineConfig, out_dir: str | os.PathLike,
                     manifest_config: dict, fmt: str = "both", prefix: str = "train",
                     overwrite: bool = False) -> RunStats:
    """Build, then write WMT/JSONL outputs and ``manifest.json`` into ``out_dir``.

    Holds ``.pseudoqe.lock`` for the whole run so two builds cannot share a
    directory.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out / LOCK_NAME))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise OutputLockedError(f"another build holds {out / LOCK_NAME}") from None
    try:
        ckpt = out / CHECKPOINT_NAME
        build = build_mono if cfg.mode == "mono" else build_parallel
        records, stats = build(corpus, translator, cfg, checkpoint_path=ckpt)
        if fmt in ("wmt", "both"):
            write_wmt(records, out, prefix, include_tags=cfg.word_level, overwrite=overwrite)
        if fmt in ("jsonl", "both"):
            write_jsonl(records, out / f"{prefix}.jsonl", overwrite=overwrite)
        write_manifest(manifest_config, stats.to_dict(), out / "manifest.json")
        if ckpt.exists():
            ckpt.unlink()
        return stats
    finally:
        lock.release()
