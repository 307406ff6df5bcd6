"""Corpus readers and QE dataset writers (WMT multi-file, JSONL, manifest)."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .errors import InputEncodingError, InvalidParallelCorpusError, OutputExistsError
from .records import QeRecord
from .tags import interleave, split_interleaved

log = logging.getLogger(__name__)

WMT_SUFFIXES = ("src", "mt", "pe", "hter", "tags", "source_tags")

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tool", "version", "config", "stats"],
    "properties": {
        "tool": {"const": "pseudoqe"},
        "version": {"type": "string"},
        "config": {
            "type": "object",
            "required": ["mode", "level", "src_lang", "tgt_lang", "engine", "norm_policy",
                         "shift_params", "aligner"],
            "properties": {
                "mode": {"enum": ["mono", "parallel"]},
                "level": {"enum": ["word", "sentence", "both"]},
                "src_lang": {"type": "string"},
                "tgt_lang": {"type": "string"},
                "engine": {"enum": ["http", "mock-identity", "mock-noise"]},
                "seed": {"type": "integer"},
                "noise_rate": {"type": "number", "minimum": 0, "maximum": 1},
                "norm_policy": {"type": "object"},
                "shift_params": {"type": "object"},
                "aligner": {"type": "object"},
            },
        },
        "stats": {
            "type": "object",
            "required": ["records_emitted", "skipped", "backend_calls", "cache_hits",
                         "mean_hter", "tag_counts"],
            "properties": {
                "records_emitted": {"type": "integer", "minimum": 0},
                "skipped": {"type": "integer", "minimum": 0},
                "backend_calls": {"type": "integer", "minimum": 0},
                "cache_hits": {"type": "integer", "minimum": 0},
                "mean_hter": {"type": "number", "minimum": 0},
                "tag_counts": {"type": "object"},
            },
        },
    },
}


def _read_lines(path: str | os.PathLike) -> list[str]:
    try:
        # universal newlines: CRLF and LF files parse identically
        with open(path, encoding="utf-8-sig", newline=None) as fh:
            return [line[:-1] if line.endswith("\n") else line for line in fh]
    except UnicodeDecodeError as exc:
        raise InputEncodingError(f"{path}: not valid UTF-8 ({exc})") from exc


def read_mono(path: str | os.PathLike) -> list[str]:
    """One raw sentence per line, in file order."""
    lines = _read_lines(path)
    blank = sum(1 for ln in lines if not ln.strip())
    if blank:
        log.info("%s: %d blank lines", path, blank)
    return lines


def read_parallel(src_path: str | os.PathLike | None = None,
                  tgt_path: str | os.PathLike | None = None,
                  tsv_path: str | os.PathLike | None = None) -> list[tuple[str, str]]:
    """Read a parallel corpus from two line-aligned files or one two-column TSV."""
    if tsv_path is not None:
        pairs = []
        for no, line in enumerate(_read_lines(tsv_path), 1):
            cells = line.split("\t")
            if len(cells) != 2:
                raise InvalidParallelCorpusError(
                    f"{tsv_path}:{no}: expected exactly one tab, found {len(cells) - 1}", no)
            pairs.append((cells[0], cells[1]))
        return pairs
    if src_path is None or tgt_path is None:
        raise ValueError("need both src_path and tgt_path, or tsv_path")
    src = _read_lines(src_path)
    tgt = _read_lines(tgt_path)
    if len(src) != len(tgt):
        raise InvalidParallelCorpusError(
            f"line count mismatch: {src_path} has {len(src)}, {tgt_path} has {len(tgt)}",
            min(len(src), len(tgt)) + 1)
    return list(zip(src, tgt))


def format_hter(value: float) -> str:
    return f"{value:.6f}"


def wmt_paths(out_dir: str | os.PathLike, prefix: str) -> dict[str, Path]:
    out = Path(out_dir)
    return {s: out / f"{prefix}.{s}" for s in WMT_SUFFIXES}


def write_wmt(records: Sequence[QeRecord], out_dir: str | os.PathLike, prefix: str = "train",
              include_tags: bool = True, overwrite: bool = False) -> list[Path]:
    """Write line-parallel WMT QE files; returns the paths written.

    ``.tags`` holds interleaved gap/word tags (2n+1 per line). With
    ``include_tags=False`` (sentence-level runs) only the four text/score
    files are written.
    """
    paths = wmt_paths(out_dir, prefix)
    if not include_tags:
        paths = {k: v for k, v in paths.items() if k not in ("tags", "source_tags")}
    if not overwrite:
        existing = [str(p) for p in paths.values() if p.exists()]
        if existing:
            raise OutputExistsError(f"refusing to overwrite {', '.join(existing)}")
    lines: dict[str, list[str]] = {k: [] for k in paths}
    for r in records:
        lines["src"].append(" ".join(r.src))
        lines["mt"].append(" ".join(r.mt))
        lines["pe"].append(" ".join(r.pe))
        lines["hter"].append(format_hter(r.hter))
        if include_tags:
            lines["tags"].append(" ".join(interleave(r.mt_word_tags, r.gap_tags)))
            lines["source_tags"].append(" ".join(r.src_tags))
    for key, path in paths.items():
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{ln}\n" for ln in lines[key])
    return list(paths.values())


def read_wmt(out_dir: str | os.PathLike, prefix: str = "train") -> list[QeRecord]:
    """Parse files written by :func:`write_wmt` back into records (meta is lost)."""
    paths = wmt_paths(out_dir, prefix)
    cols = {k: _read_lines(p) for k, p in paths.items() if p.exists()}
    n = len(cols["src"])
    if any(len(v) != n for v in cols.values()):
        raise ValueError(f"WMT files under {out_dir} are not line-parallel")
    records = []
    for i in range(n):
        word, gap = split_interleaved(cols["tags"][i].split()) if "tags" in cols else ([], [])
        records.append(QeRecord(
            src=cols["src"][i].split(),
            mt=cols["mt"][i].split(),
            pe=cols["pe"][i].split(),
            hter=float(cols["hter"][i]),
            src_tags=cols["source_tags"][i].split() if "source_tags" in cols else [],
            mt_word_tags=word,
            gap_tags=gap,
        ))
    return records


def write_jsonl(records: Iterable[QeRecord], path: str | os.PathLike, overwrite: bool = False) -> None:
    path = Path(path)
    if path.exists() and not overwrite:
        raise OutputExistsError(f"refusing to overwrite {path}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")


def read_jsonl(path: str | os.PathLike) -> list[QeRecord]:
    with open(path, encoding="utf-8") as fh:
        return [QeRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def manifest_dict(config: dict, stats: dict) -> dict:
    return {"tool": "pseudoqe", "version": __version__, "config": config, "stats": stats}


def write_manifest(config: dict, stats: dict, path: str | os.PathLike) -> None:
    """Write the run manifest; the parent directory must already exist."""
    text = json.dumps(manifest_dict(config, stats), indent=2, sort_keys=True, ensure_ascii=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def read_manifest(path: str | os.PathLike) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
