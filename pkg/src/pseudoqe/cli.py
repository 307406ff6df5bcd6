"""Command-line interface.

    pseudoqe build --mode mono --src-lang en --tgt-lang de --level both --input corpus.de --out out/
    pseudoqe ter --hyp mt.txt --ref pe.txt
    pseudoqe align --bitext pairs.tsv
    pseudoqe cache --path cache.jsonl stats

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 backend failure,
4 invalid corpus.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .aligner import AlignerConfig, align_pair, train_bidirectional
from .errors import (
    BackendUnavailableError,
    CacheCorruptError,
    DegenerateLineError,
    InputEncodingError,
    InvalidParallelCorpusError,
    NoTrainableDataError,
    OutputExistsError,
    OutputLockedError,
    RequestRejectedError,
)
from .ioformats import read_mono, read_parallel
from .mtbackend import NOISE_OPS, TranslationCache, Translator, TranslatorConfig
from .pipeline import PipelineConfig, run_to_directory
from .ter import ShiftParams, hter, ter_score
from .textnorm import NormPolicy, tokenize

log = logging.getLogger("pseudoqe")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_BACKEND, EXIT_CORPUS = 0, 1, 2, 3, 4

HEURISTICS = {"gdfa": "grow-diag-final-and", "grow-diag-final-and": "grow-diag-final-and",
              "intersection": "intersection", "union": "union"}

BUILD_DEFAULTS = {
    "format": "both",
    "prefix": "train",
    "engine": "http",
    "endpoint": None,
    "api_key_env": "PSEUDOQE_API_KEY",
    "batch_size": 32,
    "max_retries": 3,
    "timeout": 30.0,
    "max_in_flight": 4,
    "cache": None,
    "seed": 0,
    "noise_rate": 0.1,
    "noise_ops": list(NOISE_OPS),
    "noise_target": None,
    "input_tgt": None,
    "clip_hter": False,
    "strict": False,
    "overwrite": False,
    "max_tokens": 200,
    "heuristic": "grow-diag-final-and",
    "norm_policy": NormPolicy().to_dict(),
    "shift_params": ShiftParams().to_dict(),
    "aligner": AlignerConfig().to_dict(),
}
REQUIRED = ("mode", "src_lang", "tgt_lang", "level", "input", "out")
# operational settings that do not affect outputs are left out of the manifest
NOT_IN_MANIFEST = ("out", "overwrite", "cache", "config")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pseudoqe", description="Generate pseudo-QE datasets.")
    p.add_argument("--version", action="version", version=f"pseudoqe {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    S = argparse.SUPPRESS
    b = sub.add_parser("build", help="build a QE dataset from a corpus", argument_default=S)
    b.add_argument("--mode", choices=["mono", "parallel"])
    b.add_argument("--src-lang", dest="src_lang")
    b.add_argument("--tgt-lang", dest="tgt_lang")
    b.add_argument("--level", choices=["word", "sentence", "both"])
    b.add_argument("--input", help="monolingual target corpus, parallel source side, or a .tsv")
    b.add_argument("--input-tgt", dest="input_tgt", help="parallel target side")
    b.add_argument("--out", help="output directory")
    b.add_argument("--format", choices=["wmt", "jsonl", "both"])
    b.add_argument("--prefix", help="output file prefix (default: train)")
    b.add_argument("--engine", choices=["http", "mock-identity", "mock-noise"])
    b.add_argument("--endpoint")
    b.add_argument("--api-key-env", dest="api_key_env")
    b.add_argument("--batch-size", dest="batch_size", type=int)
    b.add_argument("--max-retries", dest="max_retries", type=int)
    b.add_argument("--timeout", type=float)
    b.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    b.add_argument("--cache", help="persistent translation cache (JSONL)")
    b.add_argument("--seed", type=int, help="mock-noise seed")
    b.add_argument("--noise-rate", dest="noise_rate", type=float)
    b.add_argument("--noise-ops", dest="noise_ops", type=lambda s: s.split(","),
                   help="comma list from sub,del,ins")
    b.add_argument("--noise-target", dest="noise_target",
                   help="only corrupt translations into this language (default: --tgt-lang)")
    b.add_argument("--clip-hter", dest="clip_hter", action="store_true")
    b.add_argument("--strict", action="store_true", help="fail on degenerate lines")
    b.add_argument("--overwrite", action="store_true")
    b.add_argument("--max-tokens", dest="max_tokens", type=int)
    b.add_argument("--heuristic", choices=sorted(HEURISTICS))
    b.add_argument("--align-iters", dest="align_iters", type=int)
    b.add_argument("--no-shifts", dest="no_shifts", action="store_true")
    b.add_argument("--max-shift-size", dest="max_shift_size", type=int)
    b.add_argument("--max-shift-dist", dest="max_shift_dist", type=int)
    b.add_argument("--no-lowercase", dest="no_lowercase", action="store_true")
    b.add_argument("--no-split-punct", dest="no_split_punct", action="store_true")
    b.add_argument("--config", help="TOML key=value file or a previous manifest.json")

    t = sub.add_parser("ter", help="score hypothesis lines against reference lines")
    t.add_argument("--hyp", required=True)
    t.add_argument("--ref", required=True)
    t.add_argument("--no-shifts", action="store_true")
    t.add_argument("--clip-hter", action="store_true")

    a = sub.add_parser("align", help="align a two-column TSV bitext, print Pharaoh links")
    a.add_argument("--bitext", required=True)
    a.add_argument("--iters", type=int, default=5)
    a.add_argument("--heuristic", choices=["gdfa", "intersection", "union"], default="gdfa")

    c = sub.add_parser("cache", help="inspect or clear a translation cache")
    c.add_argument("--path", required=True)
    c.add_argument("action", choices=["stats", "clear"])
    return p


def load_config_file(path: str) -> dict:
    """Read a TOML config or a manifest.json; keys use underscores."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
        if isinstance(data, dict) and "config" in data and "tool" in data:
            data = data["config"]
    except ValueError:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"cannot parse config {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in data.items()}


def _merge_nested(settings: dict, key: str, overrides: dict) -> None:
    settings[key] = {**settings[key], **overrides}


def resolve_build_settings(ns: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    settings = json.loads(json.dumps(BUILD_DEFAULTS))
    given = vars(ns).copy()
    given.pop("command", None)
    given.pop("verbose", None)
    if "config" in given:
        for k, v in load_config_file(given["config"]).items():
            if k in ("norm_policy", "shift_params", "aligner") and isinstance(v, dict):
                _merge_nested(settings, k, v)
            else:
                settings[k] = v
    flag_map = {
        "no_shifts": ("shift_params", "enabled", lambda v: not v),
        "max_shift_size": ("shift_params", "max_shift_size", None),
        "max_shift_dist": ("shift_params", "max_shift_dist", None),
        "align_iters": ("aligner", "iterations", None),
        "no_lowercase": ("norm_policy", "lowercase", lambda v: not v),
        "no_split_punct": ("norm_policy", "split_punct", lambda v: not v),
    }
    for k, v in given.items():
        if k in flag_map:
            table, field, conv = flag_map[k]
            settings[table][field] = conv(v) if conv else v
        else:
            settings[k] = v
    if settings.get("heuristic") in HEURISTICS:
        settings["heuristic"] = HEURISTICS[settings["heuristic"]]
    missing = [k for k in REQUIRED if not settings.get(k)]
    if missing:
        raise UsageError("missing required flag(s): " +
                         ", ".join("--" + k.replace("_", "-") for k in missing))
    if settings["mode"] == "parallel" and not settings.get("input_tgt") \
            and not str(settings["input"]).endswith(".tsv"):
        raise UsageError("--mode parallel needs --input-tgt (or a .tsv --input)")
    if settings["engine"] == "http" and not settings.get("endpoint"):
        raise UsageError("--engine http needs --endpoint")
    if settings["engine"] == "mock-noise" and settings.get("noise_target") is None \
            and settings["mode"] == "mono":
        settings["noise_target"] = settings["tgt_lang"]
    return settings


def _configs_from_settings(s: dict) -> tuple[PipelineConfig, TranslatorConfig]:
    try:
        pcfg = PipelineConfig(
            mode=s["mode"], level=s["level"], src_lang=s["src_lang"], tgt_lang=s["tgt_lang"],
            norm=NormPolicy(**s["norm_policy"]),
            shift=ShiftParams(**s["shift_params"]),
            aligner=AlignerConfig(**s["aligner"]),
            heuristic=s["heuristic"], clip_hter=bool(s["clip_hter"]),
            max_tokens=int(s["max_tokens"]), strict=bool(s["strict"]),
        )
        tcfg = TranslatorConfig(
            engine=s["engine"], endpoint=s.get("endpoint"), api_key_env=s["api_key_env"],
            batch_size=int(s["batch_size"]), max_retries=int(s["max_retries"]),
            timeout=float(s["timeout"]), noise_rate=float(s["noise_rate"]),
            noise_seed=int(s["seed"]), noise_ops=tuple(s["noise_ops"]),
            noise_target=s.get("noise_target"), max_in_flight=int(s["max_in_flight"]),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return pcfg, tcfg


def cmd_build(ns: argparse.Namespace) -> int:
    s = resolve_build_settings(ns)
    pcfg, tcfg = _configs_from_settings(s)
    if s["mode"] == "mono":
        corpus = read_mono(s["input"])
    elif s.get("input_tgt"):
        corpus = read_parallel(s["input"], s["input_tgt"])
    else:
        corpus = read_parallel(tsv_path=s["input"])
    cache = TranslationCache(s["cache"]) if s.get("cache") else None
    translator = Translator(tcfg, cache)
    manifest_cfg = {k: v for k, v in s.items() if k not in NOT_IN_MANIFEST}
    manifest_cfg["noise_ops"] = list(tcfg.noise_ops)
    try:
        stats = run_to_directory(corpus, translator, pcfg, s["out"], manifest_cfg,
                                 fmt=s["format"], prefix=s["prefix"], overwrite=bool(s["overwrite"]))
    finally:
        translator.close()
    log.info("emitted %d records, skipped %d, backend calls %d, cache hits %d, mean hter %.4f",
             stats.records_emitted, stats.skipped, stats.backend_calls, stats.cache_hits,
             stats.mean_hter)
    return EXIT_OK


def cmd_ter(ns: argparse.Namespace) -> int:
    hyps = read_mono(ns.hyp)
    refs = read_mono(ns.ref)
    if len(hyps) != len(refs):
        raise InvalidParallelCorpusError(
            f"{ns.hyp} has {len(hyps)} lines but {ns.ref} has {len(refs)}")
    params = ShiftParams(enabled=not ns.no_shifts)
    out = sys.stdout
    for h, r in zip(hyps, refs):
        res = ter_score(tokenize(h), tokenize(r), params)
        out.write(f"{res.total_edits}\t{res.ref_len}\t{hter(res, ns.clip_hter):.6f}\n")
    return EXIT_OK


def cmd_align(ns: argparse.Namespace) -> int:
    pairs = [(tokenize(s), tokenize(t)) for s, t in read_parallel(tsv_path=ns.bitext)]
    fwd, rev = train_bidirectional(pairs, AlignerConfig(iterations=ns.iters))
    heuristic = HEURISTICS[ns.heuristic]
    for src, tgt in pairs:
        sys.stdout.write(align_pair(fwd, rev, src, tgt, heuristic).pharaoh() + "\n")
    return EXIT_OK


def cmd_cache(ns: argparse.Namespace) -> int:
    cache = TranslationCache(ns.path)
    if ns.action == "clear":
        cache.clear()
        log.info("cleared %s", ns.path)
    else:
        sys.stdout.write(json.dumps(cache.stats()) + "\n")
    return EXIT_OK


COMMANDS = {"build": cmd_build, "ter": cmd_ter, "align": cmd_align, "cache": cmd_cache}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"pseudoqe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParallelCorpusError, NoTrainableDataError, DegenerateLineError) as exc:
        print(f"pseudoqe: invalid corpus: {exc}", file=sys.stderr)
        return EXIT_CORPUS
    except (BackendUnavailableError, RequestRejectedError) as exc:
        print(f"pseudoqe: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except KeyboardInterrupt:
        print("pseudoqe: interrupted; checkpoint flushed", file=sys.stderr)
        return EXIT_BACKEND
    except (OSError, InputEncodingError, OutputExistsError, OutputLockedError,
            CacheCorruptError) as exc:
        print(f"pseudoqe: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
