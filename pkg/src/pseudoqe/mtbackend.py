"""Machine-translation backends behind one batching, caching front end.

Engines:

``mock-identity``
    returns its input unchanged.
``mock-noise``
    tokenizes, then corrupts tokens with a seeded generator
    (:func:`mock_noise_apply`); an optional ``noise_target`` restricts the
    corruption to translations *into* that language so a round trip can be
    noisy on exactly one leg.
``http``
    POSTs ``{"q": [...], "source": ..., "target": ...}`` to ``endpoint`` and
    expects ``{"translations": [...]}`` back.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import httpx
from filelock import FileLock

from .errors import BackendUnavailableError, CacheCorruptError, RequestRejectedError
from .textnorm import tokenize

log = logging.getLogger(__name__)

ENGINES = ("http", "mock-identity", "mock-noise")
NOISE_OPS = ("sub", "del", "ins")
SUB_MARK = "~"
INS_TOKEN = "~ins"
BACKOFF_BASE = 0.5
BACKOFF_FACTOR = 2.0


@dataclass(frozen=True)
class TranslatorConfig:
    engine: str = "mock-identity"
    endpoint: str | None = None
    api_key_env: str = "PSEUDOQE_API_KEY"
    batch_size: int = 32
    max_retries: int = 3
    timeout: float = 30.0
    noise_rate: float = 0.0
    noise_seed: int = 0
    noise_ops: tuple = NOISE_OPS
    noise_target: str | None = None
    max_in_flight: int = 4

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}; expected one of {ENGINES}")
        if self.engine == "http" and not self.endpoint:
            raise ValueError("http engine needs an endpoint")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must be in [0, 1]")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        object.__setattr__(self, "noise_ops", tuple(self.noise_ops))
        bad = set(self.noise_ops) - set(NOISE_OPS)
        if bad or not self.noise_ops:
            raise ValueError(f"noise_ops must be a non-empty subset of {NOISE_OPS}")

    @property
    def engine_id(self) -> str:
        if self.engine == "mock-noise":
            return (f"mock-noise:rate={self.noise_rate!r}:seed={self.noise_seed}"
                    f":ops={','.join(self.noise_ops)}:target={self.noise_target or '*'}")
        if self.engine == "http":
            return f"http:{self.endpoint}"
        return self.engine

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "endpoint": self.endpoint,
            "api_key_env": self.api_key_env,
            "batch_size": self.batch_size,
            "max_retries": self.max_retries,
            "timeout": self.timeout,
            "noise_rate": self.noise_rate,
            "noise_seed": self.noise_seed,
            "noise_ops": list(self.noise_ops),
            "noise_target": self.noise_target,
            "max_in_flight": self.max_in_flight,
        }


# ---------------------------------------------------------------- mock noise

@dataclass(frozen=True)
class NoiseEdit:
    op: str  # "sub" | "del" | "ins"
    position: int  # index in the input token sequence
    token: str  # the token written (sub/ins) or removed (del)


def _noise_rng(seed: int, sentence_id: int) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{sentence_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def mock_noise_apply(tokens: Sequence[str], rate: float, seed: int, sentence_id: int,
                     ops: Sequence[str] = NOISE_OPS) -> tuple[list[str], list[NoiseEdit]]:
    """Corrupt ``tokens`` deterministically and report what was done.

    Positions are visited left to right. Each draws ``u = random()``; if
    ``u < rate`` a second draw ``v`` picks ``ops[int(v * len(ops))]``:

    * ``sub`` replaces the token with ``token + "~"``;
    * ``del`` drops it;
    * ``ins`` inserts ``"~ins"`` before it (the token itself is kept).

    Only ``Random.random()`` is used, which is stable across platforms and
    Python versions.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    rng = _noise_rng(seed, sentence_id)
    out: list[str] = []
    edits: list[NoiseEdit] = []
    for pos, tok in enumerate(tokens):
        if rng.random() >= rate:
            out.append(tok)
            continue
        op = ops[min(int(rng.random() * len(ops)), len(ops) - 1)]
        if op == "sub":
            new = tok + SUB_MARK
            out.append(new)
            edits.append(NoiseEdit("sub", pos, new))
        elif op == "del":
            edits.append(NoiseEdit("del", pos, tok))
        else:
            out.append(INS_TOKEN)
            out.append(tok)
            edits.append(NoiseEdit("ins", pos, INS_TOKEN))
    return out, edits


def sentence_id_for(text: str) -> int:
    """Stable per-text id, so duplicated lines and cache hits agree."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def noisy_translate(cfg: TranslatorConfig, text: str) -> tuple[str, list[NoiseEdit]]:
    tokens = tokenize(text)
    out, edits = mock_noise_apply(tokens, cfg.noise_rate, cfg.noise_seed,
                                  sentence_id_for(text), cfg.noise_ops)
    if not edits:
        return text, edits
    return " ".join(out), edits


# --------------------------------------------------------------------- cache

def normalize_for_key(text: str) -> str:
    return " ".join(unicodedata.normalize("NFC", text).split())


def cache_key(engine_id: str, src_lang: str, tgt_lang: str, text: str) -> str:
    payload = json.dumps([engine_id, src_lang, tgt_lang, normalize_for_key(text)],
                         ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    key: str
    value: str
    created_at: str


class TranslationCache:
    """Append-only JSONL cache, one :class:`CacheEntry` per line.

    A truncated or garbled *last* line (crash mid-append) is cut off with a
    warning; anything unreadable before that raises :class:`CacheCorruptError`.
    Appends are serialized with a thread lock plus an inter-process file lock.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        self._flock = FileLock(str(self.path) + ".lock")
        self._offset = 0
        if self.path.parent and not self.path.parent.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
        self.refresh()

    def __len__(self) -> int:
        return len(self._entries)

    def refresh(self) -> None:
        """Pick up entries appended by other writers since the last read."""
        with self._lock, self._flock:
            if not self.path.exists():
                return
            with open(self.path, "rb") as fh:
                fh.seek(self._offset)
                data = fh.read()
            pos = 0
            while pos < len(data):
                nl = data.find(b"\n", pos)
                line = data[pos:] if nl < 0 else data[pos:nl]
                offset = self._offset + pos
                try:
                    if nl < 0:
                        raise ValueError("missing newline")
                    rec = json.loads(line.decode("utf-8"))
                    self._entries[rec["key"]] = rec["value"]
                except (ValueError, KeyError, TypeError) as exc:
                    is_last = nl < 0 or nl == len(data) - 1
                    if not is_last:
                        raise CacheCorruptError(f"unreadable cache record in {self.path}: {exc}",
                                                offset) from exc
                    log.warning("truncating corrupt trailing cache record at offset %d in %s",
                                offset, self.path)
                    with open(self.path, "r+b") as fh:
                        fh.truncate(offset)
                    self._offset = offset
                    return
                pos = nl + 1
            self._offset += len(data)

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, value: str) -> None:
        entry = CacheEntry(key, value, datetime.now(timezone.utc).isoformat())
        line = (json.dumps(entry.__dict__, ensure_ascii=False) + "\n").encode("utf-8")
        with self._lock, self._flock:
            with open(self.path, "ab") as fh:
                fh.write(line)
            self._entries[key] = value
        # other writers' lines may precede ours; rescan lazily on next refresh

    def put_many(self, items: Sequence[tuple[str, str]]) -> None:
        now = datetime.now(timezone.utc).isoformat()
        blob = "".join(
            json.dumps(CacheEntry(k, v, now).__dict__, ensure_ascii=False) + "\n" for k, v in items
        ).encode("utf-8")
        with self._lock, self._flock:
            with open(self.path, "ab") as fh:
                fh.write(blob)
            for k, v in items:
                self._entries[k] = v

    def clear(self) -> None:
        with self._lock, self._flock:
            self.path.write_bytes(b"")
            self._entries.clear()
            self._offset = 0

    def stats(self) -> dict:
        size = self.path.stat().st_size if self.path.exists() else 0
        return {"path": str(self.path), "entries": len(self._entries), "bytes": size}


class MemoryCache:
    def __init__(self):
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._entries.get(key)

    def put_many(self, items: Sequence[tuple[str, str]]) -> None:
        with self._lock:
            self._entries.update(items)


# ---------------------------------------------------------------- translator

@dataclass
class Translator:
    """Batching, caching translation front end.

    ``backend_calls`` counts engine invocations (one per batch actually sent),
    ``cache_hits`` counts items served from the cache, ``attempts`` counts
    HTTP requests including retries. ``sleep`` and ``rng`` are injectable so
    tests can observe the backoff schedule.
    """

    cfg: TranslatorConfig
    cache: object = None
    sleep: Callable[[float], None] = time.sleep
    rng: random.Random = field(default_factory=random.Random)
    backend_calls: int = 0
    cache_hits: int = 0
    attempts: int = 0
    backoff_delays: list = field(default_factory=list)
    noise_log: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cache is None:
            self.cache = MemoryCache()
        self._counter_lock = threading.Lock()
        self._in_flight = threading.BoundedSemaphore(self.cfg.max_in_flight)
        self._client = None

    @property
    def engine_id(self) -> str:
        return self.cfg.engine_id

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def translate_batch(self, texts: Sequence[str], src_lang: str, tgt_lang: str) -> list[str]:
        """Translate ``texts``; output is order- and length-preserving."""
        if src_lang == tgt_lang:
            raise ValueError(f"source and target language are both {src_lang!r}")
        texts = list(texts)
        keys = [cache_key(self.engine_id, src_lang, tgt_lang, t) for t in texts]
        out: list[str | None] = [None] * len(texts)
        misses: dict[str, list[int]] = {}
        for i, k in enumerate(keys):
            hit = self.cache.get(k)
            if hit is not None:
                out[i] = hit
                with self._counter_lock:
                    self.cache_hits += 1
            else:
                misses.setdefault(k, []).append(i)

        todo = [idxs[0] for idxs in misses.values()]
        bs = self.cfg.batch_size
        batches = [todo[s:s + bs] for s in range(0, len(todo), bs)]

        def run(batch: list[int]) -> list[str]:
            with self._in_flight:
                result = self._call_engine([texts[i] for i in batch], src_lang, tgt_lang)
            self.cache.put_many([(keys[i], r) for i, r in zip(batch, result)])
            return result

        if len(batches) > 1 and self.cfg.max_in_flight > 1 and self.cfg.engine == "http":
            with ThreadPoolExecutor(self.cfg.max_in_flight) as pool:
                results = list(pool.map(run, batches))
        else:
            results = [run(b) for b in batches]
        for batch, result in zip(batches, results):
            for i, r in zip(batch, result):
                for dup in misses[keys[i]]:
                    out[dup] = r
        return out  # type: ignore[return-value]

    def _call_engine(self, texts: list[str], src_lang: str, tgt_lang: str) -> list[str]:
        with self._counter_lock:
            self.backend_calls += 1
        engine = self.cfg.engine
        if engine == "mock-identity":
            return list(texts)
        if engine == "mock-noise":
            if self.cfg.noise_target is not None and tgt_lang != self.cfg.noise_target:
                return list(texts)
            res = []
            for t in texts:
                out, edits = noisy_translate(self.cfg, t)
                with self._counter_lock:
                    self.noise_log[t] = edits
                res.append(out)
            return res
        return self._http(texts, src_lang, tgt_lang)

    def _http(self, texts: list[str], src_lang: str, tgt_lang: str) -> list[str]:
        if self._client is None:
            self._client = httpx.Client(timeout=self.cfg.timeout)
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"q": texts, "source": src_lang, "target": tgt_lang}
        last_err = "no attempt made"
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                cap = BACKOFF_BASE * BACKOFF_FACTOR ** (attempt - 1)
                delay = self.rng.uniform(0.0, cap)
                self.backoff_delays.append((cap, delay))
                self.sleep(delay)
            with self._counter_lock:
                self.attempts += 1
            try:
                resp = self._client.post(self.cfg.endpoint, json=body, headers=headers)
            except httpx.TransportError as exc:
                last_err = f"transport error: {exc}"
                log.warning("translation request failed (%s), attempt %d", last_err, attempt + 1)
                continue
            status = resp.status_code
            if status == 429 or status >= 500:
                last_err = f"HTTP {status}"
                log.warning("translation backend returned %d, attempt %d", status, attempt + 1)
                continue
            if status >= 400:
                raise RequestRejectedError(f"translation request rejected: HTTP {status}: "
                                           f"{resp.text[:200]}", status)
            try:
                translations = resp.json()["translations"]
            except (ValueError, KeyError, TypeError) as exc:
                last_err = f"malformed response: {exc}"
                continue
            if not isinstance(translations, list) or len(translations) != len(texts):
                last_err = "response length does not match request"
                continue
            return [str(t) for t in translations]
        raise BackendUnavailableError(
            f"translation backend unavailable after {self.cfg.max_retries + 1} attempts: {last_err}"
        )


def translate_batch(cfg: TranslatorConfig, texts: Sequence[str], src_lang: str, tgt_lang: str,
                    cache=None) -> list[str]:
    """One-shot convenience wrapper around :class:`Translator`."""
    tr = Translator(cfg, cache)
    try:
        return tr.translate_batch(texts, src_lang, tgt_lang)
    finally:
        tr.close()
