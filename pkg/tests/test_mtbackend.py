import json
import os
import socket
import subprocess
import sys
import threading

import pytest
from hypothesis import given, strategies as st

from pseudoqe.errors import BackendUnavailableError, CacheCorruptError, RequestRejectedError
from pseudoqe.mtbackend import (
    INS_TOKEN, SUB_MARK, NoiseEdit, TranslationCache, Translator, TranslatorConfig, cache_key,
    mock_noise_apply, noisy_translate, translate_batch,
)
from pseudoqe.stubserver import StubServer


class RecordingSleep:
    def __init__(self):
        self.calls = []

    def __call__(self, seconds):
        self.calls.append(seconds)


class UpperBoundRng:
    """Stand-in for random.Random that always picks the top of the jitter range."""

    def uniform(self, a, b):
        return b


# ------------------------------------------------------------------- mocks

def test_identity_engine():
    assert translate_batch(TranslatorConfig(engine="mock-identity"), ["hello"], "en", "de") == ["hello"]


@given(st.lists(st.text(max_size=40), max_size=5))
def test_zero_noise_is_identity(texts):
    cfg = TranslatorConfig(engine="mock-noise", noise_rate=0.0, noise_seed=7)
    assert translate_batch(cfg, texts, "en", "de") == texts


def test_noise_rate_zero_empty_log():
    out, log = mock_noise_apply(["a", "b"], 0.0, seed=1, sentence_id=0)
    assert out == ["a", "b"] and log == []


def test_noise_rate_one_substitutions():
    toks = ["a", "b", "c", "d"]
    out, log = mock_noise_apply(toks, 1.0, seed=1, sentence_id=3, ops=("sub",))
    assert out == [t + SUB_MARK for t in toks]
    assert [e.op for e in log] == ["sub"] * 4
    assert [e.position for e in log] == [0, 1, 2, 3]


def test_noise_log_reconstructs_output():
    toks = [f"w{i}" for i in range(40)]
    out, log = mock_noise_apply(toks, 0.3, seed=7, sentence_id=12)
    assert log
    # replay the log independently
    by_pos = {e.position: e for e in log}
    replay = []
    for i, t in enumerate(toks):
        e = by_pos.get(i)
        if e is None:
            replay.append(t)
        elif e.op == "sub":
            replay.append(e.token)
        elif e.op == "ins":
            replay += [INS_TOKEN, t]
    assert replay == out


def test_noise_repeatable_and_seed_sensitive():
    toks = [f"w{i}" for i in range(50)]
    a = mock_noise_apply(toks, 0.3, 7, 1)
    assert a == mock_noise_apply(toks, 0.3, 7, 1)
    assert a != mock_noise_apply(toks, 0.3, 8, 1)
    assert a != mock_noise_apply(toks, 0.3, 7, 2)


FROZEN_NOISE = """
from pseudoqe.mtbackend import mock_noise_apply
import json
out, log = mock_noise_apply([f"w{i}" for i in range(30)], 0.3, 7, 99)
print(json.dumps([out, [[e.op, e.position, e.token] for e in log]]))
"""


def test_noise_identical_across_processes():
    runs = [subprocess.run([sys.executable, "-c", FROZEN_NOISE], capture_output=True, text=True,
                           check=True, env={**os.environ, "PYTHONHASHSEED": str(h)}).stdout for h in (1, 2)]
    assert runs[0] == runs[1]
    out, log = mock_noise_apply([f"w{i}" for i in range(30)], 0.3, 7, 99)
    assert json.loads(runs[0]) == [out, [[e.op, e.position, e.token] for e in log]]


def test_noise_target_restricts_direction():
    cfg = TranslatorConfig(engine="mock-noise", noise_rate=1.0, noise_ops=("sub",), noise_target="de")
    tr = Translator(cfg)
    assert tr.translate_batch(["a b"], "de", "en") == ["a b"]
    assert tr.translate_batch(["a b"], "en", "de") == ["a~ b~"]


def test_noisy_translate_reports_log():
    cfg = TranslatorConfig(engine="mock-noise", noise_rate=1.0, noise_ops=("del",))
    assert noisy_translate(cfg, "x y") == ("", [NoiseEdit("del", 0, "x"), NoiseEdit("del", 1, "y")])


def test_config_validation():
    for bad in [dict(batch_size=0), dict(max_retries=-1), dict(noise_rate=1.5),
                dict(engine="google"), dict(engine="http"), dict(noise_ops=("swap",))]:
        with pytest.raises(ValueError):
            TranslatorConfig(**bad)


def test_same_language_rejected():
    with pytest.raises(ValueError):
        Translator(TranslatorConfig()).translate_batch(["x"], "en", "en")


# ------------------------------------------------------------- translator

def test_order_length_and_batching():
    tr = Translator(TranslatorConfig(engine="mock-identity", batch_size=3))
    texts = [f"s{i}" for i in range(10)]
    assert tr.translate_batch(texts, "en", "de") == texts
    assert tr.backend_calls == 4


def test_duplicates_translated_once():
    tr = Translator(TranslatorConfig(engine="mock-identity"))
    assert tr.translate_batch(["a", "b", "a"], "en", "de") == ["a", "b", "a"]
    assert tr.backend_calls == 1


def test_warm_cache_zero_calls(tmp_path):
    cfg = TranslatorConfig(engine="mock-noise", noise_rate=0.5, noise_seed=3)
    texts = [f"sentence number {i} here" for i in range(20)]
    first = Translator(cfg, TranslationCache(tmp_path / "c.jsonl"))
    out1 = first.translate_batch(texts, "en", "de")
    second = Translator(cfg, TranslationCache(tmp_path / "c.jsonl"))
    out2 = second.translate_batch(texts, "en", "de")
    assert out1 == out2
    assert second.backend_calls == 0 and second.cache_hits == 20


def test_cache_key_depends_on_engine_and_direction():
    k = cache_key("mock-identity", "en", "de", "x")
    assert k != cache_key("mock-identity", "de", "en", "x")
    assert k != cache_key("http:u", "en", "de", "x")
    assert k == cache_key("mock-identity", "en", "de", " x ")


# ------------------------------------------------------------------ cache

def test_cache_put_get(tmp_path):
    c = TranslationCache(tmp_path / "c.jsonl")
    assert c.get("k") is None
    c.put("k", "Wert ✓")
    assert c.get("k") == "Wert ✓"
    assert TranslationCache(tmp_path / "c.jsonl").get("k") == "Wert ✓"


def test_cache_truncates_corrupt_tail(tmp_path, caplog):
    path = tmp_path / "c.jsonl"
    c = TranslationCache(path)
    c.put("a", "1")
    good_size = path.stat().st_size
    with open(path, "ab") as fh:
        fh.write(b'{"key": "b", "val')
    c2 = TranslationCache(path)
    assert c2.get("a") == "1" and c2.get("b") is None
    assert path.stat().st_size == good_size
    assert "truncating" in caplog.text


def test_cache_corrupt_middle_raises(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_bytes(b'{"key": "a", "value": "1", "created_at": "t"}\nGARBAGE\n'
                     b'{"key": "b", "value": "2", "created_at": "t"}\n')
    with pytest.raises(CacheCorruptError) as info:
        TranslationCache(path)
    assert info.value.offset == len(b'{"key": "a", "value": "1", "created_at": "t"}\n')


def test_cache_concurrent_writers(tmp_path):
    path = tmp_path / "c.jsonl"

    def writer(w):
        c = TranslationCache(path)
        for i in range(100):
            c.put(f"{w}-{i}", f"value {w} {i}")

    threads = [threading.Thread(target=writer, args=(w,)) for w in range(10)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    scan = TranslationCache(path)
    assert len(scan) == 1000
    assert all(scan.get(f"{w}-{i}") == f"value {w} {i}" for w in range(10) for i in range(100))


def test_cache_clear_and_stats(tmp_path):
    c = TranslationCache(tmp_path / "c.jsonl")
    c.put("a", "b")
    assert c.stats()["entries"] == 1
    c.clear()
    assert c.stats() == {"path": str(tmp_path / "c.jsonl"), "entries": 0, "bytes": 0}


# ------------------------------------------------------------------- http

def http_translator(url, **kw):
    cfg = TranslatorConfig(engine="http", endpoint=url, **kw)
    return Translator(cfg, sleep=RecordingSleep(), rng=UpperBoundRng())


def test_http_wire_format(monkeypatch):
    monkeypatch.setenv("PSEUDOQE_API_KEY", "sekret")
    with StubServer(transform=str.upper) as srv:
        tr = http_translator(srv.url)
        assert tr.translate_batch(["guten tag", "hallo"], "de", "en") == ["GUTEN TAG", "HALLO"]
        tr.close()
    req = srv.requests[0]
    assert json.loads(req["body"]) == {"q": ["guten tag", "hallo"], "source": "de", "target": "en"}
    assert req["headers"]["Authorization"] == "Bearer sekret"


def test_http_retries_429_then_succeeds():
    with StubServer(script=[429, 429]) as srv:
        tr = http_translator(srv.url)
        assert tr.translate_batch(["x"], "en", "de") == ["x"]
        tr.close()
    assert tr.attempts == 3 and len(srv.requests) == 3
    assert [cap for cap, _ in tr.backoff_delays] == [0.5, 1.0]
    assert tr.sleep.calls == [0.5, 1.0]


def test_http_400_not_retried():
    with StubServer(script=[400]) as srv:
        tr = http_translator(srv.url)
        with pytest.raises(RequestRejectedError) as info:
            tr.translate_batch(["x"], "en", "de")
        tr.close()
    assert info.value.status == 400
    assert tr.attempts == 1 and tr.sleep.calls == []


def test_http_5xx_exhausts_retries():
    with StubServer(script=[503] * 10) as srv:
        tr = http_translator(srv.url, max_retries=2)
        with pytest.raises(BackendUnavailableError):
            tr.translate_batch(["x"], "en", "de")
        tr.close()
    assert tr.attempts == 3
    assert tr.sleep.calls == [0.5, 1.0]


def test_http_transport_failure():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    tr = http_translator(f"http://127.0.0.1:{port}/translate", max_retries=1, timeout=2.0)
    with pytest.raises(BackendUnavailableError):
        tr.translate_batch(["x"], "en", "de")
    assert tr.attempts == 2


def test_http_parallel_batches_keep_order():
    with StubServer(transform=lambda s: s + "!") as srv:
        tr = http_translator(srv.url, batch_size=2, max_in_flight=3)
        texts = [f"t{i}" for i in range(11)]
        assert tr.translate_batch(texts, "en", "de") == [t + "!" for t in texts]
        tr.close()
    assert tr.backend_calls == 6


def test_http_partial_failure_fails_whole_call():
    with StubServer(script=[200, 400]) as srv:
        tr = http_translator(srv.url, batch_size=1, max_in_flight=1)
        with pytest.raises(RequestRejectedError):
            tr.translate_batch(["a", "b"], "en", "de")
        tr.close()
