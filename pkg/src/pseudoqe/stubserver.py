"""Local HTTP server speaking the translation wire schema, for integration tests.

Request ``POST {"q": [...], "source": "xx", "target": "yy"}``; response
``{"translations": [...]}``. Responses can be scripted: each queued status
code is used for one request, after which the server answers 200 and
"translates" by returning the inputs unchanged (or through ``transform``).

    with StubServer(script=[429, 429]) as srv:
        cfg = TranslatorConfig(engine="http", endpoint=srv.url)
"""

from __future__ import annotations

import json
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterable


class StubServer:
    def __init__(self, script: Iterable[int] = (), transform: Callable[[str], str] | None = None,
                 host: str = "127.0.0.1", port: int = 0):
        self.script = deque(script)
        self.transform = transform or (lambda s: s)
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                with stub._lock:
                    stub.requests.append({
                        "path": self.path,
                        "headers": dict(self.headers),
                        "body": raw.decode("utf-8", "replace"),
                    })
                    status = stub.script.popleft() if stub.script else 200
                if status != 200:
                    self._send(status, {"error": f"scripted {status}"})
                    return
                try:
                    body = json.loads(raw)
                    texts = body["q"]
                    body["source"], body["target"]
                except (ValueError, KeyError, TypeError):
                    self._send(400, {"error": "bad request"})
                    return
                self._send(200, {"translations": [stub.transform(t) for t in texts]})

            def _send(self, status: int, payload: dict):
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/translate"

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join()

    def __enter__(self) -> "StubServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def main(argv=None) -> None:
    import argparse

    p = argparse.ArgumentParser(description="Serve the pseudoqe translation stub (identity).")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    args = p.parse_args(argv)
    srv = StubServer(host=args.host, port=args.port)
    print(srv.url, flush=True)
    try:
        srv._server.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
