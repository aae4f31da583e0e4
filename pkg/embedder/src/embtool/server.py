"""Local embedding endpoint: POST /embed {"text": str} -> JSON float list.

Backs the selection engine's --query-text flag without putting an ML
runtime inside the engine itself.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .encoders import make_encoder
from .jobs import _maybe_normalize


def make_server(model_id: str, host: str = "127.0.0.1", port: int = 8787,
                normalize: bool = True, device: str | None = None
                ) -> ThreadingHTTPServer:
    encoder = make_encoder(model_id, device=device)

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path.rstrip("/") != "/embed":
                self._reply(404, {"error": "unknown path"})
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                text = payload["text"]
                if not isinstance(text, str) or not text.strip():
                    raise ValueError("text must be a non-empty string")
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                self._reply(400, {"error": str(exc)})
                return
            vec = _maybe_normalize(encoder.encode([text]), normalize)[0]
            self._reply(200, vec.tolist())

        def _reply(self, status: int, payload):
            raw = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def log_message(self, fmt, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)


def serve_forever(model_id: str, host: str = "127.0.0.1", port: int = 8787,
                  normalize: bool = True, device: str | None = None) -> None:
    server = make_server(model_id, host, port, normalize, device)
    print(f"serving {model_id} on http://{host}:{server.server_port}/embed")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


def start_background(model_id: str, host: str = "127.0.0.1", port: int = 0,
                     normalize: bool = True) -> tuple[ThreadingHTTPServer, int]:
    """Test helper: serve on a free port in a daemon thread."""
    server = make_server(model_id, host, port, normalize)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, server.server_port
