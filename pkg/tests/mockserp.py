"""Local stand-ins for the search endpoint and HTTP proxies.

Every server shares one script of (status, body) responses that is consumed
in request order, and records which server answered and the request line.
"""

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

OK_BODY = "<html><body><div id='rso'><div class='g'><h3>hit</h3></div></div></body></html>"
CAPTCHA_BODY = "<html><body>Our systems have detected unusual traffic</body></html>"


class Script:
    def __init__(self, responses, default=(200, OK_BODY)):
        self.responses = list(responses)
        self.default = default
        self.seen = []  # (server name, request path)
        self.lock = threading.Lock()

    def next(self, name, path):
        with self.lock:
            self.seen.append((name, path))
            return self.responses.pop(0) if self.responses else self.default


def _handler(name, script):
    class Handler(BaseHTTPRequestHandler):
        def do_GET(self):
            status, body = script.next(name, self.path)
            data = body.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    return Handler


class MockServers:
    """Start ``n`` servers; use as a context manager."""

    def __init__(self, n, script):
        self.script = script
        self.servers = [ThreadingHTTPServer(("127.0.0.1", 0), _handler(f"s{i}", script)) for i in range(n)]
        self.threads = [threading.Thread(target=s.serve_forever, args=(0.02,), daemon=True) for s in self.servers]

    @property
    def urls(self):
        return [f"http://127.0.0.1:{s.server_address[1]}" for s in self.servers]

    def __enter__(self):
        for t in self.threads:
            t.start()
        return self

    def __exit__(self, *exc):
        for s in self.servers:
            s.shutdown()
            s.server_close()
