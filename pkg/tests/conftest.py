from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

TOPICS = {
    "ai": "learning neural network agent reasoning planning knowledge inference model training".split(),
    "theory": "proof theorem lemma complexity bound polynomial graph algorithm logic automata".split(),
    "systems": "kernel memory cache network protocol distributed storage latency cluster scheduler".split(),
    "robotics": "robot sensor motion arm control navigation vision gripper actuator localisation".split(),
}
FILLER = "the of and in for with on we this paper present results approach method show".split()


def synthetic_records(n_per_class=20, classes=("ai", "theory", "systems", "robotics"),
                      seed=0, doc_len=40, topic_share=0.5, prefix="d"):
    rng = np.random.default_rng(seed)
    recs = []
    i = 0
    for cls in classes:
        words = TOPICS[cls]
        for _ in range(n_per_class):
            toks = [
                rng.choice(words) if rng.random() < topic_share else rng.choice(FILLER)
                for _ in range(doc_len)
            ]
            recs.append({"id": f"{prefix}{i}", "text": " ".join(toks), "label": cls})
            i += 1
    order = rng.permutation(len(recs))
    return [recs[j] for j in order]


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    return path


def make_blobs(n=300, d=10, k=3, sigma=0.1, sep=10.0, seed=0):
    """k Gaussian blobs whose centres are pairwise ``sep * sigma`` apart."""
    rng = np.random.default_rng(seed)
    centres = np.eye(k, d) * sep * sigma / np.sqrt(2.0)
    y = np.repeat(np.arange(k), n // k)
    X = centres[y] + sigma * rng.standard_normal((len(y), d))
    return X, y


@pytest.fixture
def blobs():
    return make_blobs()


class StubEndpoint:
    """In-process OpenAI-style endpoint for embeddings and chat completions.

    ``embedder(text) -> list[float]`` and ``summariser(prompt) -> str`` drive
    the replies; ``fail_first`` requests answer with ``fail_status``.
    """

    def __init__(self):
        self.requests: list[dict] = []
        self.embedder = lambda text: [float(len(text)), 1.0, 0.0]
        self.summariser = lambda prompt: "S."
        self.fail_first = 0
        self.fail_status = 503
        self._server = None

    @property
    def url(self):
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def start(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                stub.requests.append({"path": self.path, "body": body,
                                      "auth": self.headers.get("Authorization")})
                if len(stub.requests) <= stub.fail_first:
                    self.send_response(stub.fail_status)
                    self.end_headers()
                    self.wfile.write(b"{}")
                    return
                if self.path.endswith("/embeddings"):
                    data = [{"index": i, "embedding": stub.embedder(t)}
                            for i, t in enumerate(body["input"])]
                    reply = {"data": data}
                else:
                    prompt = body["messages"][0]["content"]
                    reply = {"choices": [{"message": {"role": "assistant",
                                                      "content": stub.summariser(prompt)}}]}
                raw = json.dumps(reply).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.02},
                         daemon=True).start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_endpoint():
    stub = StubEndpoint().start()
    yield stub
    stub.stop()


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + "}"
    return repr(v)


def write_grid_config(root, n_datasets=1, embeddings=None, algorithms=None, n_per_class=20,
                      extra=None, tables=None):
    """Write synthetic datasets and a TOML experiment file under ``root``.

    ``embeddings`` and ``algorithms`` are lists of flat dicts; ``tables`` adds
    further ``[name]`` sections.
    """
    root = Path(root)
    (root / "data").mkdir(parents=True, exist_ok=True)
    lines = [f'output_dir = "run"', f'cache_dir = "cache"']
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {_toml_value(val)}")
    for name, body in (tables or {}).items():
        lines.append(f"\n[{name}]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in body.items()]
    for i in range(n_datasets):
        recs = synthetic_records(n_per_class=n_per_class, seed=100 + i, prefix=f"s{i}-")
        write_jsonl(root / "data" / f"ds{i + 1}.jsonl", recs)
        lines += ["\n[[datasets]]", f'name = "DS{i + 1}"', f'path = "data/ds{i + 1}.jsonl"']
    if embeddings is None:
        embeddings = [{"name": "TF-IDF", "kind": "tfidf"}]
    for e in embeddings:
        lines.append("\n[[embeddings]]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in e.items()]
    for a in algorithms or []:
        lines.append("\n[[algorithms]]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in a.items()]
    path = root / "exp.toml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
