from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from imprec.backends import LocalBackend, RemoteBackend, RetryPolicy
from imprec.errors import BackendUnavailableError, NotFittedError, ProtocolError
from imprec.genimpute import PromptPair


def pair(prompt: str, completion: str) -> PromptPair:
    return PromptPair(prompt, completion, ("col",))


def ctx_prompt(**fields) -> str:
    clauses = [f"a {k} of {v}" for k, v in fields.items()]
    if len(clauses) == 1:
        ctx = f"given {clauses[0]}"
    else:
        ctx = "given " + ", ".join(clauses[:-1]) + f", and {clauses[-1]}"
    return f"{ctx}, what is the corresponding Rating?"


# -- local backend ---------------------------------------------------------------


def test_local_backend_degenerate_distribution():
    pairs = [pair(ctx_prompt(Genre="Sci-Fi"), "4.0")] * 5
    backend = LocalBackend()
    backend.fit(pairs)
    assert backend.generate(ctx_prompt(Genre="Sci-Fi")) == "4.0"


def test_local_backend_unseen_context_backs_off_to_global_argmax():
    pairs = (
        [pair(ctx_prompt(Genre="Sci-Fi"), "4.0")] * 3
        + [pair(ctx_prompt(Genre="Drama"), "2.0")] * 2
    )
    backend = LocalBackend()
    backend.fit(pairs)
    assert backend.generate(ctx_prompt(Genre="Western")) == "4.0"


def test_local_backend_argmax_matches_count_oracle():
    pairs = (
        [pair(ctx_prompt(Genre="Sci-Fi"), "4.0")] * 3
        + [pair(ctx_prompt(Genre="Sci-Fi"), "2.0")] * 1
    )
    backend = LocalBackend()
    backend.fit(pairs)
    # brute-force count over pairs with the identical context
    counts: dict[str, int] = {}
    for p in pairs:
        counts[p.completion] = counts.get(p.completion, 0) + 1
    oracle = max(counts, key=lambda v: counts[v])
    assert backend.generate(ctx_prompt(Genre="Sci-Fi")) == oracle == "4.0"


def test_local_backend_argmax_matches_count_oracle_randomized():
    import numpy as np

    rng = np.random.default_rng(3)
    genres = [f"g{i}" for i in range(6)]
    values = [f"{v:.1f}" for v in np.arange(0, 5, 0.5)]
    for trial in range(20):
        pairs = []
        for _ in range(int(rng.integers(20, 400))):
            g = genres[int(rng.integers(0, len(genres)))]
            v = values[int(rng.integers(0, len(values)))]
            pairs.append(pair(ctx_prompt(Genre=g), v))
        backend = LocalBackend()
        backend.fit(pairs)
        for g in genres:
            subset = [p.completion for p in pairs if f"a Genre of {g}" in p.prompt]
            if not subset:
                continue
            counts: dict[str, int] = {}
            for v in subset:
                counts[v] = counts.get(v, 0) + 1
            best_count = max(counts.values())
            # first-seen tie rule mirrors the backend's candidate ordering
            order: dict[str, int] = {}
            for p in pairs:
                order.setdefault(p.completion, len(order))
            oracle = min(
                (v for v in counts if counts[v] == best_count), key=lambda v: order[v]
            )
            assert backend.generate(ctx_prompt(Genre=g)) == oracle


def test_local_backend_field_level_backoff_uses_partial_context():
    # full context (Genre, Site) unseen, but Genre=Sci-Fi strongly implies 4.0
    pairs = (
        [pair(ctx_prompt(Genre="Sci-Fi", Site="A"), "4.0")] * 5
        + [pair(ctx_prompt(Genre="Drama", Site="B"), "1.0")] * 5
    )
    backend = LocalBackend()
    backend.fit(pairs)
    assert backend.generate(ctx_prompt(Genre="Sci-Fi", Site="B")) == "4.0"


def test_local_backend_multi_target_completion():
    pairs = [
        pair(ctx_prompt(UserID="1"), "4.0"),
        PromptPair(
            "given a UserID of 1, what is the corresponding Genre?", "Sci-Fi", ("g",)
        ),
    ]
    backend = LocalBackend()
    backend.fit(pairs)
    out = backend.generate(
        "given a UserID of 1, what are the corresponding Genre and Rating?"
    )
    assert out == "Sci-Fi and 4.0"


def test_local_backend_temperature_sampling_deterministic_by_seed():
    pairs = (
        [pair(ctx_prompt(Genre="Sci-Fi"), "4.0")] * 3
        + [pair(ctx_prompt(Genre="Sci-Fi"), "2.0")] * 3
    )
    a, b = LocalBackend(seed=9), LocalBackend(seed=9)
    a.fit(pairs)
    b.fit(pairs)
    seq_a = [a.generate(ctx_prompt(Genre="Sci-Fi"), temperature=1.0) for _ in range(20)]
    seq_b = [b.generate(ctx_prompt(Genre="Sci-Fi"), temperature=1.0) for _ in range(20)]
    assert seq_a == seq_b
    assert set(seq_a) == {"4.0", "2.0"}  # actually samples


def test_local_backend_not_fitted():
    with pytest.raises(NotFittedError):
        LocalBackend().generate(ctx_prompt(Genre="Sci-Fi"))


def test_local_backend_respects_max_new_tokens():
    pairs = [pair(ctx_prompt(Genre="Sci-Fi"), "a b c d e")]
    backend = LocalBackend()
    backend.fit(pairs)
    assert backend.generate(ctx_prompt(Genre="Sci-Fi"), max_new_tokens=2) == "a b"


# -- remote backend ----------------------------------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    server_version = "stub"
    behavior: dict = {}
    requests_log: list = []

    def log_message(self, *args):  # silence
        pass

    def _send(self, code: int, doc):
        body = json.dumps(doc).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        doc = json.loads(self.rfile.read(length)) if length else {}
        type(self).requests_log.append((self.path, doc))
        behavior = type(self).behavior
        if self.path == "/v1/complete":
            fails = behavior.get("complete_failures", 0)
            if fails > 0:
                behavior["complete_failures"] = fails - 1
                self._send(500, {"detail": "boom"})
                return
            if behavior.get("malformed"):
                self._send(200, {"output": "wrong key"})
                return
            self._send(200, {"text": behavior.get("text", "4.0")})
        elif self.path == "/v1/finetune":
            self._send(200, {"job_id": "job-1"})
        else:
            self._send(404, {"detail": "unknown route"})

    def do_GET(self):
        type(self).requests_log.append((self.path, None))
        behavior = type(self).behavior
        if self.path.startswith("/v1/finetune/"):
            states = behavior.setdefault("job_states", ["pending", "running", "done"])
            state = states.pop(0) if len(states) > 1 else states[0]
            self._send(200, {"status": state, "detail": ""})
        else:
            self._send(404, {"detail": "unknown route"})


@pytest.fixture
def stub_server():
    _StubHandler.behavior = {}
    _StubHandler.requests_log = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", _StubHandler
    server.shutdown()
    thread.join(timeout=2)


def _fast_backend(endpoint: str, **kwargs) -> RemoteBackend:
    return RemoteBackend(
        endpoint,
        retry=RetryPolicy(max_attempts=3, backoff=0.01, timeout=5.0),
        poll_interval=0.01,
        **kwargs,
    )


def test_remote_generate_protocol(stub_server):
    endpoint, handler = stub_server
    backend = _fast_backend(endpoint)
    assert backend.generate("prompt here", max_new_tokens=8, temperature=0.0) == "4.0"
    path, body = handler.requests_log[-1]
    assert path == "/v1/complete"
    assert set(body) == {"prompt", "max_new_tokens", "temperature", "stop"}
    assert body["prompt"] == "prompt here"
    assert body["max_new_tokens"] == 8


def test_remote_fit_polls_until_done(stub_server):
    endpoint, handler = stub_server
    backend = _fast_backend(endpoint, epochs=2, adapter_rank=4, seed=11)
    backend.fit([pair(ctx_prompt(Genre="Sci-Fi"), "4.0")])
    post_path, post_body = handler.requests_log[0]
    assert post_path == "/v1/finetune"
    assert set(post_body) == {"pairs", "epochs", "adapter_rank", "seed"}
    assert post_body["pairs"][0] == {
        "prompt": ctx_prompt(Genre="Sci-Fi"),
        "completion": "4.0",
    }
    assert post_body["epochs"] == 2 and post_body["adapter_rank"] == 4
    statuses = [p for p, _ in handler.requests_log if p.startswith("/v1/finetune/job-1")]
    assert len(statuses) >= 3  # pending, running, done


def test_remote_fit_failed_job_raises_protocol_error(stub_server):
    endpoint, handler = stub_server
    handler.behavior["job_states"] = ["failed"]
    with pytest.raises(ProtocolError):
        _fast_backend(endpoint).fit([pair(ctx_prompt(Genre="X"), "1.0")])


def test_remote_500_three_times_is_unavailable(stub_server):
    endpoint, handler = stub_server
    handler.behavior["complete_failures"] = 3
    with pytest.raises(BackendUnavailableError):
        _fast_backend(endpoint).generate("p")


def test_remote_500_twice_then_recovers(stub_server):
    endpoint, handler = stub_server
    handler.behavior["complete_failures"] = 2
    assert _fast_backend(endpoint).generate("p") == "4.0"


def test_remote_malformed_response_is_protocol_error(stub_server):
    endpoint, handler = stub_server
    handler.behavior["malformed"] = True
    with pytest.raises(ProtocolError):
        _fast_backend(endpoint).generate("p")


def test_remote_connection_refused_is_unavailable():
    backend = RemoteBackend(
        "http://127.0.0.1:9",  # discard port, nothing listens
        retry=RetryPolicy(max_attempts=3, backoff=0.01, timeout=0.5),
    )
    with pytest.raises(BackendUnavailableError):
        backend.generate("p")
