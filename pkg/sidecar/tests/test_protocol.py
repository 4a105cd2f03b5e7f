"""Wire-protocol conformance, validated with the client package's own
remote-backend fixtures pointed at a live sidecar server."""

from __future__ import annotations

import socket
import threading
import time

import pytest
import requests
import uvicorn

from imprec.backends import RemoteBackend, RetryPolicy
from imprec.errors import ProtocolError
from imprec.genimpute import PromptPair

from imprec_sidecar.server import create_app

from conftest import mapping_prompt, sample_mapping_pairs


@pytest.fixture(scope="session")
def server_url(model_dir):
    app = create_app(model_dir)
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("sidecar server did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def _client(url: str, **kwargs) -> RemoteBackend:
    return RemoteBackend(
        url,
        retry=RetryPolicy(max_attempts=3, backoff=0.05, timeout=60.0),
        poll_interval=0.2,
        fit_timeout=600.0,
        **kwargs,
    )


def test_complete_route_shape(server_url):
    backend = _client(server_url)
    text = backend.generate(mapping_prompt(1, 2), max_new_tokens=8, temperature=0.0)
    assert isinstance(text, str)
    # greedy decoding is deterministic for a fixed checkpoint
    assert text == backend.generate(mapping_prompt(1, 2), max_new_tokens=8, temperature=0.0)


def test_finetune_job_lifecycle(server_url):
    pairs = [
        PromptPair(prompt, completion, ("Rating",))
        for prompt, completion in sample_mapping_pairs(40, seed=7)
    ]
    backend = _client(server_url, epochs=1, adapter_rank=4, seed=5)
    backend.fit(pairs)  # polls until the job reaches done

    doc = requests.post(
        f"{server_url}/v1/finetune",
        json={
            "pairs": [{"prompt": p.prompt, "completion": p.completion} for p in pairs[:5]],
            "epochs": 0,
            "adapter_rank": 4,
            "seed": 1,
        },
        timeout=30,
    ).json()
    status = requests.get(f"{server_url}/v1/finetune/{doc['job_id']}", timeout=30)
    assert status.status_code == 200
    assert set(status.json()) == {"status", "detail"}
    assert status.json()["status"] in {"pending", "running", "done"}


def test_unknown_job_is_404(server_url):
    resp = requests.get(f"{server_url}/v1/finetune/nope", timeout=30)
    assert resp.status_code == 404
    with pytest.raises(ProtocolError):
        _client(server_url)._request("GET", "/v1/finetune/nope")


def test_malformed_bodies_are_400(server_url):
    resp = requests.post(f"{server_url}/v1/complete", json={"not_prompt": 1}, timeout=30)
    assert resp.status_code == 400
    resp = requests.post(
        f"{server_url}/v1/finetune", json={"pairs": "not a list"}, timeout=30
    )
    assert resp.status_code == 400


def test_empty_completion_job_fails_with_detail(server_url):
    resp = requests.post(
        f"{server_url}/v1/finetune",
        json={"pairs": [{"prompt": "p?", "completion": ""}], "epochs": 1,
              "adapter_rank": 4, "seed": 0},
        timeout=30,
    )
    assert resp.status_code == 200
    job_id = resp.json()["job_id"]
    deadline = time.monotonic() + 60
    while time.monotonic() < deadline:
        doc = requests.get(f"{server_url}/v1/finetune/{job_id}", timeout=30).json()
        if doc["status"] in ("done", "failed"):
            break
        time.sleep(0.1)
    assert doc["status"] == "failed"
    assert doc["detail"]


def test_stop_strings_and_token_budget(server_url):
    resp = requests.post(
        f"{server_url}/v1/complete",
        json={"prompt": mapping_prompt(0, 1), "max_new_tokens": 3,
              "temperature": 0.0, "stop": []},
        timeout=30,
    )
    assert resp.status_code == 200
    assert len(resp.json()["text"]) <= 3

    resp = requests.post(
        f"{server_url}/v1/complete",
        json={"prompt": mapping_prompt(0, 1), "max_new_tokens": 16,
              "temperature": 0.0, "stop": ["."]},
        timeout=30,
    )
    assert "." not in resp.json()["text"]
