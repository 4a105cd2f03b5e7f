"""Generative backends for prompt-based imputation.

:class:`LocalBackend` is a smoothed conditional frequency model over the
fine-tuning pairs: completions are counted per (target, full context
signature), with multiplicative per-field back-off and a global per-target
prior, add-one smoothed at every level. It stands in for a fine-tuned
language model at desk scale and is exactly reproducible.

:class:`RemoteBackend` speaks the sidecar wire protocol over HTTP:

* ``POST /v1/finetune`` ``{"pairs": [{"prompt", "completion"}...],
  "epochs", "adapter_rank", "seed"}`` -> ``{"job_id"}``
* ``GET /v1/finetune/<job_id>`` -> ``{"status", "detail"}``
* ``POST /v1/complete`` ``{"prompt", "max_new_tokens", "temperature",
  "stop"}`` -> ``{"text"}``
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import requests

from .errors import BackendUnavailableError, DataError, NotFittedError, ProtocolError
from .genimpute import PromptPair, _join_listing, parse_prompt
from .rng import STREAM_BACKEND, make_rng


class GenerativeBackend:
    """fit(pairs) then generate(prompt, max_new_tokens, temperature) -> text."""

    def fit(self, pairs: list[PromptPair]) -> None:
        raise NotImplementedError

    def generate(self, prompt: str, max_new_tokens: int = 16, temperature: float = 0.0) -> str:
        raise NotImplementedError


class LocalBackend(GenerativeBackend):
    """Conditional frequency model with back-off.

    At temperature 0 generate returns the argmax completion (ties broken
    by first appearance in training); above 0 it samples from the smoothed
    distribution sharpened by 1/temperature, on the package PRNG.
    """

    def __init__(self, seed: int = 0) -> None:
        self._rng = make_rng(seed, STREAM_BACKEND)
        self._vocab: dict[str, dict] | None = None
        self._global: dict[str, dict[str, int]] = {}
        self._by_signature: dict[str, dict[tuple, dict[str, int]]] = {}
        self._by_field: dict[str, dict[tuple[str, str], dict[str, int]]] = {}

    def fit(self, pairs: list[PromptPair]) -> None:
        if not pairs:
            raise DataError("LocalBackend.fit needs at least one pair")
        vocab: dict[str, dict] = {}
        self._global = {}
        self._by_signature = {}
        self._by_field = {}
        for pair in pairs:
            context, targets = parse_prompt(pair.prompt)
            if len(targets) != 1:
                raise DataError("fine-tune pairs must have exactly one target")
            target = targets[0]
            completion = pair.completion
            vocab.setdefault(target, {}).setdefault(completion, None)  # ordered set
            _bump(self._global.setdefault(target, {}), completion)
            sig = tuple(sorted(context.items()))
            _bump(self._by_signature.setdefault(target, {}).setdefault(sig, {}), completion)
            fields = self._by_field.setdefault(target, {})
            for item in context.items():
                _bump(fields.setdefault(item, {}), completion)
        self._vocab = vocab

    def distribution(self, target: str, context: dict[str, str]) -> tuple[list[str], np.ndarray]:
        """Smoothed completion distribution for one target given a context."""
        if self._vocab is None:
            raise NotFittedError("LocalBackend.generate called before fit")
        candidates = list(self._vocab.get(target, {}))
        if not candidates:
            return [], np.zeros(0)
        sig = tuple(sorted(context.items()))
        sig_counts = self._by_signature.get(target, {}).get(sig)
        if sig_counts is not None:
            weights = np.array([sig_counts.get(v, 0) + 1.0 for v in candidates])
        else:
            weights = np.array([self._global[target].get(v, 0) + 1.0 for v in candidates])
            fields = self._by_field.get(target, {})
            for item in context.items():
                counts = fields.get(item, {})
                weights *= np.array([counts.get(v, 0) + 1.0 for v in candidates])
        return candidates, weights / weights.sum()

    def generate(self, prompt: str, max_new_tokens: int = 16, temperature: float = 0.0) -> str:
        if self._vocab is None:
            raise NotFittedError("LocalBackend.generate called before fit")
        context, targets = parse_prompt(prompt)
        outputs = []
        for target in targets:
            candidates, probs = self.distribution(target, context)
            if not candidates:
                outputs.append("")
                continue
            if temperature == 0.0:
                outputs.append(candidates[int(np.argmax(probs))])
            else:
                sharpened = probs ** (1.0 / temperature)
                sharpened /= sharpened.sum()
                outputs.append(candidates[int(self._rng.choice(len(candidates), p=sharpened))])
        text = _join_listing(outputs)
        tokens = text.split(" ")
        return " ".join(tokens[:max_new_tokens]) if len(tokens) > max_new_tokens else text


def _bump(counts: dict[str, int], key: str) -> None:
    counts[key] = counts.get(key, 0) + 1


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff: float = 0.5  # seconds, doubled per attempt
    timeout: float = 30.0  # per-request


class RemoteBackend(GenerativeBackend):
    """HTTP client for any server speaking the wire protocol."""

    def __init__(
        self,
        endpoint: str,
        epochs: int = 3,
        adapter_rank: int = 8,
        seed: int = 0,
        retry: RetryPolicy | None = None,
        poll_interval: float = 0.5,
        fit_timeout: float = 900.0,
        stop: tuple[str, ...] = ("\n",),
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.epochs = epochs
        self.adapter_rank = adapter_rank
        self.seed = seed
        self.retry = retry or RetryPolicy()
        self.poll_interval = poll_interval
        self.fit_timeout = fit_timeout
        self.stop = list(stop)
        self._session = session or requests.Session()
        self._fitted = False

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = self.endpoint + path
        last_error: Exception | None = None
        for attempt in range(self.retry.max_attempts):
            if attempt:
                time.sleep(self.retry.backoff * 2 ** (attempt - 1))
            try:
                resp = self._session.request(
                    method, url, json=body, timeout=self.retry.timeout
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = ProtocolError(f"{url}: server error {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProtocolError(f"{url}: status {resp.status_code}: {resp.text[:200]}")
            try:
                doc = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{url}: response is not JSON") from exc
            if not isinstance(doc, dict):
                raise ProtocolError(f"{url}: expected a JSON object")
            return doc
        raise BackendUnavailableError(
            f"{url}: unreachable after {self.retry.max_attempts} attempts ({last_error})"
        )

    def fit(self, pairs: list[PromptPair]) -> None:
        body = {
            "pairs": [{"prompt": p.prompt, "completion": p.completion} for p in pairs],
            "epochs": self.epochs,
            "adapter_rank": self.adapter_rank,
            "seed": self.seed,
        }
        doc = self._request("POST", "/v1/finetune", body)
        job_id = doc.get("job_id")
        if not isinstance(job_id, str):
            raise ProtocolError("finetune response lacks a job_id")
        deadline = time.monotonic() + self.fit_timeout
        while True:
            status_doc = self._request("GET", f"/v1/finetune/{job_id}")
            status = status_doc.get("status")
            if status == "done":
                self._fitted = True
                return
            if status == "failed":
                raise ProtocolError(f"fine-tune failed: {status_doc.get('detail', '')}")
            if status not in ("pending", "running"):
                raise ProtocolError(f"unknown fine-tune status {status!r}")
            if time.monotonic() > deadline:
                raise BackendUnavailableError(f"fine-tune job {job_id} timed out")
            time.sleep(self.poll_interval)

    def generate(self, prompt: str, max_new_tokens: int = 16, temperature: float = 0.0) -> str:
        body = {
            "prompt": prompt,
            "max_new_tokens": max_new_tokens,
            "temperature": temperature,
            "stop": self.stop,
        }
        doc = self._request("POST", "/v1/complete", body)
        text = doc.get("text")
        if not isinstance(text, str):
            raise ProtocolError("complete response lacks a text field")
        return text
