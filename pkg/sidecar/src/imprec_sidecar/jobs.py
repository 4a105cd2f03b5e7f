"""Single-worker fine-tune queue.

Jobs run strictly one at a time; statuses move pending -> running ->
done|failed and never backwards. Completions always use the most recent
``done`` job's adapted model, or the base model if none has finished.
"""

from __future__ import annotations

import os
import queue
import threading
import uuid
from dataclasses import dataclass, field

import torch

from .lora import adapter_state_dict
from .model import TinyCausalLM
from .training import run_finetune


@dataclass
class Job:
    job_id: str
    pairs: list[tuple[str, str]]
    epochs: int
    adapter_rank: int
    seed: int
    status: str = "pending"
    detail: str = ""


class JobRunner:
    def __init__(self, base: TinyCausalLM, model_dir: str) -> None:
        self.base = base
        self.model_dir = model_dir
        self.jobs: dict[str, Job] = {}
        self._queue: queue.Queue[Job] = queue.Queue()
        self._lock = threading.Lock()
        self._current: TinyCausalLM = base
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def submit(self, pairs: list[tuple[str, str]], epochs: int, adapter_rank: int, seed: int) -> str:
        job = Job(uuid.uuid4().hex[:12], pairs, epochs, adapter_rank, seed)
        self.jobs[job.job_id] = job
        self._queue.put(job)
        return job.job_id

    def get(self, job_id: str) -> Job | None:
        return self.jobs.get(job_id)

    def completion_model(self) -> TinyCausalLM:
        with self._lock:
            return self._current

    def _run(self) -> None:
        while True:
            job = self._queue.get()
            job.status = "running"
            try:
                model, adapters, stats = run_finetune(
                    self.base,
                    job.pairs,
                    epochs=job.epochs,
                    adapter_rank=job.adapter_rank,
                    seed=job.seed,
                )
                job_dir = os.path.join(self.model_dir, "jobs", job.job_id)
                os.makedirs(job_dir, exist_ok=True)
                torch.save(
                    {
                        "adapter_rank": job.adapter_rank,
                        "seed": job.seed,
                        "epochs": job.epochs,
                        "state": adapter_state_dict(adapters),
                    },
                    os.path.join(job_dir, "adapters.pt"),
                )
                with self._lock:
                    self._current = model
                job.detail = f"{stats.steps} steps, final loss {stats.final_loss:.4f}"
                job.status = "done"
            except Exception as exc:  # noqa: BLE001 - job failure boundary
                job.detail = f"{type(exc).__name__}: {exc}"
                job.status = "failed"
