"""Client for execution workers speaking the line-delimited JSON protocol.

A worker is any executable that prints ``{"ready": true, "protocol": 1}``
and then answers one response line per request line (the bundled
``mutabench.runner_stub`` by default).  Point the ``MUTABENCH_RUNNER_PATH``
environment variable at another command to swap the implementation; the
value is split like a shell word list.

``RunnerPool`` fans requests out over several workers.  Each pool thread
owns one worker process, so a worker only ever sees sequential traffic,
which is what the protocol requires.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import sys
import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor

PROTOCOL_VERSION = 1
ENV_RUNNER_PATH = "MUTABENCH_RUNNER_PATH"
DEFAULT_TIMEOUT_MS = 10_000

# Extra client-side patience beyond the worker's own deadline, before we
# declare the worker itself wedged and replace it.
RESPONSE_GRACE_SECONDS = 5.0


class RunnerUnavailable(Exception):
    """The worker process failed, hung, or broke protocol."""


def worker_command() -> list[str]:
    configured = os.environ.get(ENV_RUNNER_PATH)
    if configured:
        return shlex.split(configured)
    return [sys.executable, "-m", "mutabench.runner_stub"]


def new_request_id() -> str:
    return uuid.uuid4().hex


def call_request(code: str, function: str, args_repr: str, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> dict:
    return {
        "id": new_request_id(),
        "mode": "call_function",
        "code": code,
        "function": function,
        "args_repr": args_repr,
        "timeout_ms": timeout_ms,
    }


def stdin_request(code: str, stdin: str, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> dict:
    return {
        "id": new_request_id(),
        "mode": "run_stdin",
        "code": code,
        "stdin": stdin,
        "timeout_ms": timeout_ms,
    }


def literal_request(expr: str, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> dict:
    return {
        "id": new_request_id(),
        "mode": "eval_literal",
        "code": expr,
        "timeout_ms": timeout_ms,
    }


class WorkerClient:
    """One worker subprocess plus the reader thread draining its stdout."""

    def __init__(self, command: list[str] | None = None, spawn_timeout: float = 30.0):
        self.command = command or worker_command()
        env = dict(os.environ, PYTHONHASHSEED="0")
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                env=env,
            )
        except OSError as exc:
            raise RunnerUnavailable(f"cannot start worker {self.command}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        announce = self._next_line(spawn_timeout)
        try:
            header = json.loads(announce)
        except ValueError:
            header = None
        if not isinstance(header, dict) or header.get("ready") is not True:
            self.close()
            raise RunnerUnavailable(f"worker did not announce readiness: {announce!r}")
        if header.get("protocol") != PROTOCOL_VERSION:
            self.close()
            raise RunnerUnavailable(f"unsupported protocol version: {header.get('protocol')!r}")

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _next_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            self.close()
            raise RunnerUnavailable("worker produced no output before the deadline")
        if line is None:
            self.close()
            raise RunnerUnavailable("worker exited")
        return line

    def request(self, request: dict) -> dict:
        if self.proc.poll() is not None:
            raise RunnerUnavailable("worker is not running")
        timeout_ms = request.get("timeout_ms", DEFAULT_TIMEOUT_MS)
        deadline = timeout_ms / 1000.0 + RESPONSE_GRACE_SECONDS
        try:
            assert self.proc.stdin is not None
            self.proc.stdin.write(json.dumps(request) + "\n")
            self.proc.stdin.flush()
        except (OSError, ValueError) as exc:
            self.close()
            raise RunnerUnavailable(f"cannot write to worker: {exc}") from exc
        line = self._next_line(deadline)
        try:
            response = json.loads(line)
        except ValueError as exc:
            self.close()
            raise RunnerUnavailable(f"worker sent invalid JSON: {line!r}") from exc
        if response.get("id") != request["id"]:
            self.close()
            raise RunnerUnavailable("worker response id does not match the request")
        return response

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                if self.proc.stdin:
                    self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def default_pool_size() -> int:
    return os.cpu_count() or 2


class RunnerPool:
    """A fixed-size pool of workers, one per thread, fed through futures."""

    def __init__(self, size: int | None = None, command: list[str] | None = None):
        self.size = size or default_pool_size()
        self.command = command
        self._local = threading.local()
        self._executor = ThreadPoolExecutor(max_workers=self.size)
        self._clients: list[WorkerClient] = []
        self._clients_lock = threading.Lock()
        self._closed = False

    def _client(self) -> WorkerClient:
        client = getattr(self._local, "client", None)
        if client is None or client.proc.poll() is not None:
            client = WorkerClient(self.command)
            self._local.client = client
            with self._clients_lock:
                self._clients.append(client)
        return client

    def _run(self, request: dict) -> dict:
        return self._run_task(lambda client: client.request(request))

    def _run_task(self, task):
        try:
            return task(self._client())
        except RunnerUnavailable:
            # The worker died on us; make sure the next request on this
            # thread gets a fresh one, then surface the failure.
            self._local.client = None
            raise

    def submit(self, request: dict) -> Future:
        if self._closed:
            raise RuntimeError("pool is closed")
        return self._executor.submit(self._run, request)

    def submit_task(self, task) -> Future:
        """Run ``task(client)`` on a pool thread with that thread's worker.

        For jobs that need several sequential requests against the same
        worker (a comparison of two programs, a batch of test vectors).
        """
        if self._closed:
            raise RuntimeError("pool is closed")
        return self._executor.submit(self._run_task, task)

    def run(self, request: dict) -> dict:
        return self.submit(request).result()

    def run_all(self, requests: list[dict]) -> list[dict | RunnerUnavailable]:
        """Run many requests, returning results in order; failures inline."""
        futures = [self.submit(r) for r in requests]
        results: list[dict | RunnerUnavailable] = []
        for future in futures:
            try:
                results.append(future.result())
            except RunnerUnavailable as exc:
                results.append(exc)
        return results

    def close(self) -> None:
        self._closed = True
        self._executor.shutdown(wait=True)
        with self._clients_lock:
            for client in self._clients:
                client.close()
            self._clients.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
