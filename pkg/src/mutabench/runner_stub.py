"""Self-contained execution worker speaking the line-delimited JSON protocol.

Run as ``python -m mutabench.runner_stub``.  The worker announces
``{"ready": true, "protocol": 1}`` on stdout, then answers one JSON
response line for every JSON request line on stdin, in order.

Requests carry ``id``, ``mode`` (``call_function``, ``run_stdin``, or
``eval_literal``), ``code``, and per-mode fields (``function`` and
``args_repr`` for calls, ``stdin`` for program runs) plus ``timeout_ms``
(default 10000, accepted range 1..120000).  Responses echo the id with a
``status`` of ``ok``, ``exception``, ``timeout``, or ``protocol_error``
and whichever of ``value_repr`` / ``stdout`` / ``error_type`` /
``error_msg`` apply.

Every request is executed in a forked child with its own temp working
directory and resource ceilings, so consecutive requests share no state
and a hung program is killed outright without taking the worker down.
The worker re-execs itself with hash randomization pinned, keeping
value representations stable across restarts.
"""

from __future__ import annotations

import io
import json
import os
import select
import shutil
import signal
import sys
import tempfile
import time

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT_MS = 10_000
MAX_TIMEOUT_MS = 120_000
MEMORY_LIMIT = 1 << 30

MODES = ("call_function", "run_stdin", "eval_literal")


def canonical_repr(value) -> str:
    """Deterministic repr: like repr(), but set elements are sorted.

    Native set/frozenset reprs leak hash order; sorting the rendered
    elements makes equal values render identically in any worker.
    """
    if isinstance(value, frozenset):
        if not value:
            return "frozenset()"
        return "frozenset({%s})" % ", ".join(sorted(canonical_repr(v) for v in value))
    if isinstance(value, set):
        if not value:
            return "set()"
        return "{%s}" % ", ".join(sorted(canonical_repr(v) for v in value))
    if isinstance(value, dict):
        return "{%s}" % ", ".join(
            f"{canonical_repr(k)}: {canonical_repr(v)}" for k, v in value.items()
        )
    if isinstance(value, tuple):
        if len(value) == 1:
            return f"({canonical_repr(value[0])},)"
        return "(%s)" % ", ".join(canonical_repr(v) for v in value)
    if isinstance(value, list):
        return "[%s]" % ", ".join(canonical_repr(v) for v in value)
    return repr(value)


def _apply_resource_limits() -> None:
    try:
        import resource

        resource.setrlimit(resource.RLIMIT_AS, (MEMORY_LIMIT, MEMORY_LIMIT))
        resource.setrlimit(resource.RLIMIT_CPU, (120, 120))
    except Exception:
        pass


def _execute(request: dict) -> dict:
    """Run one request to completion; called inside the forked child."""
    mode = request["mode"]
    code = request["code"]
    out = io.StringIO()
    old_stdout, old_stdin = sys.stdout, sys.stdin
    sys.stdout = out
    sys.stdin = io.StringIO(request.get("stdin") or "")
    try:
        if mode == "eval_literal":
            value = eval(compile(code, "<literal>", "eval"), {"__name__": "<literal>"})
            return {"status": "ok", "value_repr": canonical_repr(value), "stdout": out.getvalue()}
        if mode == "call_function":
            namespace = {"__name__": "<benchmark>"}
            exec(compile(code, "<benchmark>", "exec"), namespace)
            name = request["function"]
            if name not in namespace:
                return {
                    "status": "exception",
                    "error_type": "NameError",
                    "error_msg": f"function {name!r} is not defined",
                    "stdout": out.getvalue(),
                }
            args = eval(compile(request["args_repr"], "<args>", "eval"), {"__name__": "<args>"})
            if not isinstance(args, tuple):
                args = (args,)
            value = namespace[name](*args)
            return {"status": "ok", "value_repr": canonical_repr(value), "stdout": out.getvalue()}
        # run_stdin
        namespace = {"__name__": "__main__"}
        try:
            exec(compile(code, "<program>", "exec"), namespace)
        except SystemExit:
            pass
        return {"status": "ok", "stdout": out.getvalue()}
    except BaseException as exc:
        return {
            "status": "exception",
            "error_type": type(exc).__name__,
            "error_msg": str(exc),
            "stdout": out.getvalue(),
        }
    finally:
        sys.stdout = old_stdout
        sys.stdin = old_stdin


def _run_in_child(request: dict, timeout_ms: int) -> dict:
    """Fork, execute, and collect the child's response with a hard deadline."""
    read_fd, write_fd = os.pipe()
    workdir = tempfile.mkdtemp(prefix="mbrun-")
    pid = os.fork()
    if pid == 0:
        os.close(read_fd)
        status = 0
        try:
            os.chdir(workdir)
            # Keep raw fd writes from user code off the protocol stream.
            devnull = os.open(os.devnull, os.O_RDWR)
            os.dup2(devnull, 0)
            os.dup2(devnull, 1)
            os.close(devnull)
            _apply_resource_limits()
            payload = memoryview(json.dumps(_execute(request)).encode())
            while payload:
                written = os.write(write_fd, payload)
                payload = payload[written:]
        except BaseException:
            status = 1
        finally:
            os.close(write_fd)
            os._exit(status)

    os.close(write_fd)
    deadline = time.monotonic() + timeout_ms / 1000.0
    chunks: list[bytes] = []
    timed_out = False
    try:
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                timed_out = True
                break
            ready, _, _ = select.select([read_fd], [], [], remaining)
            if not ready:
                timed_out = True
                break
            chunk = os.read(read_fd, 65536)
            if not chunk:
                break
            chunks.append(chunk)
    finally:
        os.close(read_fd)
        if timed_out:
            try:
                os.kill(pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
        try:
            os.waitpid(pid, 0)
        except ChildProcessError:
            pass
        shutil.rmtree(workdir, ignore_errors=True)

    if timed_out:
        return {"status": "timeout"}
    data = b"".join(chunks)
    if not data:
        return {
            "status": "exception",
            "error_type": "ProcessExit",
            "error_msg": "worker child exited without a result",
        }
    return json.loads(data)


def handle_line(line: str) -> dict:
    try:
        request = json.loads(line)
    except ValueError:
        return {"id": None, "status": "protocol_error", "error_msg": "request is not valid JSON"}
    if not isinstance(request, dict):
        return {"id": None, "status": "protocol_error", "error_msg": "request must be an object"}
    rid = request.get("id")

    def bad(msg: str) -> dict:
        return {"id": rid, "status": "protocol_error", "error_msg": msg}

    if not isinstance(rid, str) or not rid:
        return bad("missing request id")
    mode = request.get("mode")
    if mode not in MODES:
        return bad(f"unknown mode: {mode!r}")
    if not isinstance(request.get("code"), str):
        return bad("missing code")
    timeout_ms = request.get("timeout_ms", DEFAULT_TIMEOUT_MS)
    if not isinstance(timeout_ms, int) or not (1 <= timeout_ms <= MAX_TIMEOUT_MS):
        return bad(f"timeout_ms out of range: {timeout_ms!r}")
    if mode == "call_function":
        if not isinstance(request.get("function"), str):
            return bad("call_function requires a function name")
        if not isinstance(request.get("args_repr"), str):
            return bad("call_function requires args_repr")
    if "stdin" in request and not isinstance(request["stdin"], (str, type(None))):
        return bad("stdin must be a string")

    response = _run_in_child(request, timeout_ms)
    response["id"] = rid
    return response


def main() -> int:
    # Pin hash randomization so value reprs agree across worker restarts.
    if os.environ.get("PYTHONHASHSEED") != "0":
        env = dict(os.environ, PYTHONHASHSEED="0")
        os.execve(sys.executable, [sys.executable, "-m", "mutabench.runner_stub"], env)

    print(json.dumps({"ready": True, "protocol": PROTOCOL_VERSION}), flush=True)
    for line in sys.stdin:
        if not line.strip():
            continue
        response = handle_line(line)
        print(json.dumps(response), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
