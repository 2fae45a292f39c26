/**
 * Sandboxed Python execution worker.
 *
 * Speaks line-delimited JSON over stdin/stdout: after an initial
 * {"ready": true, "protocol": 1} announcement, every request line is
 * answered by exactly one response line carrying the request's id.
 * Malformed lines get {"status": "protocol_error"} instead of silence,
 * so a driver can always match responses to requests.
 *
 * Each request runs in a fresh python3 child with its own temp working
 * directory and a stripped environment; a hard SIGKILL enforces the
 * request deadline, so hung benchmark code never wedges the worker.
 * Protocol-compatible with `python3 -m mutabench.runner_stub`; either
 * worker can stand in for the other.
 */
import { spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import os from "node:os";
import path from "node:path";
import { createInterface } from "node:readline";

const PROTOCOL_VERSION = 1;
const DEFAULT_TIMEOUT_MS = 10_000;
const MAX_TIMEOUT_MS = 120_000;
const MODES = new Set(["call_function", "run_stdin", "eval_literal"]);

const PYTHON = process.env.MUTABENCH_PYTHON || "python3";

interface WorkerResponse {
  id?: unknown;
  status: string;
  value_repr?: string;
  stdout?: string;
  error_type?: string;
  error_msg?: string;
  [extra: string]: unknown;
}

/**
 * Python program run once per request. It reads the request JSON from
 * stdin, executes it, and writes the response JSON to the inherited
 * stdout descriptor. The descriptor is duplicated up front and fd 0/1
 * are pointed at /dev/null before any benchmark code runs, so raw
 * writes from that code cannot corrupt the protocol stream; prints go
 * through sys.stdout, which is swapped for a StringIO and captured
 * into the response. Value rendering sorts set elements, keeping the
 * repr of equal values identical across interpreter restarts.
 */
const DRIVER = [
  "import io, json, os, sys",
  "",
  "def canonical_repr(value):",
  "    if isinstance(value, frozenset):",
  "        if not value:",
  "            return 'frozenset()'",
  "        return 'frozenset({%s})' % ', '.join(sorted(canonical_repr(v) for v in value))",
  "    if isinstance(value, set):",
  "        if not value:",
  "            return 'set()'",
  "        return '{%s}' % ', '.join(sorted(canonical_repr(v) for v in value))",
  "    if isinstance(value, dict):",
  "        return '{%s}' % ', '.join('%s: %s' % (canonical_repr(k), canonical_repr(v)) for k, v in value.items())",
  "    if isinstance(value, tuple):",
  "        if len(value) == 1:",
  "            return '(%s,)' % canonical_repr(value[0])",
  "        return '(%s)' % ', '.join(canonical_repr(v) for v in value)",
  "    if isinstance(value, list):",
  "        return '[%s]' % ', '.join(canonical_repr(v) for v in value)",
  "    return repr(value)",
  "",
  "def execute(request):",
  "    mode = request['mode']",
  "    code = request['code']",
  "    out = io.StringIO()",
  "    sys.stdout = out",
  "    sys.stdin = io.StringIO(request.get('stdin') or '')",
  "    try:",
  "        if mode == 'eval_literal':",
  "            value = eval(compile(code, '<literal>', 'eval'), {'__name__': '<literal>'})",
  "            return {'status': 'ok', 'value_repr': canonical_repr(value), 'stdout': out.getvalue()}",
  "        if mode == 'call_function':",
  "            namespace = {'__name__': '<benchmark>'}",
  "            exec(compile(code, '<benchmark>', 'exec'), namespace)",
  "            name = request['function']",
  "            if name not in namespace:",
  "                return {'status': 'exception', 'error_type': 'NameError',",
  "                        'error_msg': 'function %r is not defined' % name,",
  "                        'stdout': out.getvalue()}",
  "            args = eval(compile(request['args_repr'], '<args>', 'eval'), {'__name__': '<args>'})",
  "            if not isinstance(args, tuple):",
  "                args = (args,)",
  "            value = namespace[name](*args)",
  "            return {'status': 'ok', 'value_repr': canonical_repr(value), 'stdout': out.getvalue()}",
  "        namespace = {'__name__': '__main__'}",
  "        try:",
  "            exec(compile(code, '<program>', 'exec'), namespace)",
  "        except SystemExit:",
  "            pass",
  "        return {'status': 'ok', 'stdout': out.getvalue()}",
  "    except BaseException as exc:",
  "        return {'status': 'exception', 'error_type': type(exc).__name__,",
  "                'error_msg': str(exc), 'stdout': out.getvalue()}",
  "",
  "request = json.loads(sys.stdin.buffer.read().decode('utf-8'))",
  "reply_fd = os.dup(1)",
  "devnull = os.open(os.devnull, os.O_RDWR)",
  "os.dup2(devnull, 0)",
  "os.dup2(devnull, 1)",
  "os.close(devnull)",
  "try:",
  "    import resource",
  "    resource.setrlimit(resource.RLIMIT_AS, (1 << 30, 1 << 30))",
  "    resource.setrlimit(resource.RLIMIT_CPU, (120, 120))",
  "except Exception:",
  "    pass",
  "view = memoryview(json.dumps(execute(request)).encode('utf-8'))",
  "while view:",
  "    view = view[os.write(reply_fd, view):]",
].join("\n");

/** Spawn one python3 child for the request and collect its response. */
function runInChild(
  request: Record<string, unknown>,
  timeoutMs: number,
): Promise<WorkerResponse> {
  return new Promise((resolve) => {
    const workdir = mkdtempSync(path.join(os.tmpdir(), "mbrun-"));
    const child = spawn(PYTHON, ["-c", DRIVER], {
      cwd: workdir,
      env: {
        PATH: process.env.PATH ?? "/usr/local/bin:/usr/bin:/bin",
        PYTHONHASHSEED: "0",
        HOME: workdir,
        TMPDIR: workdir,
      },
      stdio: ["pipe", "pipe", "ignore"],
    });

    let settled = false;
    const finish = (response: WorkerResponse) => {
      if (settled) return;
      settled = true;
      clearTimeout(timer);
      resolve(response);
    };

    const timer = setTimeout(() => {
      child.kill("SIGKILL");
      finish({ status: "timeout" });
    }, timeoutMs);

    const chunks: Buffer[] = [];
    child.stdout.on("data", (chunk: Buffer) => chunks.push(chunk));
    // Killing a child mid-write surfaces EPIPE on its stdin; not an error here.
    child.stdin.on("error", () => {});
    child.on("error", () => {
      finish({
        status: "exception",
        error_type: "ProcessExit",
        error_msg: "cannot start the execution child",
      });
    });
    child.on("close", () => {
      try {
        rmSync(workdir, { recursive: true, force: true });
      } catch {
        // Leaving a stray temp dir behind beats failing the request.
      }
      const data = Buffer.concat(chunks).toString("utf-8");
      if (!data) {
        finish({
          status: "exception",
          error_type: "ProcessExit",
          error_msg: "execution child exited without a result",
        });
        return;
      }
      try {
        finish(JSON.parse(data) as WorkerResponse);
      } catch {
        finish({
          status: "exception",
          error_type: "ProcessExit",
          error_msg: "execution child sent an unreadable result",
        });
      }
    });

    child.stdin.end(JSON.stringify(request));
  });
}

async function handleLine(line: string): Promise<WorkerResponse> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    return { id: null, status: "protocol_error", error_msg: "request is not valid JSON" };
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    return { id: null, status: "protocol_error", error_msg: "request must be an object" };
  }
  const request = parsed as Record<string, unknown>;
  const rid = request.id ?? null;
  const bad = (msg: string): WorkerResponse => ({
    id: rid,
    status: "protocol_error",
    error_msg: msg,
  });

  if (typeof rid !== "string" || rid === "") {
    return bad("missing request id");
  }
  const mode = request.mode;
  if (typeof mode !== "string" || !MODES.has(mode)) {
    return bad(`unknown mode: ${JSON.stringify(mode ?? null)}`);
  }
  if (typeof request.code !== "string") {
    return bad("missing code");
  }
  const timeoutMs = request.timeout_ms ?? DEFAULT_TIMEOUT_MS;
  if (
    typeof timeoutMs !== "number" ||
    !Number.isInteger(timeoutMs) ||
    timeoutMs < 1 ||
    timeoutMs > MAX_TIMEOUT_MS
  ) {
    return bad(`timeout_ms out of range: ${JSON.stringify(timeoutMs ?? null)}`);
  }
  if (mode === "call_function") {
    if (typeof request.function !== "string") {
      return bad("call_function requires a function name");
    }
    if (typeof request.args_repr !== "string") {
      return bad("call_function requires args_repr");
    }
  }
  if ("stdin" in request && request.stdin !== null && typeof request.stdin !== "string") {
    return bad("stdin must be a string");
  }

  const response = await runInChild(request, timeoutMs);
  response.id = rid;
  return response;
}

function main(): void {
  process.stdout.write(JSON.stringify({ ready: true, protocol: PROTOCOL_VERSION }) + "\n");

  const rl = createInterface({ input: process.stdin, terminal: false });
  // Requests are handled strictly in arrival order; the protocol is
  // sequential per worker and parallelism belongs to whoever spawns
  // several workers.
  let queue: Promise<void> = Promise.resolve();
  rl.on("line", (line: string) => {
    if (line.trim() === "") return;
    queue = queue.then(async () => {
      const response = await handleLine(line);
      process.stdout.write(JSON.stringify(response) + "\n");
    });
  });
  rl.on("close", () => {
    void queue.then(() => process.exit(0));
  });
}

main();
