"""Sandboxed execution of candidate completions against task tests.

Each candidate runs in a fresh child interpreter (`python -I`) inside its own
temporary working directory with a scrubbed environment, a wall-clock
timeout, and in-process guards that deny socket creation and writes outside
the working directory.  The guards are best-effort isolation against sloppy
generated code, not a security boundary against an adversary; run the whole
harness inside an OS-level sandbox when evaluating untrusted models.

Status taxonomy: all assertions pass -> ``pass``; an AssertionError ->
``fail``; a parse/import/runtime error -> ``error``; exceeding the timeout ->
``timeout``.  A sandbox that cannot even spawn raises SandboxError, which is
infrastructure, not a task outcome.
"""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from ..errors import SandboxError

STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_ERROR = "error"
STATUS_TIMEOUT = "timeout"

_EXIT_PASS = 0
_EXIT_FAIL = 10
_EXIT_ERROR = 11

STDERR_EXCERPT_CHARS = 2000

# Installed before any candidate code runs.  Denies sockets outright and
# write-mode opens that resolve outside the temp working directory.
_GUARD_PREAMBLE = '''\
import builtins as _builtins
import io as _io
import os as _os
import resource as _resource
import socket as _socket

_SANDBOX_ROOT = _os.path.realpath(_os.getcwd())

def _denied_socket(*args, **kwargs):
    raise OSError("sandbox: network access is disabled")

_socket.socket = _denied_socket
_socket.create_connection = _denied_socket
_socket.socketpair = _denied_socket

_real_open = _builtins.open

def _guarded_open(file, mode="r", *args, **kwargs):
    if isinstance(file, (str, _os.PathLike)) and any(c in str(mode) for c in "wxa+"):
        resolved = _os.path.realpath(_os.path.join(_SANDBOX_ROOT, _os.fspath(file)))
        if not resolved.startswith(_SANDBOX_ROOT + _os.sep) and resolved != _SANDBOX_ROOT:
            raise PermissionError("sandbox: write outside working directory: " + str(file))
    return _real_open(file, mode, *args, **kwargs)

_builtins.open = _guarded_open
_io.open = _guarded_open

if {memory_bytes} > 0:
    _resource.setrlimit(_resource.RLIMIT_AS, ({memory_bytes}, {memory_bytes}))
'''

_RUNNER_TEMPLATE = '''\
{guards}
import sys
import traceback

_CANDIDATE = {candidate!r}
_TEST = {test!r}

namespace = {{"__name__": "__main__"}}
try:
    compiled = compile(_CANDIDATE, "<candidate>", "exec")
except SyntaxError:
    traceback.print_exc()
    sys.exit({exit_error})
try:
    exec(compiled, namespace)
except BaseException:
    traceback.print_exc()
    sys.exit({exit_error})
try:
    exec(compile(_TEST, "<tests>", "exec"), namespace)
except AssertionError:
    traceback.print_exc()
    sys.exit({exit_fail})
except BaseException:
    traceback.print_exc()
    sys.exit({exit_error})
sys.exit({exit_pass})
'''


@dataclass(frozen=True)
class SandboxConfig:
    timeout: float = 30.0
    grace: float = 1.0
    memory_bytes: int = 512 * 1024 * 1024
    python: str = sys.executable


@dataclass(frozen=True)
class CompletionOutcome:
    status: str  # pass | fail | error | timeout
    duration: float
    stderr_excerpt: str

    def to_record(self) -> dict:
        return {
            "status": self.status,
            "duration": round(self.duration, 6),
            "stderr_excerpt": self.stderr_excerpt,
        }


def run_candidate(
    candidate_code: str,
    test_code: str,
    config: SandboxConfig | None = None,
) -> CompletionOutcome:
    """Execute candidate + tests in an isolated child process."""
    config = config or SandboxConfig()
    guards = _GUARD_PREAMBLE.format(memory_bytes=config.memory_bytes)
    script = _RUNNER_TEMPLATE.format(
        guards=guards,
        candidate=candidate_code,
        test=test_code,
        exit_pass=_EXIT_PASS,
        exit_fail=_EXIT_FAIL,
        exit_error=_EXIT_ERROR,
    )
    with tempfile.TemporaryDirectory(prefix="qcodekit-sandbox-") as workdir:
        script_path = Path(workdir) / "runner.py"
        script_path.write_text(script, encoding="utf-8")
        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "HOME": workdir,
            "PYTHONDONTWRITEBYTECODE": "1",
        }
        start = time.perf_counter()
        try:
            proc = subprocess.run(
                [config.python, "-I", str(script_path)],
                cwd=workdir,
                env=env,
                capture_output=True,
                timeout=config.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            duration = time.perf_counter() - start
            stderr = (exc.stderr or b"").decode("utf-8", errors="replace")
            return CompletionOutcome(
                status=STATUS_TIMEOUT,
                duration=duration,
                stderr_excerpt=_excerpt(stderr or f"killed after {config.timeout}s wall clock"),
            )
        except OSError as exc:
            raise SandboxError(f"cannot spawn sandbox interpreter {config.python!r}: {exc}") from exc
        duration = time.perf_counter() - start
        stderr = proc.stderr.decode("utf-8", errors="replace")
        if proc.returncode == _EXIT_PASS:
            status = STATUS_PASS
        elif proc.returncode == _EXIT_FAIL:
            status = STATUS_FAIL
        else:
            status = STATUS_ERROR
        return CompletionOutcome(status=status, duration=duration, stderr_excerpt=_excerpt(stderr))


def _excerpt(stderr: str) -> str:
    stderr = stderr.strip()
    if len(stderr) <= STDERR_EXCERPT_CHARS:
        return stderr
    return stderr[-STDERR_EXCERPT_CHARS:]


def run_task(task, completion_code: str, config: SandboxConfig | None = None) -> CompletionOutcome:
    """Run one completion against a task's tests with the task's timeout."""
    config = config or SandboxConfig()
    if task.timeout and task.timeout != config.timeout:
        config = SandboxConfig(
            timeout=task.timeout,
            grace=config.grace,
            memory_bytes=config.memory_bytes,
            python=config.python,
        )
    return run_candidate(completion_code, task.test_code, config)
