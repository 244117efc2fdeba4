"""Client side of the external-model plugin protocol.

A plugin is a child process speaking line-delimited JSON over stdin/stdout:

  {"op": "hello", "role": "ner"|"re", "version": 1}   -> {"ok": true}
  {"op": "train", "examples": [...]}                  -> {"ok": true}
  {"op": "predict", "input": ...}                     -> {"spans": [...]} | {"relation": ..., "p": ..., "dist": {...}}
  {"op": "save", "path": ...} / {"op": "load", ...}   -> {"ok": true}

One request is in flight per process. Any malformed or out-of-range response
poisons the handle: every later call fails fast.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
from queue import Empty, Queue

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


class PluginError(RuntimeError):
    """Spawn failure, timeout, crash, or protocol violation."""


class PluginProcess:
    """Owns one plugin child process and serializes requests to it."""

    def __init__(self, command: str, role: str, timeout: float = DEFAULT_TIMEOUT):
        if role not in ("ner", "re"):
            raise ValueError(f"role must be 'ner' or 're', got {role!r}")
        self.command = command
        self.role = role
        self.timeout = timeout
        self.poisoned = False
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise PluginError(f"failed to spawn plugin {command!r}: {exc}") from exc
        self._lock = threading.Lock()
        self._lines: Queue[str | None] = Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        reply = self.request({"op": "hello", "role": role,
                              "version": PROTOCOL_VERSION})
        if reply.get("ok") is not True:
            self._poison(f"handshake rejected: {reply!r}")

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def _poison(self, why: str) -> None:
        self.poisoned = True
        self.close()
        raise PluginError(f"plugin {self.command!r} ({self.role}): {why}")

    def request(self, message: dict) -> dict:
        with self._lock:
            if self.poisoned:
                raise PluginError(
                    f"plugin {self.command!r} ({self.role}) is poisoned"
                )
            if self._proc.poll() is not None:
                self._poison(f"process exited with code {self._proc.returncode}")
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self._poison(f"write failed: {exc}")
            try:
                line = self._lines.get(timeout=self.timeout)
            except Empty:
                self._poison(f"timed out after {self.timeout}s waiting for reply")
            if line is None:
                self._poison("process closed stdout mid-request")
            try:
                reply = json.loads(line)
            except json.JSONDecodeError as exc:
                self._poison(f"non-JSON reply {line!r}: {exc}")
            if not isinstance(reply, dict):
                self._poison(f"reply is not an object: {reply!r}")
            if "error" in reply:
                raise PluginError(
                    f"plugin {self.command!r} ({self.role}) error: {reply['error']}"
                )
            return reply

    def close(self) -> None:
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                if stream:
                    stream.close()
            except OSError:
                pass
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def violation(self, why: str) -> None:
        """Poison the handle because a structurally valid reply broke the contract."""
        self._poison(why)


def check_probability(value: object, context: str, proc: PluginProcess) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        proc.violation(f"{context}: probability is not a number: {value!r}")
    if not (0.0 <= float(value) <= 1.0):
        proc.violation(f"{context}: probability {value!r} outside [0, 1]")
    return float(value)
