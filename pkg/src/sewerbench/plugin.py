"""Host-side client for external forecasters speaking the line protocol.

External models run as subprocesses and exchange UTF-8 JSON lines over
standard streams: a versioned handshake, then one ``predict`` message per
window answered by one ``prediction`` (or ``error``) message, order
preserving. The full wire format is documented byte-exactly in
``docs/protocol.md``. Numbers round-trip exactly because both sides emit
shortest-repr decimal floats.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from .forecast import FAMILY_PLUGIN, ForecasterHandle, WindowSet

PROTOCOL_VERSION = 1


class PluginError(RuntimeError):
    """Raised when an external forecaster misbehaves."""


@dataclass(frozen=True)
class PluginEndpoint:
    """How to launch one external forecaster."""

    launch_command: tuple[str, ...]
    protocol_version: int = PROTOCOL_VERSION
    handshake_timeout: float = 10.0
    predict_timeout: float = 30.0


@dataclass(frozen=True)
class Capabilities:
    """What the plugin declared during the handshake."""

    protocol_version: int
    supports_future_covariates: bool
    model_size_bytes: int


class _LineReader:
    """Reads newline-terminated byte lines from a pipe with a deadline."""

    def __init__(self, fd: int):
        self._fd = fd
        self._buffer = b""

    def readline(self, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("timed out waiting for plugin reply")
            ready, _, _ = select.select([self._fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(self._fd, 65536)
            if not chunk:
                raise PluginError("plugin closed its output stream")
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line


class PluginClient:
    """One plugin subprocess; use as a context manager.

    The protocol is stateless per window after the handshake, so killing
    and relaunching the process between batches yields identical results
    for deterministic plugins.
    """

    def __init__(self, endpoint: PluginEndpoint):
        self.endpoint = endpoint
        self.capabilities: Capabilities | None = None
        self._proc = subprocess.Popen(
            list(endpoint.launch_command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        self._reader = _LineReader(self._proc.stdout.fileno())

    def __enter__(self) -> PluginClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _send(self, message: dict) -> None:
        line = json.dumps(message, sort_keys=True) + "\n"
        self._proc.stdin.write(line.encode("utf-8"))
        self._proc.stdin.flush()

    def handshake(self) -> Capabilities:
        """Exchange hello/capabilities; must precede any predict message."""
        try:
            self._send({"hello": self.endpoint.protocol_version})
            reply = json.loads(self._reader.readline(self.endpoint.handshake_timeout))
            caps = reply["capabilities"]
            capabilities = Capabilities(
                protocol_version=int(caps["protocol_version"]),
                supports_future_covariates=bool(caps["supports_future_covariates"]),
                model_size_bytes=int(caps["model_size_bytes"]),
            )
        except (BrokenPipeError, TimeoutError, PluginError, ValueError, KeyError, TypeError) as exc:
            self.close()
            raise PluginError(f"plugin handshake failed: {exc}") from None
        if capabilities.protocol_version != self.endpoint.protocol_version:
            self.close()
            raise PluginError(
                "plugin handshake failed: version mismatch "
                f"(host {self.endpoint.protocol_version}, plugin {capabilities.protocol_version})"
            )
        self.capabilities = capabilities
        return capabilities

    def predict(self, windows: WindowSet) -> np.ndarray:
        """Strict prediction: raises on the first per-window failure."""
        values, errors = self.predict_with_errors(windows)
        if errors:
            seq, message = errors[0]
            raise PluginError(f"window {seq}: {message}")
        return values

    def predict_with_errors(self, windows: WindowSet) -> tuple[np.ndarray, list[tuple[int, str]]]:
        """Stream every window through the plugin, collecting per-window errors.

        Failed windows yield NaN rows. A broken stream fails all remaining
        windows rather than raising, so partial results survive.
        """
        if self.capabilities is None:
            raise PluginError("handshake must precede predict")
        layout = windows.layout
        layout_doc = {
            "input_channels": list(layout.input_channels),
            "future_channels": list(layout.future_channels),
            "target": layout.target,
            "target_index": layout.target_pos,
            "input_len": layout.input_len,
            "horizon": layout.horizon,
        }
        horizon = layout.horizon
        out = np.full((windows.n_windows, horizon), np.nan)
        errors: list[tuple[int, str]] = []
        broken = False
        for seq in range(windows.n_windows):
            if broken:
                errors.append((seq, "stream broken"))
                continue
            message = {
                "predict": {
                    "seq": seq,
                    "inputs": windows.inputs[seq].tolist(),
                    "future": windows.future_covs[seq].tolist(),
                    "layout": layout_doc,
                }
            }
            try:
                self._send(message)
                reply = json.loads(self._reader.readline(self.endpoint.predict_timeout))
            except (BrokenPipeError, PluginError) as exc:
                errors.append((seq, str(exc)))
                broken = True
                continue
            except TimeoutError as exc:
                errors.append((seq, str(exc)))
                broken = True
                continue
            except ValueError as exc:
                errors.append((seq, f"malformed reply: {exc}"))
                continue
            if "error" in reply:
                errors.append((int(reply["error"].get("seq", seq)), str(reply["error"].get("message", "unknown"))))
                continue
            if "prediction" not in reply:
                errors.append((seq, "malformed reply: missing prediction"))
                continue
            body = reply["prediction"]
            if body.get("seq") != seq:
                errors.append((seq, f"out-of-order reply: got seq {body.get('seq')}"))
                broken = True
                continue
            values = body.get("values")
            if not isinstance(values, list) or len(values) != horizon:
                errors.append((seq, "shape mismatch"))
                continue
            row = np.array(values, dtype=np.float64)
            if not np.all(np.isfinite(row)):
                errors.append((seq, "non-finite values"))
                continue
            out[seq] = row
        return out, errors

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdout is not None:
            self._proc.stdout.close()


def handshake(endpoint: PluginEndpoint) -> Capabilities:
    """Launch, handshake, and shut down again; returns the capabilities."""
    with PluginClient(endpoint) as client:
        return client.handshake()


def remote_predict(endpoint: PluginEndpoint, windows: WindowSet) -> tuple[np.ndarray, list[tuple[int, str]]]:
    """One-shot prediction round trip through a fresh plugin process."""
    with PluginClient(endpoint) as client:
        client.handshake()
        return client.predict_with_errors(windows)


def plugin_handle(client: PluginClient, windows: WindowSet, name_seed: int = 0) -> ForecasterHandle:
    """Wrap a handshaken plugin as a forecaster handle for sweeps and reports.

    The declared model size stands in for serialized bytes; such handles
    cannot be serialized in-repo.
    """
    if client.capabilities is None:
        raise PluginError("handshake must precede predict")
    return ForecasterHandle(
        family=FAMILY_PLUGIN,
        seed=name_seed,
        layout=windows.layout,
        params={"client": client},
        param_count=0,
        serialized_size=client.capabilities.model_size_bytes,
    )
