"""The serving loop: JSON lines in, JSON lines out, until stdin closes.

Request handling is strictly sequential. Every reply line is flushed
immediately. A failing model call produces an ``error`` message for that
sequence number and the process stays alive; a malformed input line gets
an error reply as well. End of input is a clean exit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import IO

from .models import ModelFn, load_entrypoint, seasonal_naive

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class AdapterConfig:
    """What the adapter serves and how it announces itself."""

    model: ModelFn
    horizon: int
    declared_size: int = 4096
    supports_future_covariates: bool = True


def _reply(stream: IO[str], message: dict) -> None:
    stream.write(json.dumps(message) + "\n")
    stream.flush()


def _handle_predict(config: AdapterConfig, body: dict) -> dict:
    seq = body["seq"]
    layout = body["layout"]
    if layout["horizon"] != config.horizon:
        return {"error": {"seq": seq, "message": f"horizon mismatch: serving {config.horizon}"}}
    values = config.model(body["inputs"], body["future"], layout)
    values = [float(v) for v in values]
    if len(values) != config.horizon or not all(math.isfinite(v) for v in values):
        return {"error": {"seq": seq, "message": "model returned an invalid forecast"}}
    return {"prediction": {"seq": seq, "values": values}}


def serve(config: AdapterConfig, stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> int:
    """Answer protocol messages until the input stream closes; returns 0."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            message = json.loads(line)
        except ValueError:
            _reply(stdout, {"error": {"seq": -1, "message": "malformed message"}})
            continue
        if "hello" in message:
            _reply(
                stdout,
                {
                    "capabilities": {
                        "protocol_version": PROTOCOL_VERSION,
                        "supports_future_covariates": config.supports_future_covariates,
                        "model_size_bytes": config.declared_size,
                    }
                },
            )
        elif "predict" in message:
            body = message["predict"]
            try:
                _reply(stdout, _handle_predict(config, body))
            except Exception as exc:  # wrapped-model failure: report, keep serving
                seq = body.get("seq", -1) if isinstance(body, dict) else -1
                _reply(stdout, {"error": {"seq": seq, "message": str(exc)}})
        else:
            _reply(stdout, {"error": {"seq": -1, "message": "unknown message"}})
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="forecast-adapter",
        description="Serve a Python forecasting model over the sewerbench line protocol",
    )
    parser.add_argument("--horizon", type=int, required=True, help="forecast steps per window")
    parser.add_argument(
        "--model",
        default="forecast_adapter.models:seasonal_naive",
        help="model entrypoint as module:function (default: built-in seasonal naive)",
    )
    parser.add_argument("--size", type=int, default=4096, help="declared model size in bytes")
    parser.add_argument(
        "--no-future-covariates",
        action="store_true",
        help="declare that future covariate rows are ignored",
    )
    args = parser.parse_args(argv)
    config = AdapterConfig(
        model=load_entrypoint(args.model),
        horizon=args.horizon,
        declared_size=args.size,
        supports_future_covariates=not args.no_future_covariates,
    )
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
