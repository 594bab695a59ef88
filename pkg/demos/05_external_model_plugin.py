"""
Attaching an external forecaster over the line protocol
=======================================================

Heavy architectures do not have to live in this package: any process
that speaks the JSON-lines protocol (see docs/protocol.md) can serve
predictions to the harness. This demo writes a tiny standalone plugin to
a temp file, launches it as a subprocess and verifies it matches the
in-repo persistence family bit for bit.

The reference implementation of a full adapter (handshake, error
handling, model hook) lives in the separate `adapter/` package.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from sewerbench import (
    ForecastTask,
    PluginEndpoint,
    SynthConfig,
    build_windows,
    fit,
    generate,
    predict,
    remote_predict,
)
from sewerbench.plugin import handshake

PLUGIN_SOURCE = '''
import json, sys
for line in sys.stdin:
    msg = json.loads(line)
    if "hello" in msg:
        print(json.dumps({"capabilities": {"protocol_version": 1,
              "supports_future_covariates": False, "model_size_bytes": 64}}))
    else:
        body = msg["predict"]
        last = body["inputs"][-1][body["layout"]["target_index"]]
        print(json.dumps({"prediction": {"seq": body["seq"],
              "values": [last] * body["layout"]["horizon"]}}))
    sys.stdout.flush()
'''

with tempfile.NamedTemporaryFile("w", suffix=".py", delete=False) as handle:
    handle.write(PLUGIN_SOURCE)
    plugin_path = Path(handle.name)

endpoint = PluginEndpoint((sys.executable, str(plugin_path)))

caps = handshake(endpoint)
print(f"handshake ok: version {caps.protocol_version}, "
      f"declared size {caps.model_size_bytes} bytes")

frame = generate(SynthConfig(length=600, seed=2))
windows = build_windows(frame, ForecastTask(input_len=48, horizon=12))
remote_values, errors = remote_predict(endpoint, windows)
print(f"{windows.n_windows} windows round-tripped, {len(errors)} failures")

local_values = predict(fit("persistence", windows), windows)
assert np.array_equal(remote_values, local_values)
print("external plugin matches in-repo persistence bit for bit")

plugin_path.unlink()
