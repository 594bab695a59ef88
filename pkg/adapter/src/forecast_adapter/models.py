"""Model hook point and the built-in demo model.

A model is any callable with the signature

    model(inputs, future, layout) -> list[float]

where ``inputs`` is the input window as ``input_len`` rows of channel
values, ``future`` the known future covariates as ``horizon`` rows, and
``layout`` the layout object from the predict message (notably
``target_index`` and ``horizon``). It must return exactly ``horizon``
finite floats.

Users mount their own models (including deep architectures loaded from
checkpoints) by passing ``--model package.module:function`` to the
adapter; see the README for a worked example.
"""

from __future__ import annotations

import importlib
from typing import Callable

ModelFn = Callable[[list, list, dict], list]

SEASON_STEPS = 24


def seasonal_naive(inputs: list, future: list, layout: dict) -> list:
    """Repeat the value observed one season (24 steps) before each step."""
    input_len = len(inputs)
    if input_len < SEASON_STEPS:
        raise ValueError("input window shorter than the seasonal period")
    target_index = layout["target_index"]
    return [
        inputs[input_len - SEASON_STEPS + (s % SEASON_STEPS)][target_index]
        for s in range(layout["horizon"])
    ]


def load_entrypoint(spec: str) -> ModelFn:
    """Resolve a ``module:function`` string to the callable it names."""
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise ValueError(f"model entrypoint must look like 'module:function', got {spec!r}")
    module = importlib.import_module(module_name)
    fn = getattr(module, attr)
    if not callable(fn):
        raise ValueError(f"{spec!r} is not callable")
    return fn
