"""Reference adapter exposing Python forecasting models over JSON lines.

Implements the plugin side of the sewerbench wire protocol (version 1):
a handshake reply followed by one prediction (or error) line per predict
message. Wrap any callable with the model signature and point the
adapter at it via ``module:function`` entrypoint syntax.
"""

from .models import load_entrypoint, seasonal_naive
from .serve import AdapterConfig, serve

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "serve", "seasonal_naive", "load_entrypoint"]
