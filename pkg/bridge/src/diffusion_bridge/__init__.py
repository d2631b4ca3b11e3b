"""TCP service exposing a text-to-video noise critic to the motion engine."""

from .backends import BackendResult, BackendUnavailable, EchoBackend
from .server import BridgeServer, serve
from .wire import Frame, FramingError, pack_frame, unpack_frame

__version__ = "0.1.0"

__all__ = [
    "BackendResult", "BackendUnavailable", "BridgeServer", "EchoBackend",
    "Frame", "FramingError", "pack_frame", "serve", "unpack_frame",
    "__version__",
]
