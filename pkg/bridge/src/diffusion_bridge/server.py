"""Socket service that answers critic requests with noise predictions.

One thread per client connection; backend calls are serialized behind a
single lock so a device-bound model never sees concurrent inference.
Request problems are answered with an error frame and the connection is
kept; only undecodable byte streams close it, because after a framing
error the next message boundary is unknowable.
"""

from __future__ import annotations

import socket
import sys
import threading

import numpy as np

from . import wire
from .backends import BackendResult


def _validated(frame: wire.Frame):
    """Pull (frames, tau, prompt, cfg_scale, seed) out of a request frame."""
    if frame.kind != "request":
        raise ValueError(f"unexpected message type {frame.kind!r}")
    if len(frame.arrays) != 1:
        raise ValueError(
            f"request carries {len(frame.arrays)} tensors, wanted 1")
    frames = frame.arrays[0]
    if frames.ndim != 4:
        raise ValueError("frames must be (frames, channels, height, width)")
    if not np.all(np.isfinite(frames)):
        raise ValueError("frames contain non-finite values")
    header = frame.header
    try:
        tau = float(header["tau"])
        prompt = str(header["prompt"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad request header: {exc}") from exc
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"timestep fraction {tau} outside [0, 1]")
    cfg_scale = float(header.get("cfg_scale", 10.0))
    seed = int(header.get("seed", 0))
    return frames, tau, prompt, cfg_scale, seed


def _response_bytes(result: BackendResult) -> bytes:
    return wire.pack_frame(
        {"type": "response",
         "schedule_weight": float(result.schedule_weight)},
        [result.eps_uncond, result.eps_text, result.eps_injected])


class BridgeServer:
    """Accepts connections and serves one backend behind the wire format."""

    def __init__(self, backend, host: str = "127.0.0.1", port: int = 0):
        self._backend = backend
        self._infer_lock = threading.Lock()
        self._listener = socket.create_server((host, port))
        self._threads: list[threading.Thread] = []
        self._accepting = None
        self._closing = threading.Event()

    @property
    def address(self) -> str:
        host, port = self._listener.getsockname()[:2]
        return f"{host}:{port}"

    def start(self) -> "BridgeServer":
        self._accepting = threading.Thread(target=self._accept_loop,
                                           daemon=True)
        self._accepting.start()
        return self

    def _accept_loop(self) -> None:
        while not self._closing.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve_connection,
                                 args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_connection(self, conn: socket.socket) -> None:
        reader = wire.SocketReader(conn)
        with conn:
            while not self._closing.is_set():
                try:
                    frame = reader.read_frame()
                except wire.ConnectionClosed:
                    return
                except (wire.FramingError, OSError) as exc:
                    self._send_error(conn, f"framing: {exc}")
                    return
                try:
                    request = _validated(frame)
                except ValueError as exc:
                    if not self._send_error(conn, str(exc)):
                        return
                    continue
                try:
                    with self._infer_lock:
                        result = self._backend(*request)
                    payload = _response_bytes(result)
                except MemoryError:
                    if not self._send_error(conn, "backend out of memory"):
                        return
                    continue
                except Exception as exc:
                    if not self._send_error(conn, f"backend: {exc}"):
                        return
                    continue
                try:
                    conn.sendall(payload)
                except OSError:
                    return

    @staticmethod
    def _send_error(conn: socket.socket, message: str) -> bool:
        try:
            conn.sendall(wire.error_frame(message))
            return True
        except OSError:
            return False

    def serve_forever(self) -> None:
        self.start()
        try:
            self._closing.wait()
        except KeyboardInterrupt:
            pass
        finally:
            self.close()

    def close(self) -> None:
        self._closing.set()
        self._listener.close()


def serve(backend, host: str, port: int,
          announce=sys.stderr) -> BridgeServer:
    server = BridgeServer(backend, host, port)
    if announce is not None:
        print(f"listening on {server.address}", file=announce, flush=True)
    return server.start()
