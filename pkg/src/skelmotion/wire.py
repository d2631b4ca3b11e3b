"""Socket framing for talking to an external critic service.

Each message is a little-endian u32 byte length, a UTF-8 JSON header of
that length, then zero or more raw float32 little-endian tensor payloads
in the order declared by the header's "shapes" list.  Requests carry one
tensor (the frames); responses carry three (unconditional, text, and
injected noise).  An "error"-typed header carries no payloads and maps to
a raised BridgeError on the client; the connection stays usable.
"""

from __future__ import annotations

import json
import socket
import struct

import numpy as np

from .mosds import CriticRequest, CriticResponse

_LEN = struct.Struct("<I")
MAX_HEADER_BYTES = 1 << 20


class WireError(ValueError):
    """Malformed bytes on the wire."""


class BridgeError(RuntimeError):
    """Error reported by the critic service itself."""


def encode_message(header: dict, arrays=()) -> bytes:
    header = dict(header)
    header["shapes"] = [list(np.asarray(a).shape) for a in arrays]
    header["dtype"] = "float32"
    blob = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    parts = [_LEN.pack(len(blob)), blob]
    for a in arrays:
        parts.append(np.ascontiguousarray(a, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_message(buf: bytes):
    """Inverse of encode_message; returns (header, [float32 arrays])."""
    if len(buf) < _LEN.size:
        raise WireError("message shorter than its length prefix")
    (hlen,) = _LEN.unpack_from(buf)
    if hlen > MAX_HEADER_BYTES:
        raise WireError(f"header length {hlen} exceeds limit")
    if len(buf) < _LEN.size + hlen:
        raise WireError("truncated header")
    header = json.loads(buf[_LEN.size:_LEN.size + hlen].decode("utf-8"))
    arrays, offset = [], _LEN.size + hlen
    for shape in header.get("shapes", []):
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 4
        if len(buf) < offset + nbytes:
            raise WireError(f"payload for shape {shape} truncated")
        flat = np.frombuffer(buf[offset:offset + nbytes], dtype="<f4")
        arrays.append(flat.reshape(shape).copy())
        offset += nbytes
    if offset != len(buf):
        raise WireError(f"{len(buf) - offset} trailing bytes after payloads")
    return header, arrays


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 16))
        if not chunk:
            raise WireError("connection closed mid-message")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def write_message(sock: socket.socket, header: dict, arrays=()) -> None:
    sock.sendall(encode_message(header, arrays))


def read_message(sock: socket.socket):
    """Read one framed message from a socket; returns (header, arrays)."""
    (hlen,) = _LEN.unpack(_recv_exact(sock, _LEN.size))
    if hlen > MAX_HEADER_BYTES:
        raise WireError(f"header length {hlen} exceeds limit")
    header = json.loads(_recv_exact(sock, hlen).decode("utf-8"))
    arrays = []
    for shape in header.get("shapes", []):
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        flat = np.frombuffer(_recv_exact(sock, count * 4), dtype="<f4")
        arrays.append(flat.reshape(shape).copy())
    return header, arrays


def request_header(req: CriticRequest) -> dict:
    return {
        "type": "request",
        "tau": req.tau,
        "prompt": req.prompt,
        "cfg_scale": req.cfg_scale,
        "seed": req.seed,
    }


def response_from_wire(header: dict, arrays) -> CriticResponse:
    if header.get("type") == "error":
        raise BridgeError(header.get("message", "critic service error"))
    if header.get("type") != "response":
        raise WireError(f"unexpected message type {header.get('type')!r}")
    if len(arrays) != 3:
        raise WireError(f"response carries {len(arrays)} tensors, wanted 3")
    uncond, text, injected = (a.astype(np.float64) for a in arrays)
    return CriticResponse(
        eps_uncond=uncond, eps_text=text, eps_injected=injected,
        latent_shape=tuple(arrays[0].shape),
        schedule_weight=float(header.get("schedule_weight", 1.0)))


class BridgeCritic:
    """Blocking critic client over one persistent TCP connection."""

    def __init__(self, address: str):
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bridge address {address!r} is not host:port")
        self.host, self.port = host, int(port)
        self._sock = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            self._sock = socket.create_connection((self.host, self.port))
        return self._sock

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __call__(self, req: CriticRequest) -> CriticResponse:
        sock = self._connect()
        try:
            write_message(sock, request_header(req), [req.frames])
            header, arrays = read_message(sock)
        except (OSError, WireError):
            self.close()
            raise
        return response_from_wire(header, arrays)
