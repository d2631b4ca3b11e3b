"""Message framing for the critic service socket.

One message is a little-endian uint32 header length, that many bytes of
UTF-8 JSON, then one raw little-endian float32 payload per entry in the
header's "shapes" list, concatenated in order.  Three header types exist:

  request   one payload (the rendered frames) plus tau, prompt, cfg_scale,
            and seed fields
  response  three payloads (unconditional, text-conditioned, and injected
            noise) plus a schedule_weight field
  error     no payloads; a human-readable "message" field

The framing layer is deliberately dumb: it moves named tensors and a JSON
dict, and everything above it decides what the fields mean.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass, field

import numpy as np

HEADER_LEN = struct.Struct("<I")
HEADER_LIMIT = 1 << 20


class FramingError(ValueError):
    """Bytes on the wire do not form a valid message."""


@dataclass
class Frame:
    """A decoded message: its header dict and payload arrays in order."""

    header: dict
    arrays: list = field(default_factory=list)

    @property
    def kind(self) -> str:
        return str(self.header.get("type", ""))


def pack_frame(header: dict, arrays=()) -> bytes:
    """Serialize a header and float32 payloads into one wire message."""
    # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d, and
    # tobytes() already serializes in C order for any layout
    arrays = [np.asarray(a, dtype="<f4") for a in arrays]
    full = dict(header)
    full["shapes"] = [list(a.shape) for a in arrays]
    full["dtype"] = "float32"
    blob = json.dumps(full, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    if len(blob) > HEADER_LIMIT:
        raise FramingError(f"header of {len(blob)} bytes exceeds limit")
    return b"".join([HEADER_LEN.pack(len(blob)), blob]
                    + [a.tobytes() for a in arrays])


def _payload_counts(header: dict):
    for shape in header.get("shapes", []):
        if not all(isinstance(n, int) and n >= 0 for n in shape):
            raise FramingError(f"bad shape entry {shape!r}")
        yield shape, int(np.prod(shape, dtype=np.int64)) if shape else 1


def unpack_frame(buf: bytes) -> Frame:
    """Inverse of pack_frame; rejects truncated or trailing bytes."""
    if len(buf) < HEADER_LEN.size:
        raise FramingError("message shorter than its length prefix")
    (hlen,) = HEADER_LEN.unpack_from(buf)
    if hlen > HEADER_LIMIT:
        raise FramingError(f"header length {hlen} exceeds limit")
    if len(buf) < HEADER_LEN.size + hlen:
        raise FramingError("truncated header")
    try:
        header = json.loads(buf[HEADER_LEN.size:HEADER_LEN.size + hlen])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FramingError(f"header is not JSON: {exc}") from exc
    arrays, offset = [], HEADER_LEN.size + hlen
    for shape, count in _payload_counts(header):
        nbytes = count * 4
        if len(buf) < offset + nbytes:
            raise FramingError(f"payload for shape {shape} truncated")
        arr = np.frombuffer(buf[offset:offset + nbytes], dtype="<f4")
        arrays.append(arr.reshape(shape).copy())
        offset += nbytes
    if offset != len(buf):
        raise FramingError(f"{len(buf) - offset} trailing bytes")
    return Frame(header=header, arrays=arrays)


class SocketReader:
    """Blocking frame reader over a connected socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    def _exactly(self, n: int) -> bytes:
        chunks = []
        while n:
            chunk = self._sock.recv(min(n, 1 << 16))
            if not chunk:
                raise ConnectionClosed("peer closed the connection")
            chunks.append(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    def read_frame(self) -> Frame:
        (hlen,) = HEADER_LEN.unpack(self._exactly(HEADER_LEN.size))
        if hlen > HEADER_LIMIT:
            raise FramingError(f"header length {hlen} exceeds limit")
        try:
            header = json.loads(self._exactly(hlen))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FramingError(f"header is not JSON: {exc}") from exc
        arrays = []
        for shape, count in _payload_counts(header):
            arr = np.frombuffer(self._exactly(count * 4), dtype="<f4")
            arrays.append(arr.reshape(shape).copy())
        return Frame(header=header, arrays=arrays)


class ConnectionClosed(EOFError):
    """Peer went away between messages or mid-message."""


def send_frame(sock: socket.socket, header: dict, arrays=()) -> None:
    sock.sendall(pack_frame(header, arrays))


def error_frame(message: str) -> bytes:
    return pack_frame({"type": "error", "message": message})
