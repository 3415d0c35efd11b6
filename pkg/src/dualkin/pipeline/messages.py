"""Pipeline message types and their binary wire framing.

Frames are little-endian: a u32 payload length, a u8 type tag, then the
payload as consecutive f64 fields in declared order.  Tags: 0x01
measurement, 0x02 parameter update, 0x03 threshold, 0x04 shutdown.  The
length counts only the payload bytes after the tag.  Integers ride as
exact f64 values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Measurement",
    "ParamUpdate",
    "Threshold",
    "Shutdown",
    "ProtocolError",
    "encode",
    "decode",
    "FrameReader",
]

TAG_MEASUREMENT = 0x01
TAG_PARAM_UPDATE = 0x02
TAG_THRESHOLD = 0x03
TAG_SHUTDOWN = 0x04

_HEAD = struct.Struct("<IB")


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class Measurement:
    k: int          # 1-based sample index, strictly increasing per stream
    t: float        # generation timestamp (s)
    y: np.ndarray   # 6M sensor values

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


@dataclass(frozen=True)
class ParamUpdate:
    source: int     # emitting node index
    k_used: int     # data size the estimate was computed from
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))


@dataclass(frozen=True)
class Threshold:
    beta: int


@dataclass(frozen=True)
class Shutdown:
    pass


def encode(msg) -> bytes:
    if isinstance(msg, Measurement):
        tag = TAG_MEASUREMENT
        fields = np.concatenate([[float(msg.k), float(msg.t)], msg.y])
    elif isinstance(msg, ParamUpdate):
        tag = TAG_PARAM_UPDATE
        fields = np.concatenate([[float(msg.source), float(msg.k_used)], msg.theta])
    elif isinstance(msg, Threshold):
        tag = TAG_THRESHOLD
        fields = np.array([float(msg.beta)])
    elif isinstance(msg, Shutdown):
        tag = TAG_SHUTDOWN
        fields = np.array([])
    else:
        raise TypeError(f"not a pipeline message: {msg!r}")
    payload = np.asarray(fields, dtype="<f8").tobytes()
    return _HEAD.pack(len(payload), tag) + payload


def decode(tag: int, payload: bytes):
    fields = np.frombuffer(payload, dtype="<f8")
    if tag == TAG_MEASUREMENT:
        if len(fields) < 2:
            raise ProtocolError("measurement frame too short")
        return Measurement(k=int(fields[0]), t=float(fields[1]), y=fields[2:].copy())
    if tag == TAG_PARAM_UPDATE:
        if len(fields) < 2:
            raise ProtocolError("parameter-update frame too short")
        return ParamUpdate(source=int(fields[0]), k_used=int(fields[1]), theta=fields[2:].copy())
    if tag == TAG_THRESHOLD:
        if len(fields) != 1:
            raise ProtocolError("threshold frame must carry exactly one field")
        return Threshold(beta=int(fields[0]))
    if tag == TAG_SHUTDOWN:
        if len(fields) != 0:
            raise ProtocolError("shutdown frame carries no payload")
        return Shutdown()
    raise ProtocolError(f"unknown frame tag 0x{tag:02x}")


def decode_frame(data: bytes):
    """Decode one complete frame (header + payload)."""
    if len(data) < _HEAD.size:
        raise ProtocolError("frame shorter than header")
    length, tag = _HEAD.unpack_from(data)
    if len(data) != _HEAD.size + length:
        raise ProtocolError("frame length mismatch")
    return decode(tag, data[_HEAD.size :])


class FrameReader:
    """Reads framed messages from a stream socket."""

    def __init__(self, sock):
        self._sock = sock

    def _read_exact(self, nbytes: int) -> bytes:
        chunks = []
        remaining = nbytes
        while remaining:
            chunk = self._sock.recv(remaining)
            if not chunk:
                raise ProtocolError("connection closed mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def read(self):
        head = self._read_exact(_HEAD.size)
        length, tag = _HEAD.unpack(head)
        payload = self._read_exact(length) if length else b""
        return decode(tag, payload)


def send_message(sock, msg) -> None:
    sock.sendall(encode(msg))
