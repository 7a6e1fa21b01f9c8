"""Length-framed frame messages.

Wire layout per message, big-endian lengths:

    "GTK1" | u32 header_len | UTF-8 JSON header | u32 payload_len | payload

Header JSON: {"v":1,"cam":...,"seq":...,"ts_us":...,"w":...,"h":...,"enc":...}.
The reply in REQ/REP mode is the single byte 0x01.

Errors that leave the byte stream in sync (bad header fields, payload
inconsistent with its encoding) are flagged recoverable so a receiver can keep
the session alive; magic/length corruption is not recoverable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

from ..errors import MalformedMessageError
from ..pose import PERSON_RECORD_SIZE

MAGIC = b"GTK1"
REP_BYTE = b"\x01"
DEFAULT_PORT = 5555
WIRE_VERSION = 1

ENCODINGS = ("jpeg", "raw8", "kp17")

MAX_CAMERA_ID_BYTES = 64
MAX_HEADER_LEN = 4096
MAX_PAYLOAD_LEN = 1 << 26  # 64 MiB

_U32 = struct.Struct(">I")
_U64_MAX = (1 << 64) - 1


class FrameError(MalformedMessageError):
    """Malformed frame; .recoverable tells whether the stream is still in sync."""

    def __init__(self, message: str, recoverable: bool = False):
        super().__init__(message)
        self.recoverable = recoverable


@dataclass(frozen=True)
class FrameHeader:
    camera_id: str
    seq: int
    ts_us: int
    width: int
    height: int
    encoding: str

    def __post_init__(self):
        if len(self.camera_id.encode("utf-8")) > MAX_CAMERA_ID_BYTES:
            raise ValueError(f"camera_id longer than {MAX_CAMERA_ID_BYTES} bytes")
        if not self.camera_id:
            raise ValueError("camera_id must be non-empty")
        if not (0 <= self.seq <= _U64_MAX):
            raise ValueError(f"seq out of u64 range: {self.seq}")
        if self.ts_us < 0:
            raise ValueError(f"ts_us must be >= 0, got {self.ts_us}")
        if self.width < 0 or self.height < 0:
            raise ValueError("width/height must be >= 0")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")


@dataclass(frozen=True)
class FrameMessage:
    header: FrameHeader
    payload: bytes

    def __post_init__(self):
        _check_payload(self.header, self.payload, exc=ValueError)


def _check_payload(header: FrameHeader, payload: bytes, exc=ValueError) -> None:
    if header.encoding == "raw8":
        expected = header.width * header.height
        if len(payload) != expected:
            raise exc(
                f"raw8 payload is {len(payload)} bytes, expected "
                f"{header.width}x{header.height} = {expected}"
            )
    elif header.encoding == "kp17":
        if len(payload) < 2:
            raise exc("kp17 payload shorter than its count field")
        count = int.from_bytes(payload[:2], "little")
        expected = 2 + count * PERSON_RECORD_SIZE
        if len(payload) != expected:
            raise exc(
                f"kp17 payload is {len(payload)} bytes, expected {expected} "
                f"for {count} person(s)"
            )


def _header_to_json(header: FrameHeader) -> bytes:
    doc = {
        "v": WIRE_VERSION,
        "cam": header.camera_id,
        "seq": header.seq,
        "ts_us": header.ts_us,
        "w": header.width,
        "h": header.height,
        "enc": header.encoding,
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def _header_from_json(raw: bytes) -> FrameHeader:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"header is not valid JSON: {exc}", recoverable=True) from exc
    if not isinstance(doc, dict):
        raise FrameError("header JSON is not an object", recoverable=True)
    if doc.get("v") != WIRE_VERSION:
        raise FrameError(f"unsupported wire version {doc.get('v')!r}", recoverable=True)
    try:
        return FrameHeader(
            camera_id=doc["cam"],
            seq=doc["seq"],
            ts_us=doc["ts_us"],
            width=doc["w"],
            height=doc["h"],
            encoding=doc["enc"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FrameError(f"invalid header fields: {exc}", recoverable=True) from exc


def encode_frame(message: FrameMessage) -> bytes:
    header_json = _header_to_json(message.header)
    return b"".join((
        MAGIC,
        _U32.pack(len(header_json)),
        header_json,
        _U32.pack(len(message.payload)),
        message.payload,
    ))


def decode_frame(data: bytes) -> FrameMessage:
    """Decode one complete frame; the buffer must contain exactly one frame."""
    if len(data) < len(MAGIC) + _U32.size:
        raise FrameError(f"frame truncated at {len(data)} bytes")
    if data[:4] != MAGIC:
        raise FrameError(f"bad magic {data[:4]!r}")
    (header_len,) = _U32.unpack_from(data, 4)
    if header_len > MAX_HEADER_LEN:
        raise FrameError(f"header length {header_len} exceeds cap {MAX_HEADER_LEN}")
    pos = 8
    if len(data) < pos + header_len + _U32.size:
        raise FrameError("frame truncated inside header")
    header_json = data[pos:pos + header_len]
    pos += header_len
    (payload_len,) = _U32.unpack_from(data, pos)
    pos += _U32.size
    if payload_len > MAX_PAYLOAD_LEN:
        raise FrameError(f"payload length {payload_len} exceeds cap {MAX_PAYLOAD_LEN}")
    if len(data) != pos + payload_len:
        raise FrameError(
            f"frame is {len(data)} bytes, expected {pos + payload_len}"
        )
    header = _header_from_json(header_json)
    payload = data[pos:pos + payload_len]
    _check_payload(header, payload, exc=lambda m: FrameError(m, recoverable=True))
    return FrameMessage(header=header, payload=payload)


def read_exact(recv, n: int) -> bytes | None:
    """Read exactly n bytes from a recv(nbytes) callable.

    Returns None on clean EOF before the first byte; raises FrameError on EOF
    mid-read.
    """
    chunks = []
    got = 0
    while got < n:
        chunk = recv(n - got)
        if not chunk:
            if got == 0:
                return None
            raise FrameError(f"connection closed mid-read ({got}/{n} bytes)")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def iter_frames_from_file(path) -> "list[FrameMessage]":
    """Decode a file of back-to-back wire frames (a captured stream)."""
    frames = []
    with open(path, "rb") as fh:
        while True:
            frame = read_frame(fh.read)
            if frame is None:
                return frames
            frames.append(frame)


def read_frame(recv) -> FrameMessage | None:
    """Read one frame from a byte stream via a recv(nbytes) callable.

    Returns None on clean EOF at a frame boundary. Recoverable errors are
    raised only after the full frame has been consumed, so the caller may
    continue reading subsequent frames.
    """
    magic = read_exact(recv, len(MAGIC))
    if magic is None:
        return None
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    header_len_raw = read_exact(recv, _U32.size)
    if header_len_raw is None:
        raise FrameError("connection closed before header length")
    (header_len,) = _U32.unpack(header_len_raw)
    if header_len > MAX_HEADER_LEN:
        raise FrameError(f"header length {header_len} exceeds cap {MAX_HEADER_LEN}")
    header_json = read_exact(recv, header_len)
    if header_json is None:
        raise FrameError("connection closed before header")
    payload_len_raw = read_exact(recv, _U32.size)
    if payload_len_raw is None:
        raise FrameError("connection closed before payload length")
    (payload_len,) = _U32.unpack(payload_len_raw)
    if payload_len > MAX_PAYLOAD_LEN:
        raise FrameError(f"payload length {payload_len} exceeds cap {MAX_PAYLOAD_LEN}")
    payload = read_exact(recv, payload_len)
    if payload is None:
        raise FrameError("connection closed before payload")
    # Stream is in sync past this point; header/payload faults are recoverable.
    header = _header_from_json(header_json)
    _check_payload(header, payload, exc=lambda m: FrameError(m, recoverable=True))
    return FrameMessage(header=header, payload=payload)
