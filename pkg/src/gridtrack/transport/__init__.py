"""Peer-to-peer frame transport: length-framed codec, blocking REQ/REP with
latest-frame semantics, and non-blocking PUB/SUB with receiver-side conflation."""

from .framing import (
    DEFAULT_PORT,
    ENCODINGS,
    MAGIC,
    REP_BYTE,
    FrameError,
    FrameHeader,
    FrameMessage,
    decode_frame,
    encode_frame,
    read_frame,
)
from .mailbox import LatestFrameMailbox
from .pubsub import ConflationMap, PubSender, conflate
from .reqrep import FrameSender, pump_mailbox, send_frames_lockstep
from .server import FrameReceiver

__all__ = [
    "DEFAULT_PORT",
    "ENCODINGS",
    "MAGIC",
    "REP_BYTE",
    "FrameError",
    "FrameHeader",
    "FrameMessage",
    "decode_frame",
    "encode_frame",
    "read_frame",
    "LatestFrameMailbox",
    "ConflationMap",
    "PubSender",
    "conflate",
    "FrameSender",
    "pump_mailbox",
    "send_frames_lockstep",
    "FrameReceiver",
]
