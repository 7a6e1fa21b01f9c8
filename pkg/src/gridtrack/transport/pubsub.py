"""PUB/SUB side: fire-and-forget sending and receiver-side conflation.

Conflation keeps exactly one message per sender, the one with the highest
sequence number, so a slow consumer always processes the freshest frame and
never works through a backlog.
"""

from __future__ import annotations

import logging
import socket
import threading
from typing import MutableMapping

from .framing import FrameMessage, encode_frame

log = logging.getLogger(__name__)


def conflate(state: MutableMapping[str, FrameMessage],
             message: FrameMessage) -> MutableMapping[str, FrameMessage]:
    """Fold one arrival into the latest-per-sender map. Stale seq is discarded."""
    current = state.get(message.header.camera_id)
    if current is None or message.header.seq > current.header.seq:
        state[message.header.camera_id] = message
    return state


class ConflationMap:
    """Thread-safe latest-per-sender map; one writer per sender, any readers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._state: dict[str, FrameMessage] = {}
        self._discarded = 0

    def offer(self, message: FrameMessage) -> bool:
        """Fold in one message; returns True when it became the newest."""
        with self._lock:
            conflate(self._state, message)
            kept = self._state.get(message.header.camera_id) is message
            if not kept:
                self._discarded += 1
            return kept

    def latest(self) -> dict[str, FrameMessage]:
        """Snapshot of the newest message per camera."""
        with self._lock:
            return dict(self._state)

    def pop(self, camera_id: str) -> FrameMessage | None:
        """Remove and return the newest message for one camera, if any."""
        with self._lock:
            return self._state.pop(camera_id, None)

    def __len__(self) -> int:
        with self._lock:
            return len(self._state)

    @property
    def discarded(self) -> int:
        with self._lock:
            return self._discarded


class PubSender:
    """Non-blocking publisher: writes frames without expecting a reply."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        self._host = host
        self._port = port
        self._connect_timeout = connect_timeout
        self._sock: socket.socket | None = None

    def _connect(self) -> None:
        self._sock = socket.create_connection((self._host, self._port),
                                              timeout=self._connect_timeout)

    def publish(self, message: FrameMessage) -> bool:
        """Best-effort send; returns False when the write failed (reconnects once)."""
        if self._sock is None:
            self._connect()
        try:
            self._sock.sendall(encode_frame(message))
            return True
        except OSError as exc:
            log.warning("publish to %s:%s failed: %s", self._host, self._port, exc)
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
            return False

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
