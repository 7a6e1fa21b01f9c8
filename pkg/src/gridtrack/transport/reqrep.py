"""Blocking REQ/REP frame sender.

The sender transmits one frame, then blocks until the receiver's 1-byte REP.
Nothing is ever queued behind an unacknowledged frame: pump_mailbox() takes
whatever is newest from a LatestFrameMailbox each time the line is free, and
send_frames_lockstep() replays a fixed sequence acknowledging every frame
(used for file replay and deterministic simulation).
"""

from __future__ import annotations

import logging
import socket
import threading
from typing import Iterable

from ..errors import ProtocolViolationError
from .framing import REP_BYTE, FrameMessage, encode_frame
from .mailbox import LatestFrameMailbox

log = logging.getLogger(__name__)

DEFAULT_REP_TIMEOUT = 5.0
DEFAULT_CONNECT_TIMEOUT = 5.0


class FrameSender:
    """REQ/REP client owned by a single sending context.

    send() returns True once the frame is acknowledged. On REP timeout the
    sender reconnects and returns False so the caller can move on to its
    newest frame; sequence numbering is the caller's and simply resumes.
    """

    def __init__(self, host: str, port: int,
                 rep_timeout: float = DEFAULT_REP_TIMEOUT,
                 connect_timeout: float = DEFAULT_CONNECT_TIMEOUT):
        self._host = host
        self._port = port
        self._rep_timeout = rep_timeout
        self._connect_timeout = connect_timeout
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()
        self.reconnects = 0
        self.rep_timeouts = 0
        self.max_outstanding = 0
        self._outstanding = 0

    def _connect(self) -> None:
        sock = socket.create_connection((self._host, self._port),
                                        timeout=self._connect_timeout)
        sock.settimeout(self._rep_timeout)
        self._sock = sock

    def _drop_connection(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def _reconnect(self) -> None:
        self._drop_connection()
        self.reconnects += 1
        try:
            self._connect()
        except OSError as exc:
            log.warning("reconnect to %s:%s failed: %s", self._host, self._port, exc)
            self._sock = None

    def send(self, message: FrameMessage) -> bool:
        """Transmit one frame and await the REP. One in flight at a time."""
        if not self._lock.acquire(blocking=False):
            raise ProtocolViolationError(
                "send() called while a previous frame is still unacknowledged"
            )
        try:
            if self._sock is None:
                self._connect()
            data = encode_frame(message)
            self._outstanding += 1
            self.max_outstanding = max(self.max_outstanding, self._outstanding)
            try:
                self._sock.sendall(data)
                rep = self._sock.recv(1)
            except TimeoutError:
                self.rep_timeouts += 1
                log.warning("REP timeout after %.1fs from %s:%s; reconnecting",
                            self._rep_timeout, self._host, self._port)
                self._reconnect()
                return False
            except OSError as exc:
                log.warning("send to %s:%s failed: %s; reconnecting",
                            self._host, self._port, exc)
                self._reconnect()
                return False
            finally:
                self._outstanding -= 1
            if rep == b"":
                self._reconnect()
                return False
            if rep != REP_BYTE:
                raise ProtocolViolationError(f"unexpected REP byte {rep!r}")
            return True
        finally:
            self._lock.release()

    def close(self) -> None:
        self._drop_connection()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def send_frames_lockstep(sender: FrameSender, frames: Iterable[FrameMessage]) -> int:
    """Replay every frame in order, waiting for each REP (retrying on timeout)."""
    sent = 0
    for message in frames:
        while not sender.send(message):
            pass
        sent += 1
    return sent


def pump_mailbox(sender: FrameSender, mailbox: LatestFrameMailbox) -> int:
    """Live send loop: newest available frame each time the line is free.

    Runs until the mailbox is closed and drained; returns acknowledged count.
    """
    delivered = 0
    while True:
        message = mailbox.take(timeout=0.1)
        if message is None:
            if mailbox.closed:
                return delivered
            continue
        if sender.send(message):
            delivered += 1
