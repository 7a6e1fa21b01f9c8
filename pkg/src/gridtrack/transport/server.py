"""Frame receiver: accepts camera connections and delivers frames in order.

One thread per session. In REQ/REP mode the REP byte is written only after the
handler returns, which is what throttles the senders. With send_rep=False the
receiver behaves as the subscribing end of PUB/SUB: it reads as fast as frames
arrive and never acknowledges.
"""

from __future__ import annotations

import logging
import socket
import threading
from typing import Callable

from .framing import REP_BYTE, FrameError, FrameMessage, read_frame

log = logging.getLogger(__name__)

_POLL_S = 0.2


class FrameReceiver:
    """Listens for frame streams and invokes handler(message) per delivery.

    Frames whose seq does not advance past the last one delivered on the same
    (connection, camera) are dropped and counted, keeping delivered sequence
    numbers strictly increasing per sender. Recoverable decode faults are
    counted and acknowledged so the session survives one bad message.
    """

    def __init__(self, handler: Callable[[FrameMessage], None],
                 host: str = "127.0.0.1", port: int = 0,
                 send_rep: bool = True):
        self._handler = handler
        self._send_rep = send_rep
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._conns: list[socket.socket] = []
        self._stats_lock = threading.Lock()
        self.stats = {
            "delivered": 0,
            "malformed": 0,
            "desync": 0,
            "stale_seq": 0,
            "handler_errors": 0,
            "sessions": 0,
        }

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()

    def _count(self, key: str, n: int = 1) -> None:
        with self._stats_lock:
            self.stats[key] += n

    def start(self) -> "FrameReceiver":
        self._listener.listen()
        self._listener.settimeout(_POLL_S)
        accept_thread = threading.Thread(target=self._accept_loop,
                                         name="frame-receiver-accept", daemon=True)
        accept_thread.start()
        self._threads.append(accept_thread)
        return self

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, addr = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                break
            self._count("sessions")
            self._conns.append(conn)
            thread = threading.Thread(target=self._serve_session, args=(conn, addr),
                                      name=f"frame-session-{addr[1]}", daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve_session(self, conn: socket.socket, addr) -> None:
        conn.settimeout(_POLL_S)

        def recv(n: int) -> bytes:
            while True:
                if self._stop.is_set():
                    return b""
                try:
                    return conn.recv(n)
                except TimeoutError:
                    continue
                except OSError:
                    return b""

        last_seq: dict[str, int] = {}
        try:
            while not self._stop.is_set():
                try:
                    message = read_frame(recv)
                except FrameError as exc:
                    if exc.recoverable:
                        self._count("malformed")
                        log.warning("malformed frame from %s: %s", addr, exc)
                        self._ack(conn)
                        continue
                    if self._stop.is_set():
                        break  # shutdown cut the stream mid-frame; not a fault
                    self._count("desync")
                    log.warning("closing session %s: %s", addr, exc)
                    break
                if message is None:
                    break
                cam = message.header.camera_id
                if cam in last_seq and message.header.seq <= last_seq[cam]:
                    self._count("stale_seq")
                    self._ack(conn)
                    continue
                last_seq[cam] = message.header.seq
                try:
                    self._handler(message)
                except Exception:
                    self._count("handler_errors")
                    log.exception("frame handler failed for %s seq %s",
                                  cam, message.header.seq)
                self._count("delivered")
                self._ack(conn)
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def _ack(self, conn: socket.socket) -> None:
        if not self._send_rep:
            return
        try:
            conn.sendall(REP_BYTE)
        except OSError:
            pass

    def stop(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        for conn in self._conns:
            try:
                conn.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=2.0)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
