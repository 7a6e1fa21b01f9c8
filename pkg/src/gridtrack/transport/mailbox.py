"""Single-slot overwrite mailbox between frame capture and send.

Capture keeps overwriting the slot; the sender takes whatever is newest when
it becomes free. Frames overwritten before being taken are simply lost, which
is the point: nothing stale is ever queued.
"""

from __future__ import annotations

import threading
from typing import Generic, Optional, TypeVar

T = TypeVar("T")


class LatestFrameMailbox(Generic[T]):
    def __init__(self):
        self._cond = threading.Condition()
        self._item: Optional[T] = None
        self._closed = False
        self._overwritten = 0

    def put(self, item: T) -> None:
        """Store item, replacing any undelivered one."""
        with self._cond:
            if self._closed:
                return
            if self._item is not None:
                self._overwritten += 1
            self._item = item
            self._cond.notify()

    def take(self, timeout: Optional[float] = None) -> Optional[T]:
        """Remove and return the newest item, blocking until one arrives.

        Returns None on timeout or once the mailbox is closed and drained.
        """
        with self._cond:
            if self._item is None and not self._closed:
                self._cond.wait_for(lambda: self._item is not None or self._closed,
                                    timeout=timeout)
            item, self._item = self._item, None
            return item

    def close(self) -> None:
        """Wake blocked takers; subsequent puts are ignored."""
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        with self._cond:
            return self._closed

    @property
    def overwritten(self) -> int:
        """Number of frames dropped at source because a newer one arrived."""
        with self._cond:
            return self._overwritten
