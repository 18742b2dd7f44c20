import threading
from contextlib import contextmanager


class ReadWriteLock:
    """
    Structure-wide reader-writer lock. Readers share, writers are exclusive.
    Reader-preferring by default, like the POSIX rwlock default; pass
    ``prefer_writers=True`` to make new readers wait behind queued writers.
    """

    def __init__(self, prefer_writers: bool = False):
        self._cond = threading.Condition(threading.Lock())
        self._readers = 0
        self._writer = False
        self._waiting_writers = 0
        self.prefer_writers = prefer_writers

    def acquire_read(self) -> None:
        with self._cond:
            while self._writer or (self.prefer_writers and self._waiting_writers):
                self._cond.wait()
            self._readers += 1

    def release_read(self) -> None:
        with self._cond:
            self._readers -= 1
            if not self._readers:
                self._cond.notify_all()

    def acquire_write(self) -> None:
        with self._cond:
            self._waiting_writers += 1
            try:
                while self._writer or self._readers:
                    self._cond.wait()
            finally:
                self._waiting_writers -= 1
            self._writer = True

    def release_write(self) -> None:
        with self._cond:
            self._writer = False
            self._cond.notify_all()

    @property
    def readers(self) -> int:
        return self._readers

    @property
    def waiting_writers(self) -> int:
        return self._waiting_writers

    @contextmanager
    def read_locked(self):
        self.acquire_read()
        try:
            yield
        finally:
            self.release_read()

    @contextmanager
    def write_locked(self):
        self.acquire_write()
        try:
            yield
        finally:
            self.release_write()
