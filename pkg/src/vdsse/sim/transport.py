"""Message transports: an in-process queue and a localhost TCP variant.

Both count messages in flight per receiver so the session driver can pump
until the protocol is quiescent without guessing at timeouts.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from collections import Counter, deque

from .messages import ROLES, WireMessage


class InProcessTransport:
    def __init__(self) -> None:
        self._inbox: dict[str, deque[WireMessage]] = {r: deque() for r in ROLES}

    def send(self, msg: WireMessage) -> None:
        self._inbox[msg.receiver].append(msg)

    def pending(self, role: str) -> int:
        return len(self._inbox[role])

    def recv(self, role: str) -> WireMessage:
        return self._inbox[role].popleft()

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _read_exact(conn: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


class SocketTransport:
    """One loopback TCP connection per receiving role, length-prefixed frames.

    A reader thread per connection drains frames into a queue so a large
    upload never blocks the single-threaded driver on a full socket buffer.
    """

    RECV_TIMEOUT = 30.0

    def __init__(self, host: str = "127.0.0.1") -> None:
        self._send_socks: dict[str, socket.socket] = {}
        self._queues: dict[str, queue.Queue] = {}
        self._in_flight: Counter = Counter()
        self._threads: list[threading.Thread] = []
        self._closing = False
        for role in ROLES:
            server = socket.create_server((host, 0))
            client = socket.create_connection(server.getsockname())
            conn, _ = server.accept()
            server.close()
            self._send_socks[role] = client
            self._queues[role] = queue.Queue()
            t = threading.Thread(target=self._reader, args=(conn, role), daemon=True)
            t.start()
            self._threads.append(t)

    def _reader(self, conn: socket.socket, role: str) -> None:
        with conn:
            while True:
                header = _read_exact(conn, 4)
                if header is None:
                    return
                frame = _read_exact(conn, struct.unpack(">I", header)[0])
                if frame is None:
                    return
                self._queues[role].put(WireMessage.decode(frame))

    def send(self, msg: WireMessage) -> None:
        frame = msg.encode()
        self._in_flight[msg.receiver] += 1
        self._send_socks[msg.receiver].sendall(struct.pack(">I", len(frame)) + frame)

    def pending(self, role: str) -> int:
        return self._in_flight[role]

    def recv(self, role: str) -> WireMessage:
        msg = self._queues[role].get(timeout=self.RECV_TIMEOUT)
        self._in_flight[role] -= 1
        return msg

    def close(self) -> None:
        for s in self._send_socks.values():
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        for t in self._threads:
            t.join(timeout=1.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
