"""Length-prefixed JSON transport between tuning client and server.

Frames are a 4-byte big-endian byte count followed by that many bytes of
UTF-8 JSON.  A connection carries one request at a time; concurrency
comes from opening more connections.  Payloads are the dataset documents
defined by the protocol module, kept as JSON on purpose: traffic stays
human-inspectable, which is the point of the confidentiality claim.
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading
import time
import uuid

from .confidential import (
    EncryptedDatasetD,
    EncryptedDatasetF,
    server_tune_ckks,
    server_tune_elgamal,
)
from .errors import FrameError, ProtocolError, TransportError

__all__ = [
    "DEFAULT_PORT",
    "MAX_FRAME_BYTES",
    "send_frame",
    "recv_frame",
    "serve",
    "request_tune",
    "TuningServer",
]

DEFAULT_PORT = 7461
MAX_FRAME_BYTES = 256 * 1024 * 1024  # encrypted datasets get large

DEFAULT_HANDLERS = {
    "elgamal": server_tune_elgamal,
    "ckks": server_tune_ckks,
}


def send_frame(sock: socket.socket, body: bytes,
               max_bytes: int = MAX_FRAME_BYTES) -> None:
    if len(body) > max_bytes:
        raise FrameError(f"frame of {len(body)} bytes exceeds cap {max_bytes}")
    sock.sendall(struct.pack(">I", len(body)) + body)


def _recv_exact(sock: socket.socket, count: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < count:
        chunk = sock.recv(count - len(buf))
        if not chunk:
            return None
        buf.extend(chunk)
    return bytes(buf)


def recv_frame(sock: socket.socket,
               max_bytes: int = MAX_FRAME_BYTES) -> bytes | None:
    """Next frame body, or None on a clean EOF before a header byte."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > max_bytes:
        raise FrameError(f"declared frame of {length} bytes exceeds cap {max_bytes}")
    body = _recv_exact(sock, length)
    if body is None:
        raise FrameError("connection closed mid-frame")
    return body


def _send_message(sock: socket.socket, message: dict) -> None:
    send_frame(sock, json.dumps(message).encode("utf-8"))


class _TuneHandler(socketserver.BaseRequestHandler):
    def handle(self):
        while True:
            try:
                body = recv_frame(self.request)
            except FrameError as exc:
                self._reply_error("", "bad_frame", str(exc))
                return
            if body is None:
                return
            try:
                message = json.loads(body.decode("utf-8"))
                if not isinstance(message, dict) or "type" not in message:
                    raise ValueError("message must be an object with a type")
            except (ValueError, UnicodeDecodeError) as exc:
                self._reply_error("", "bad_frame", f"unparseable message: {exc}")
                return
            if not self._dispatch(message):
                return

    def _dispatch(self, message: dict) -> bool:
        request_id = str(message.get("request_id", ""))
        mtype = message["type"]
        if mtype == "Ping":
            _send_message(self.request, {"type": "Pong", "request_id": request_id})
            return True
        if mtype != "TuneRequest":
            self._reply_error(request_id, "bad_message",
                              f"unsupported message type {mtype!r}")
            return False
        try:
            dataset = EncryptedDatasetD.from_json(json.dumps(message["payload"]))
        except (KeyError, ValueError, ProtocolError) as exc:
            self._reply_error(request_id, "bad_dataset", str(exc))
            return False
        handler = self.server.handlers.get(dataset.scheme)
        if handler is None:
            self._reply_error(request_id, "unsupported_scheme",
                              f"no handler for scheme {dataset.scheme!r}")
            return True
        try:
            started = time.perf_counter()
            result = handler(dataset)
            elapsed = time.perf_counter() - started
        except Exception as exc:  # surface the failure to the caller
            self._reply_error(request_id, "tune_failed", str(exc))
            return True
        _send_message(self.request, {
            "type": "TuneResponse",
            "request_id": request_id,
            "server_seconds": elapsed,
            "payload": json.loads(result.to_json()),
        })
        return True

    def _reply_error(self, request_id: str, code: str, detail: str) -> None:
        try:
            _send_message(self.request, {"type": "Error", "request_id": request_id,
                                         "code": code, "detail": detail})
        except OSError:
            pass


class TuningServer(socketserver.ThreadingTCPServer):
    """One thread per connection; requests within a connection run in order."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, handlers=None):
        self.handlers = dict(DEFAULT_HANDLERS if handlers is None else handlers)
        super().__init__(address, _TuneHandler)


class ServerHandle:
    def __init__(self, server: TuningServer, thread: threading.Thread):
        self._server = server
        self._thread = thread

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "ServerHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve(bind_address=("127.0.0.1", DEFAULT_PORT), handlers=None) -> ServerHandle:
    """Start a tuning server in a background thread and return its handle."""
    server = TuningServer(bind_address, handlers)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return ServerHandle(server, thread)


def request_tune(address, D: EncryptedDatasetD,
                 timeout: float = 600.0) -> tuple[EncryptedDatasetF, float]:
    """Round-trip one tuning request; returns (F, server-side seconds)."""
    request_id = str(uuid.uuid4())
    try:
        with socket.create_connection(address, timeout=timeout) as sock:
            _send_message(sock, {
                "type": "TuneRequest",
                "request_id": request_id,
                "payload": json.loads(D.to_json()),
            })
            body = recv_frame(sock)
    except socket.timeout as exc:
        raise TransportError(f"tuning request timed out after {timeout}s") from exc
    except OSError as exc:
        raise TransportError(f"cannot reach tuning server at {address}: {exc}") from exc
    if body is None:
        raise TransportError("server closed the connection without replying")
    reply = json.loads(body.decode("utf-8"))
    if reply.get("type") == "Error":
        raise ProtocolError(
            f"server error {reply.get('code', '?')}: {reply.get('detail', '')}")
    if reply.get("type") != "TuneResponse":
        raise ProtocolError(f"unexpected reply type {reply.get('type')!r}")
    if reply.get("request_id") != request_id:
        raise ProtocolError("reply request_id does not match the request")
    result = EncryptedDatasetF.from_json(json.dumps(reply["payload"]))
    if result.scheme != D.scheme:
        raise ProtocolError(
            f"reply scheme {result.scheme!r} does not match request {D.scheme!r}")
    return result, float(reply.get("server_seconds", 0.0))
