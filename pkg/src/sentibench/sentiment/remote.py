from __future__ import annotations
import json
import logging
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Tuple
from urllib.parse import urlsplit

from ..errors import ProviderUnavailable
from ..model import NewsRecord, ProviderKind
from .scores import PromptResponseParser, SentimentScore

log = logging.getLogger(__name__)


class LineTransport(Protocol):
    def connect(self, timeout: float = 5.0) -> None: ...
    def disconnect(self) -> None: ...
    def send_line(self, line: str) -> None: ...
    def read_lines(self) -> List[str]: ...


@dataclass
class SocketTransport:
    """Newline-framed TCP transport."""

    host: str
    port: int
    _sock: Optional[socket.socket] = None
    _rxbuf: str = ""

    @classmethod
    def from_endpoint(cls, endpoint: str) -> "SocketTransport":
        parts = urlsplit(endpoint if "://" in endpoint else f"tcp://{endpoint}")
        if not parts.hostname or not parts.port:
            raise ValueError(f"endpoint must look like tcp://host:port, got {endpoint!r}")
        return cls(parts.hostname, parts.port)

    def connect(self, timeout: float = 5.0) -> None:
        self._sock = socket.create_connection((self.host, self.port), timeout=timeout)
        self._sock.settimeout(0.1)
        self._rxbuf = ""

    def disconnect(self) -> None:
        if self._sock:
            try:
                self._sock.close()
            finally:
                self._sock = None
        self._rxbuf = ""

    def send_line(self, line: str) -> None:
        if not self._sock:
            raise ConnectionError("remote provider is not connected")
        self._sock.sendall((line + "\n").encode("utf-8"))

    def read_lines(self) -> List[str]:
        if not self._sock:
            return []
        try:
            chunk = self._sock.recv(4096)
            if not chunk:
                raise ConnectionError("remote provider closed the connection")
            self._rxbuf += chunk.decode("utf-8", errors="ignore")
        except socket.timeout:
            pass
        lines: List[str] = []
        while "\n" in self._rxbuf:
            line, self._rxbuf = self._rxbuf.split("\n", 1)
            lines.append(line.strip())
        return lines


@dataclass
class CannedTransport:
    """In-memory stand-in for a remote model: answers from a table or a callable.

    ``fail_first`` makes the first N sends raise, to exercise retries.
    """

    replies: Dict[str, str] | Callable[[dict], str] = field(default_factory=dict)
    fail_first: int = 0
    sent: List[str] = field(default_factory=list)
    _pending: List[str] = field(default_factory=list)
    connected: bool = False

    def connect(self, timeout: float = 5.0) -> None:
        self.connected = True

    def disconnect(self) -> None:
        self.connected = False
        self._pending.clear()

    def send_line(self, line: str) -> None:
        self.sent.append(line)
        if self.fail_first > 0:
            self.fail_first -= 1
            raise ConnectionResetError("canned transport failure")
        head, body = line.split("|", 1)
        request = json.loads(body.split(" ", 1)[1])
        answer = self.replies(request) if callable(self.replies) else self.replies.get(request["id"])
        if answer is None:
            self._pending.append(f"R{head[1:]}|404|")
        else:
            self._pending.append(f"R{head[1:]}|0|{answer}")

    def read_lines(self) -> List[str]:
        out, self._pending[:] = list(self._pending), []
        return out


class _ReplyError(RuntimeError):
    pass


class RemoteSentimentClient:
    """Sentiment provider behind a counted request/response line protocol.

    TX: ``C<n>|score {json}``; RX: ``R<n>|<status>|<payload>``. Calls are serialized,
    so one client may be shared between scoring threads.
    """

    thread_safe = True

    def __init__(self, transport: LineTransport, kind: ProviderKind, parser: Optional[PromptResponseParser] = None,
                 timeout_s: float = 5.0, max_retries: int = 2, prompt_template: str = "{text}"):
        self.transport = transport
        self.kind = kind
        self.parser = parser or PromptResponseParser()
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.prompt_template = prompt_template
        self._seq = 0
        self._connected = False
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, remote_cfg, kind: ProviderKind, parser: PromptResponseParser,
                    transport: Optional[LineTransport] = None) -> "RemoteSentimentClient":
        if not remote_cfg.enabled:
            raise ValueError("remote provider is disabled (sentiment.remote.enabled: false)")
        transport = transport or SocketTransport.from_endpoint(remote_cfg.endpoint)
        return cls(transport, kind, parser, remote_cfg.timeout_s, remote_cfg.max_retries, remote_cfg.prompt_template)

    # ---------- low-level counted I/O ----------
    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _send_counted(self, body: str) -> str:
        if not self._connected:
            self.transport.connect(timeout=self.timeout_s)
            self._connected = True
        seq = self._next_seq()
        self.transport.send_line(f"C{seq}|{body}")
        wanted = f"R{seq}|"
        deadline = time.monotonic() + self.timeout_s
        while True:
            for line in self.transport.read_lines():
                if line.startswith(wanted):
                    return line
            if time.monotonic() >= deadline:
                raise TimeoutError(f"no response for sequence {seq}")
            time.sleep(0.01)

    @staticmethod
    def _parse_reply(reply: str) -> Tuple[str, str]:
        # R<n>|<status>|<payload>
        parts = reply.split("|", 2)
        if len(parts) < 3:
            raise _ReplyError(f"unexpected response format: {reply!r}")
        return parts[1], parts[2].strip()

    def _request(self, record: NewsRecord) -> str:
        req = {"id": record.news_id, "stock": str(record.stock), "kind": self.kind.value}
        if self.kind is ProviderKind.DISCRETE_THREE_CLASS:
            req["prompt"] = self.prompt_template.format(stock=record.stock, text=record.text or "")
        else:
            req["text"] = record.text or ""
        return "score " + json.dumps(req, ensure_ascii=False, sort_keys=True)

    # ---------- provider contract ----------
    def score(self, record: NewsRecord) -> SentimentScore:
        from .providers import score_from_raw

        body = self._request(record)
        attempts = 0
        last: Optional[BaseException] = None
        while attempts <= self.max_retries:
            attempts += 1
            try:
                with self._lock:
                    status, payload = self._parse_reply(self._send_counted(body))
                if status != "0":
                    raise _ReplyError(f"status {status}")
                return score_from_raw(payload, self.kind, self.parser)
            except (OSError, TimeoutError, _ReplyError) as e:
                last = e
                log.warning("remote scoring of %s failed (attempt %d/%d): %s",
                            record.news_id, attempts, self.max_retries + 1, e)
                self.close()
        raise ProviderUnavailable(record.news_id, attempts, last)

    def close(self) -> None:
        with self._lock:
            if self._connected:
                self.transport.disconnect()
            self._connected = False
