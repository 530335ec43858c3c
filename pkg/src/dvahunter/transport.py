"""
The single gateway for all network effects: DNS resolution and HTTP(S)
probes with independently controllable SNI and Host header.

Two interchangeable backends exist. MockTransport answers from an
in-process simulated internet and is fully deterministic: identical
scenario plus identical probe sequence yields bit-identical responses.
LiveTransport speaks real DNS (UDP/53 with TCP fallback, stdlib sockets)
and HTTP/1.1 over TCP/TLS; certificate validation is off by default
because borrowing detection must accept shared and default certificates.

Both backends funnel through a sliding-window rate limiter. The mock
backend never sleeps (determinism) but still counts against the window.
"""

from __future__ import annotations

import logging
import socket
import ssl
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .core import (
    DnsObservation,
    Fqdn,
    HttpProbe,
    HttpResponseSummary,
    Rcode,
    Scheme,
    TransportFailure,
    parse_fqdn,
)

logger = logging.getLogger(__name__)

MAX_CNAME_CHAIN = 16


class Backend(Enum):
    LIVE = "live"
    MOCK = "mock"


class RRType(Enum):
    A = "a"
    CNAME = "cname"
    NS = "ns"
    ALL = "all"


@dataclass
class TransportConfig:
    backend: Backend = Backend.MOCK
    timeout: float = 5.0
    qps_limit: float = 20.0
    retries: int = 2
    verify_tls: bool = False
    resolver: Optional[str] = None

    def __post_init__(self) -> None:
        if self.qps_limit <= 0:
            raise ValueError("qps_limit must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class VirtualClock:
    """Deterministic clock for the mock backend and rate-limiter tests."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        self._now += max(0.0, seconds)


class RateLimiter:
    """Sliding one-second window: at most qps_limit sends per window."""

    def __init__(
        self,
        qps_limit: float,
        now: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        enforce: bool = True,
    ):
        self.qps_limit = qps_limit
        self._now = now
        self._sleep = sleep
        self._enforce = enforce
        self._window: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._now()
                while self._window and now - self._window[0] >= 1.0:
                    self._window.popleft()
                if not self._enforce or len(self._window) < self.qps_limit:
                    self._window.append(now)
                    return
                wait = 1.0 - (now - self._window[0])
                self._sleep(max(wait, 0.0))

    def sent_in_window(self) -> int:
        with self._lock:
            now = self._now()
            return sum(1 for t in self._window if now - t < 1.0)


@dataclass
class ProbeLogEntry:
    probe: HttpProbe
    response: HttpResponseSummary


@dataclass
class TransportStats:
    dns_queries: int = 0
    http_probes: int = 0


class MockTransport:
    """Transport over a SimulatedInternet session.

    ``record=True`` keeps a full probe log for call audits (budget and
    mode-isolation tests read it).
    """

    def __init__(
        self,
        simnet,
        config: Optional[TransportConfig] = None,
        clock: Optional[VirtualClock] = None,
        record: bool = False,
    ):
        self.simnet = simnet
        self.config = config or TransportConfig(backend=Backend.MOCK)
        self.clock = clock or VirtualClock()
        # accounting only: the mock never sleeps, so replay stays deterministic
        self.limiter = RateLimiter(self.config.qps_limit, now=self.clock.now, sleep=lambda _s: None, enforce=False)
        self.stats = TransportStats()
        self.record = record
        self.probe_log: list[ProbeLogEntry] = []
        self.query_log: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    def now(self) -> float:
        return self.clock.now()

    def resolve(self, name: Fqdn, rrtype: RRType = RRType.ALL) -> DnsObservation:
        self.limiter.acquire()
        with self._lock:
            self.stats.dns_queries += 1
            if self.record:
                self.query_log.append((str(name), rrtype.value))
        obs = self.simnet.serve_dns(name)
        if rrtype is RRType.CNAME:
            return DnsObservation(fqdn=obs.fqdn, cname_chain=obs.cname_chain, rcode=obs.rcode, cname_loop=obs.cname_loop)
        if rrtype is RRType.NS:
            return DnsObservation(fqdn=obs.fqdn, ns=obs.ns, rcode=obs.rcode)
        if rrtype is RRType.A:
            return DnsObservation(
                fqdn=obs.fqdn,
                cname_chain=obs.cname_chain,
                a_records=obs.a_records,
                rcode=obs.rcode,
                cname_loop=obs.cname_loop,
            )
        return obs

    def probe(self, probe: HttpProbe) -> HttpResponseSummary:
        if probe.scheme is Scheme.HTTPS and probe.sni is None:
            raise ValueError("https probe requires an SNI")
        self.limiter.acquire()
        with self._lock:
            self.stats.http_probes += 1
        response = self.simnet.serve_http(probe)
        if self.record:
            with self._lock:
                self.probe_log.append(ProbeLogEntry(probe, response))
        return response


# ---------------------------------------------------------------------------
# Live backend: minimal DNS wire client plus raw HTTP/1.1 over TCP/TLS
# ---------------------------------------------------------------------------

_DNS_TYPE = {"a": 1, "ns": 2, "cname": 5}


def build_dns_query(name: str, qtype: int, qid: int) -> bytes:
    header = struct.pack(">HHHHHH", qid, 0x0100, 1, 0, 0, 0)  # RD=1
    body = b""
    for label in name.rstrip(".").split("."):
        raw = label.encode("ascii")
        body += bytes([len(raw)]) + raw
    body += b"\x00" + struct.pack(">HH", qtype, 1)
    return header + body


def _read_name(data: bytes, offset: int) -> tuple[str, int]:
    labels = []
    jumps = 0
    pos = offset
    end = offset
    jumped = False
    while True:
        if pos >= len(data):
            raise ValueError("truncated name")
        length = data[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                raise ValueError("truncated pointer")
            pointer = struct.unpack(">H", data[pos:pos + 2])[0] & 0x3FFF
            if not jumped:
                end = pos + 2
                jumped = True
            pos = pointer
            jumps += 1
            if jumps > 32:
                raise ValueError("compression loop")
            continue
        if length == 0:
            if not jumped:
                end = pos + 1
            return ".".join(labels), end
        pos += 1
        labels.append(data[pos:pos + length].decode("ascii", "replace"))
        pos += length


def parse_dns_response(data: bytes) -> tuple[int, list[tuple[str, int, str]]]:
    """Return (rcode, [(owner, type, rdata-as-text)]) from the answer section."""
    if len(data) < 12:
        raise ValueError("short DNS response")
    _qid, flags, qd, an, _ns, _ar = struct.unpack(">HHHHHH", data[:12])
    rcode = flags & 0x000F
    pos = 12
    for _ in range(qd):
        _, pos = _read_name(data, pos)
        pos += 4
    answers = []
    for _ in range(an):
        owner, pos = _read_name(data, pos)
        rtype, _rclass, _ttl, rdlength = struct.unpack(">HHIH", data[pos:pos + 10])
        pos += 10
        rdata = data[pos:pos + rdlength]
        if rtype == 1 and rdlength == 4:
            text = ".".join(str(b) for b in rdata)
        elif rtype in (2, 5):
            text, _ = _read_name(data, pos)
        else:
            text = rdata.hex()
        pos += rdlength
        answers.append((owner.lower(), rtype, text.lower()))
    return rcode, answers


class LiveTransport:
    """Real-socket backend. Requires a resolver address in the config."""

    def __init__(self, config: TransportConfig):
        if config.resolver is None:
            raise ValueError("live backend needs --resolver")
        self.config = config
        self.limiter = RateLimiter(config.qps_limit)
        self.stats = TransportStats()
        self._qid = 0
        self._lock = threading.Lock()

    def now(self) -> float:
        return time.time()

    # -- DNS ---------------------------------------------------------------

    def _exchange(self, query: bytes) -> Optional[bytes]:
        resolver = (self.config.resolver, 53)
        for _ in range(self.config.retries + 1):
            self.limiter.acquire()
            try:
                with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
                    sock.settimeout(self.config.timeout)
                    sock.sendto(query, resolver)
                    data, _ = sock.recvfrom(4096)
                if len(data) >= 4 and data[2] & 0x02:  # TC bit: retry over TCP
                    with socket.create_connection(resolver, timeout=self.config.timeout) as tcp:
                        tcp.sendall(struct.pack(">H", len(query)) + query)
                        size = struct.unpack(">H", self._recv_exact(tcp, 2))[0]
                        data = self._recv_exact(tcp, size)
                return data
            except (socket.timeout, OSError):
                continue
        return None

    @staticmethod
    def _recv_exact(sock: socket.socket, count: int) -> bytes:
        buf = b""
        while len(buf) < count:
            chunk = sock.recv(count - len(buf))
            if not chunk:
                raise OSError("connection closed")
            buf += chunk
        return buf

    def _query(self, name: str, rrtype: str) -> Optional[tuple[int, list[tuple[str, int, str]]]]:
        with self._lock:
            self._qid = (self._qid + 1) & 0xFFFF
            qid = self._qid
            self.stats.dns_queries += 1
        data = self._exchange(build_dns_query(name, _DNS_TYPE[rrtype], qid))
        if data is None:
            return None
        try:
            return parse_dns_response(data)
        except ValueError:
            return None

    def resolve(self, name: Fqdn, rrtype: RRType = RRType.ALL) -> DnsObservation:
        wanted = ["a"] if rrtype is RRType.A else [rrtype.value] if rrtype is not RRType.ALL else ["a", "cname", "ns"]
        chain: list[str] = []
        a_records: list[str] = []
        ns: list[str] = []
        saw_records = False
        rcode = Rcode.NXDOMAIN
        timed_out = True
        for kind in wanted:
            reply = self._query(str(name), kind)
            if reply is None:
                continue
            timed_out = False
            wire_rcode, answers = reply
            if wire_rcode == 2 and not answers:
                rcode = Rcode.SERVFAIL
                continue
            # follow the CNAME path the resolver included in the answer
            cursor = str(name)
            remaining = {owner: (rtype, rdata) for owner, rtype, rdata in answers if rtype == 5}
            while cursor in remaining and len(chain) < MAX_CNAME_CHAIN:
                cursor = remaining.pop(cursor)[1]
                if cursor not in chain:
                    chain.append(cursor)
            for owner, rtype, rdata in answers:
                saw_records = True
                if rtype == 1 and rdata not in a_records:
                    a_records.append(rdata)
                elif rtype == 2 and rdata not in ns:
                    ns.append(rdata)
        if timed_out:
            return DnsObservation(fqdn=name, rcode=Rcode.TIMEOUT)
        if saw_records or chain:
            rcode = Rcode.NOERROR
        if rcode is not Rcode.NOERROR:
            return DnsObservation(fqdn=name, rcode=rcode)
        return DnsObservation(
            fqdn=name,
            cname_chain=tuple(parse_fqdn(c) for c in chain),
            ns=tuple(parse_fqdn(n) for n in ns),
            a_records=tuple(a_records),
            rcode=Rcode.NOERROR,
        )

    # -- HTTP --------------------------------------------------------------

    def probe(self, probe: HttpProbe) -> HttpResponseSummary:
        if probe.scheme is Scheme.HTTPS and probe.sni is None:
            raise ValueError("https probe requires an SNI")
        self.limiter.acquire()
        with self._lock:
            self.stats.http_probes += 1
        port = 443 if probe.scheme is Scheme.HTTPS else 80
        cert_name: Optional[str] = None
        try:
            sock = socket.create_connection((probe.target_ip, port), timeout=self.config.timeout)
        except socket.timeout:
            return HttpResponseSummary.failed(TransportFailure.TIMEOUT)
        except OSError:
            return HttpResponseSummary.failed(TransportFailure.CONNECT_REFUSED)
        try:
            if probe.scheme is Scheme.HTTPS:
                context = ssl.create_default_context()
                if not self.config.verify_tls:
                    context.check_hostname = False
                    context.verify_mode = ssl.CERT_NONE
                try:
                    sock = context.wrap_socket(sock, server_hostname=str(probe.sni))
                    cert_name = _peer_cert_name(sock)
                except ssl.SSLError:
                    return HttpResponseSummary.failed(TransportFailure.TLS_ERROR)
            request = (
                f"GET {probe.path} HTTP/1.1\r\n"
                f"Host: {probe.host_header}\r\n"
                "User-Agent: dvahunter/0.1\r\n"
                "Accept: */*\r\n"
                "Connection: close\r\n\r\n"
            )
            sock.sendall(request.encode("ascii"))
            status, headers, body = _read_http_response(sock, self.config.timeout)
        except socket.timeout:
            return HttpResponseSummary.failed(TransportFailure.TIMEOUT)
        except (OSError, ValueError):
            return HttpResponseSummary.failed(TransportFailure.CONNECT_REFUSED)
        finally:
            try:
                sock.close()
            except OSError:
                pass
        return HttpResponseSummary.from_body(status, body, headers, tls_cert_name=cert_name)


def _peer_cert_name(sock: ssl.SSLSocket) -> Optional[str]:
    """Best-effort leaf certificate name. With verification disabled the
    parsed dict is empty, so fall back to a scan of the DER bytes for a
    printable CN / dNSName."""
    try:
        parsed = sock.getpeercert()
        if parsed:
            for field in parsed.get("subjectAltName", ()):  # type: ignore[union-attr]
                if field[0] == "DNS":
                    return field[1]
            for rdn in parsed.get("subject", ()):  # type: ignore[union-attr]
                for key, value in rdn:
                    if key == "commonName":
                        return value
        der = sock.getpeercert(binary_form=True)
        if der:
            return _scan_der_for_name(der)
    except (ssl.SSLError, ValueError):
        pass
    return None


def _scan_der_for_name(der: bytes) -> Optional[str]:
    # CN attribute OID 2.5.4.3 is 55 04 03; the value follows as a short
    # string type. Crude, but only used when validation is disabled.
    marker = der.find(b"\x55\x04\x03")
    if marker == -1 or marker + 5 > len(der):
        return None
    length = der[marker + 4]
    value = der[marker + 5: marker + 5 + length]
    try:
        return value.decode("ascii")
    except UnicodeDecodeError:
        return None


def _read_http_response(sock: socket.socket, timeout: float) -> tuple[int, list[tuple[str, str]], bytes]:
    sock.settimeout(timeout)
    raw = b""
    while b"\r\n\r\n" not in raw:
        chunk = sock.recv(4096)
        if not chunk:
            break
        raw += chunk
        if len(raw) > 1 << 20:
            break
    head, _, rest = raw.partition(b"\r\n\r\n")
    lines = head.split(b"\r\n")
    if not lines or not lines[0].startswith(b"HTTP/"):
        raise ValueError("not an HTTP response")
    status = int(lines[0].split()[1])
    headers: list[tuple[str, str]] = []
    for line in lines[1:]:
        name, _, value = line.partition(b":")
        headers.append((name.decode("latin-1").strip(), value.decode("latin-1").strip()))
    body = rest
    chunked = any(k.lower() == "transfer-encoding" and "chunked" in v.lower() for k, v in headers)
    while len(body) < 1 << 22:
        try:
            chunk = sock.recv(8192)
        except socket.timeout:
            break
        if not chunk:
            break
        body += chunk
    if chunked:
        body = _dechunk(body)
    return status, headers, body


def _dechunk(body: bytes) -> bytes:
    out = b""
    pos = 0
    while pos < len(body):
        line_end = body.find(b"\r\n", pos)
        if line_end == -1:
            break
        try:
            size = int(body[pos:line_end].split(b";")[0], 16)
        except ValueError:
            break
        if size == 0:
            break
        out += body[line_end + 2: line_end + 2 + size]
        pos = line_end + 2 + size + 2
    return out


def make_transport(config: TransportConfig, simnet=None, record: bool = False):
    if config.backend is Backend.MOCK:
        if simnet is None:
            raise ValueError("mock backend needs a scenario")
        return MockTransport(simnet, config, record=record)
    return LiveTransport(config)
