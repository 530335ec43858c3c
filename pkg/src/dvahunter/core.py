"""
Shared domain types for the scanner: domain names, DNS observations,
HTTP probes and response summaries, and the verdict vocabulary.

Everything here is immutable after construction and safe to share
between worker threads.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional

from .psl import PublicSuffixList

MAX_NAME_LENGTH = 253
BODY_EXCERPT_CAP = 4096

_LABEL_RE = re.compile(r"^[a-z0-9]([a-z0-9-]{0,61}[a-z0-9])?$")


class DomainSyntaxError(ValueError):
    """Raised for names that do not follow DNS hostname syntax."""


class DomainTooLongError(DomainSyntaxError):
    """Raised for names longer than 253 characters."""


class Rcode(Enum):
    NOERROR = "noerror"
    NXDOMAIN = "nxdomain"
    SERVFAIL = "servfail"
    TIMEOUT = "timeout"


class Scheme(Enum):
    HTTP = "http"
    HTTPS = "https"


class TransportFailure(Enum):
    CONNECT_REFUSED = "connect_refused"
    TLS_ERROR = "tls_error"
    TIMEOUT = "timeout"


class VerdictKind(Enum):
    VULNERABLE = "vulnerable"
    NOT_VULNERABLE = "not_vulnerable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True, order=True)
class Fqdn:
    """A normalized, lowercase fully qualified domain name.

    ``sld`` is the registrable domain computed against the bundled
    public-suffix snapshot at parse time (None when the name itself is a
    public suffix).
    """

    labels: tuple[str, ...]
    sld: Optional[str] = field(compare=False, default=None)

    def __str__(self) -> str:
        return ".".join(self.labels)

    def __repr__(self) -> str:
        return f"Fqdn({str(self)!r})"

    @property
    def name(self) -> str:
        return str(self)

    def endswith(self, suffix: str) -> bool:
        return str(self).endswith(suffix)


def parse_fqdn(text: str, psl: Optional[PublicSuffixList] = None) -> Fqdn:
    """Parse and normalize a domain name.

    Raises DomainSyntaxError on empty/illegal labels and
    DomainTooLongError past 253 characters. Comparison of the result is
    case-insensitive because normalization happens here.
    """
    if not text:
        raise DomainSyntaxError("empty domain name")
    name = text.strip().rstrip(".").lower()
    if not name:
        raise DomainSyntaxError(f"no labels in {text!r}")
    if len(name) > MAX_NAME_LENGTH:
        raise DomainTooLongError(f"{len(name)} chars exceeds {MAX_NAME_LENGTH}: {text[:60]!r}...")
    labels = tuple(name.split("."))
    for label in labels:
        if not label:
            raise DomainSyntaxError(f"empty label in {text!r}")
        if len(label) > 63:
            raise DomainSyntaxError(f"label over 63 chars in {text!r}")
        if not _LABEL_RE.match(label):
            raise DomainSyntaxError(f"illegal label {label!r} in {text!r}")
    sld = psl.registrable_domain(name) if psl is not None else None
    return Fqdn(labels=labels, sld=sld)


@dataclass(frozen=True)
class DnsObservation:
    """Resolved record set for one FQDN.

    ``rcode`` describes the queried name itself: NOERROR whenever the name
    holds any record, NXDOMAIN only when the name has nothing at all.
    ``cname_chain`` is the chain followed from the name; ``a_records`` are
    the terminal addresses (empty when the chain dead-ends). A dangling
    name therefore shows up as NOERROR + chain + no addresses, and its
    chain target can be resolved separately to observe the terminal rcode.
    """

    fqdn: Fqdn
    cname_chain: tuple[Fqdn, ...] = ()
    ns: tuple[Fqdn, ...] = ()
    a_records: tuple[str, ...] = ()
    rcode: Rcode = Rcode.NOERROR
    cname_loop: bool = False

    def __post_init__(self) -> None:
        if self.rcode is not Rcode.NOERROR and (self.cname_chain or self.ns or self.a_records):
            raise ValueError(f"rcode {self.rcode.value} observation must carry no records")

    @property
    def has_records(self) -> bool:
        return bool(self.cname_chain or self.ns or self.a_records)

    def to_json(self) -> dict[str, Any]:
        return {
            "fqdn": str(self.fqdn),
            "cname_chain": [str(c) for c in self.cname_chain],
            "ns": [str(n) for n in self.ns],
            "a_records": list(self.a_records),
            "rcode": self.rcode.value,
            "cname_loop": self.cname_loop,
        }


@dataclass(frozen=True)
class HttpProbe:
    """One HTTP(S) request with independently controlled SNI and Host."""

    target_ip: str
    scheme: Scheme
    host_header: Fqdn
    path: str = "/"
    sni: Optional[Fqdn] = None

    def __post_init__(self) -> None:
        if self.scheme is Scheme.HTTP and self.sni is not None:
            raise ValueError("plain-http probe cannot carry an SNI")
        if not self.path.startswith("/"):
            raise ValueError(f"path must begin with '/': {self.path!r}")

    def to_json(self) -> dict[str, Any]:
        return {
            "target_ip": self.target_ip,
            "scheme": self.scheme.value,
            "sni": str(self.sni) if self.sni else None,
            "host": str(self.host_header),
            "path": self.path,
        }


def sha1_body(data: bytes) -> bytes:
    """SHA1 digest of exactly the given bytes (20 bytes)."""
    return hashlib.sha1(data).digest()


EMPTY_BODY_SHA1 = sha1_body(b"")


@dataclass(frozen=True)
class HttpResponseSummary:
    """Summary of one HTTP exchange: either a status or a transport failure.

    The full body is kept only as its SHA1 and a capped excerpt; the hash
    decides content equality, the excerpt serves substring fingerprints.
    """

    status: Optional[int] = None
    headers: tuple[tuple[str, str], ...] = ()
    body_hash: bytes = EMPTY_BODY_SHA1
    body_excerpt: bytes = b""
    failure: Optional[TransportFailure] = None
    tls_cert_name: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.status is None) == (self.failure is None):
            raise ValueError("exactly one of status/failure must be set")
        if self.status is not None and not (100 <= self.status <= 599):
            raise ValueError(f"status out of range: {self.status}")

    @classmethod
    def from_body(
        cls,
        status: int,
        body: bytes,
        headers: Iterable[tuple[str, str]] = (),
        tls_cert_name: Optional[str] = None,
    ) -> "HttpResponseSummary":
        return cls(
            status=status,
            headers=tuple(headers),
            body_hash=sha1_body(body),
            body_excerpt=body[:BODY_EXCERPT_CAP],
            tls_cert_name=tls_cert_name,
        )

    @classmethod
    def failed(cls, failure: TransportFailure) -> "HttpResponseSummary":
        return cls(failure=failure)

    @property
    def ok(self) -> bool:
        return self.status is not None and 200 <= self.status <= 299

    def header(self, name: str) -> Optional[str]:
        lowered = name.lower()
        for key, value in self.headers:
            if key.lower() == lowered:
                return value
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "failure": self.failure.value if self.failure else None,
            "headers": [[k, v] for k, v in self.headers],
            "body_sha1": self.body_hash.hex(),
            "body_excerpt": self.body_excerpt.decode("utf-8", "replace"),
            "tls_cert_name": self.tls_cert_name,
        }


@dataclass(frozen=True)
class Evidence:
    """One step of a verdict's paper trail."""

    kind: str
    detail: str
    probe: Optional[HttpProbe] = None
    response: Optional[HttpResponseSummary] = None
    observation: Optional[DnsObservation] = None
    fingerprint_id: Optional[str] = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "detail": self.detail}
        if self.probe is not None:
            out["probe"] = self.probe.to_json()
        if self.response is not None:
            out["response"] = self.response.to_json()
        if self.observation is not None:
            out["observation"] = self.observation.to_json()
        if self.fingerprint_id is not None:
            out["fingerprint_id"] = self.fingerprint_id
        return out


@dataclass(frozen=True)
class Verdict:
    """Outcome plus evidence. A Vulnerable verdict cannot be built from
    failed probes: transport failures force Inconclusive upstream."""

    kind: VerdictKind
    evidence: tuple[Evidence, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is VerdictKind.VULNERABLE:
            if not self.evidence:
                raise ValueError("Vulnerable verdict requires evidence")
            for item in self.evidence:
                if item.response is not None and item.response.failure is not None:
                    raise ValueError("Vulnerable verdict cannot rest on a failed probe")

    @classmethod
    def vulnerable(cls, evidence: Iterable[Evidence]) -> "Verdict":
        return cls(VerdictKind.VULNERABLE, tuple(evidence))

    @classmethod
    def not_vulnerable(cls, evidence: Iterable[Evidence] = ()) -> "Verdict":
        return cls(VerdictKind.NOT_VULNERABLE, tuple(evidence))

    @classmethod
    def inconclusive(cls, evidence: Iterable[Evidence] = ()) -> "Verdict":
        return cls(VerdictKind.INCONCLUSIVE, tuple(evidence))

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "evidence": [e.to_json() for e in self.evidence]}


def derive_rng(seed: int, *scope: object) -> random.Random:
    """Independent RNG for one (seed, scope...) slot.

    Scoped derivation keeps every random choice reproducible regardless of
    worker scheduling: two runs with the same seed make identical picks.
    """
    material = "|".join([str(seed)] + [str(part) for part in scope])
    digest = hashlib.sha1(material.encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))
