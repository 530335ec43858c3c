"""
Per-provider detection knowledge: assigned-subdomain suffixes,
non-hosted and service-discontinued fingerprints, Multi-CDN sharing
edges, and registration/verification metadata.

The knowledge base is data, not code: the repository ships a default
JSON file covering 45 providers, and researchers can extend coverage by
editing that file. See data/providers.json for the reference instance of
the schema documented in load_provider_db.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from .core import DnsObservation, HttpResponseSummary, Rcode


class ProviderDbError(ValueError):
    """Base class for provider-DB load failures."""


class SchemaError(ProviderDbError):
    pass


class DuplicateSuffixError(ProviderDbError):
    pass


class DanglingShareEdgeError(ProviderDbError):
    pass


class MissingEvidenceError(ValueError):
    """A fingerprint needs HTTP or DNS evidence that was not supplied."""


class DnsSignalKind(Enum):
    NXDOMAIN = "nxdomain"
    SERVFAIL = "servfail"
    RESOLVES_TO = "resolves_to"
    SINGLE_A_RECORD = "single_a_record"


@dataclass(frozen=True)
class DnsSignal:
    kind: DnsSignalKind
    ip: Optional[str] = None  # RESOLVES_TO only

    def to_json(self) -> Any:
        if self.kind is DnsSignalKind.RESOLVES_TO:
            return {"resolves_to": self.ip}
        return self.kind.value


@dataclass(frozen=True)
class Fingerprint:
    """A matchable signature over HTTP status/header/body and/or DNS
    response signals. All present fields must match (conjunction).

    ``no_response`` marks providers that answer unknown hosts with
    silence: the expected "response" is a transport failure. It cannot be
    combined with the other HTTP fields.
    """

    id: str
    status: Optional[int] = None
    header: Optional[tuple[str, str]] = None  # (name, contains)
    body_contains: Optional[bytes] = None
    dns_signal: Optional[DnsSignal] = None
    no_response: bool = False

    def __post_init__(self) -> None:
        fields = [self.status, self.header, self.body_contains, self.dns_signal]
        if not self.no_response and all(f is None for f in fields):
            raise SchemaError(f"fingerprint {self.id}: no matchable field")
        if self.no_response and any(f is not None for f in (self.status, self.header, self.body_contains)):
            raise SchemaError(f"fingerprint {self.id}: no_response excludes other HTTP fields")

    @property
    def needs_http(self) -> bool:
        return self.no_response or any(f is not None for f in (self.status, self.header, self.body_contains))

    @property
    def needs_dns(self) -> bool:
        return self.dns_signal is not None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if self.no_response:
            out["no_response"] = True
        if self.status is not None:
            out["status"] = self.status
        if self.header is not None:
            out["header"] = {"name": self.header[0], "contains": self.header[1]}
        if self.body_contains is not None:
            out["body_contains"] = self.body_contains.decode("utf-8")
        if self.dns_signal is not None:
            out["dns_signal"] = self.dns_signal.to_json()
        return out


@dataclass(frozen=True)
class ShareEdge:
    """Infrastructure-sharing edge: this provider fulfils service over
    ``provider``'s network. ``template`` regenerates the assigned
    subdomain from a custom domain when that generation is
    domain-deterministic (the takeover-relevant case); None for edges
    that only matter as annotations (e.g. shared-certificate reuse)."""

    provider: str
    template: Optional[str] = None
    note: str = ""

    def expand(self, domain: str) -> Optional[str]:
        if self.template is None:
            return None
        return self.template.replace("{domain}", domain)

    def to_json(self) -> dict[str, Any]:
        return {"provider": self.provider, "template": self.template, "note": self.note}


@dataclass(frozen=True)
class ProviderProfile:
    name: str
    assigned_suffixes: tuple[str, ...]
    nonhosted_fp: Optional[Fingerprint] = None
    discontinued_fp: Optional[Fingerprint] = None
    shares_infra_of: tuple[ShareEdge, ...] = ()
    liveness_header: Optional[tuple[str, str]] = None  # (name, contains)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.assigned_suffixes and not self.shares_infra_of:
            raise SchemaError(f"{self.name}: needs assigned suffixes or sharing edges")
        for suffix in self.assigned_suffixes:
            if not suffix.startswith(".") or suffix != suffix.lower():
                raise SchemaError(f"{self.name}: bad suffix {suffix!r} (must be lowercase, dot-prefixed)")

    @property
    def effective_verification(self) -> str:
        """What registration experiments established about this provider's
        domain verification: none / checked / w1_misconnection /
        w2_shared_random / unknown."""
        return str(self.metadata.get("verification_effective", "unknown"))


class ProviderDb:
    """Loaded, validated provider knowledge with a longest-suffix index."""

    def __init__(self, providers: list[ProviderProfile]):
        self.providers: tuple[ProviderProfile, ...] = tuple(sorted(providers, key=lambda p: p.name))
        self.by_name: dict[str, ProviderProfile] = {}
        self.suffix_index: dict[str, str] = {}
        for profile in self.providers:
            if profile.name in self.by_name:
                raise SchemaError(f"duplicate provider name {profile.name}")
            self.by_name[profile.name] = profile
        for profile in self.providers:
            for suffix in profile.assigned_suffixes:
                if suffix in self.suffix_index:
                    raise DuplicateSuffixError(
                        f"suffix {suffix} claimed by both {self.suffix_index[suffix]} and {profile.name}"
                    )
                self.suffix_index[suffix] = profile.name
            for edge in profile.shares_infra_of:
                if edge.provider not in self.by_name:
                    raise DanglingShareEdgeError(f"{profile.name}: sharing edge to unknown provider {edge.provider}")

    def __len__(self) -> int:
        return len(self.providers)

    def edges_into(self, provider: str) -> list[tuple[ProviderProfile, ShareEdge]]:
        """All (other provider, edge) pairs whose edge targets ``provider``."""
        out = []
        for profile in self.providers:
            for edge in profile.shares_infra_of:
                if edge.provider == provider and profile.name != provider:
                    out.append((profile, edge))
        return out


@dataclass(frozen=True)
class CdnMatch:
    provider: str
    matched_suffix: str
    matched_cname: str


def _parse_fingerprint(raw: Any, fp_id: str) -> Fingerprint:
    if not isinstance(raw, dict):
        raise SchemaError(f"fingerprint {fp_id}: expected object, got {type(raw).__name__}")
    header = None
    if raw.get("header") is not None:
        h = raw["header"]
        if not isinstance(h, dict) or "name" not in h or "contains" not in h:
            raise SchemaError(f"fingerprint {fp_id}: header needs name/contains")
        header = (str(h["name"]), str(h["contains"]))
    dns_signal = None
    if raw.get("dns_signal") is not None:
        sig = raw["dns_signal"]
        if isinstance(sig, str):
            try:
                dns_signal = DnsSignal(DnsSignalKind(sig))
            except ValueError:
                raise SchemaError(f"fingerprint {fp_id}: unknown dns_signal {sig!r}")
        elif isinstance(sig, dict) and "resolves_to" in sig:
            dns_signal = DnsSignal(DnsSignalKind.RESOLVES_TO, str(sig["resolves_to"]))
        else:
            raise SchemaError(f"fingerprint {fp_id}: bad dns_signal {sig!r}")
    body = raw.get("body_contains")
    status = raw.get("status")
    if status is not None and not isinstance(status, int):
        raise SchemaError(f"fingerprint {fp_id}: status must be an integer")
    return Fingerprint(
        id=fp_id,
        status=status,
        header=header,
        body_contains=body.encode("utf-8") if body is not None else None,
        dns_signal=dns_signal,
        no_response=bool(raw.get("no_response", False)),
    )


def _parse_provider(raw: dict[str, Any]) -> ProviderProfile:
    try:
        name = raw["name"]
        suffixes = raw["assigned_suffixes"]
    except KeyError as missing:
        raise SchemaError(f"provider entry missing {missing}")
    if not isinstance(suffixes, list):
        raise SchemaError(f"{name}: assigned_suffixes must be a list")
    nonhosted = raw.get("nonhosted_fp")
    discontinued = raw.get("discontinued_fp")
    edges = []
    for edge in raw.get("shares_infra_of", []):
        edges.append(ShareEdge(provider=edge["provider"], template=edge.get("template"), note=edge.get("note", "")))
    liveness = None
    if raw.get("liveness_header") is not None:
        lh = raw["liveness_header"]
        liveness = (str(lh["name"]), str(lh["contains"]))
    return ProviderProfile(
        name=str(name),
        assigned_suffixes=tuple(suffixes),
        nonhosted_fp=_parse_fingerprint(nonhosted, f"{name}:nonhosted") if nonhosted else None,
        discontinued_fp=_parse_fingerprint(discontinued, f"{name}:discontinued") if discontinued else None,
        shares_infra_of=tuple(edges),
        liveness_header=liveness,
        metadata=dict(raw.get("metadata", {})),
    )


def load_provider_db(path: str | Path) -> ProviderDb:
    """Load and validate the provider DB.

    File schema: a JSON array of provider objects with keys name,
    assigned_suffixes, nonhosted_fp, discontinued_fp, shares_infra_of,
    liveness_header, metadata. Fingerprint keys: status, header
    {name, contains}, body_contains, dns_signal ("nxdomain" | "servfail" |
    {"resolves_to": ip} | "single_a_record"), no_response.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON: {err}")
    if not isinstance(data, list):
        raise SchemaError(f"{path}: top level must be an array of providers")
    return ProviderDb([_parse_provider(entry) for entry in data])


def identify_cdn(obs: DnsObservation, db: ProviderDb) -> Optional[CdnMatch]:
    """Attribute an observation to a provider by its CNAME chain.

    The first chain element carrying any assigned suffix wins; among
    several suffixes matching that element the longest wins, ties broken
    by provider name. Returns None when no element matches.
    """
    for cname in obs.cname_chain:
        name = str(cname)
        candidates = [
            (len(suffix), provider, suffix)
            for suffix, provider in db.suffix_index.items()
            if name.endswith(suffix)
        ]
        if candidates:
            candidates.sort(key=lambda c: (-c[0], c[1]))
            _, provider, suffix = candidates[0]
            return CdnMatch(provider=provider, matched_suffix=suffix, matched_cname=name)
    return None


def match_fingerprint(
    fp: Fingerprint,
    http: Optional[HttpResponseSummary] = None,
    dns: Optional[DnsObservation] = None,
) -> bool:
    """Conjunctive fingerprint match: every present field must hold.

    Header names compare case-insensitively, header values and body
    phrases are substring matches; body matching is byte-exact against
    the response excerpt. Raises MissingEvidenceError when the required
    evidence side was not supplied.
    """
    if http is None and dns is None:
        raise MissingEvidenceError(f"{fp.id}: neither HTTP nor DNS evidence supplied")
    if fp.needs_http and http is None:
        raise MissingEvidenceError(f"{fp.id}: requires an HTTP response")
    if fp.needs_dns and dns is None:
        raise MissingEvidenceError(f"{fp.id}: requires a DNS observation")

    if fp.no_response:
        assert http is not None
        if http.failure is None:
            return False
    if fp.status is not None:
        assert http is not None
        if http.status != fp.status:
            return False
    if fp.header is not None:
        assert http is not None
        value = http.header(fp.header[0])
        if value is None or fp.header[1] not in value:
            return False
    if fp.body_contains is not None:
        assert http is not None
        if fp.body_contains not in http.body_excerpt:
            return False
    if fp.dns_signal is not None:
        assert dns is not None
        signal = fp.dns_signal
        if signal.kind is DnsSignalKind.NXDOMAIN:
            if dns.rcode is not Rcode.NXDOMAIN:
                return False
        elif signal.kind is DnsSignalKind.SERVFAIL:
            if dns.rcode is not Rcode.SERVFAIL:
                return False
        elif signal.kind is DnsSignalKind.RESOLVES_TO:
            if signal.ip not in dns.a_records:
                return False
        elif signal.kind is DnsSignalKind.SINGLE_A_RECORD:
            if dns.cname_chain or len(dns.a_records) != 1:
                return False
    return True
