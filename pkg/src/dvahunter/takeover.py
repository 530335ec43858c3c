"""
Domain-takeover detection: recognize dangling domains through
service-discontinued fingerprints (DNS stage first, HTTP stage only on a
DNS miss), enumerate feasible takeover paths including the
misconnection (W1), shared-random-subdomain (W2) and Multi-CDN
shared-CNAME routes, and run the origin-IP-exposure check for
residual-resolution providers.

DNS-stage fingerprints describe the assigned subdomain's behavior after
service termination, so they are evaluated against the terminal
observation: a fresh resolution of the last CNAME chain element.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

from .checker import HostedDomainRecord
from .core import (
    DnsObservation,
    Evidence,
    Fqdn,
    HttpProbe,
    Scheme,
    TransportFailure,
    Verdict,
    parse_fqdn,
)
from .providers import Fingerprint, ProviderDb, match_fingerprint
from .simnet import VerificationFailed
from .transport import RRType

logger = logging.getLogger(__name__)

# register(provider, custom_domain, account) -> assigned subdomain
RegisterFn = Callable[[str, str, str], str]


class DanglingStage(Enum):
    DNS_STAGE = "dns_stage"
    HTTP_STAGE = "http_stage"


class TakeoverKind(Enum):
    NO_VERIFICATION = "no_verification"
    FLAWED_W1 = "flawed_w1"  # misconnection: custom domain binds via the fixed subdomain
    FLAWED_W2 = "flawed_w2"  # domain-deterministic assigned subdomain
    MULTI_CDN_SHARED_CNAME = "multi_cdn_shared_cname"


class ExposurePrecondition(Exception):
    """The record does not qualify for the origin-exposure check."""


class DanglingProbeFailure(Exception):
    """Transport failure at the HTTP stage: the record stays Inconclusive."""


@dataclass(frozen=True)
class TakeoverPath:
    kind: TakeoverKind
    via_provider: str
    rationale: str
    validated: Optional[bool] = None  # mock-mode registration outcome; None in live mode

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "via_provider": self.via_provider,
            "rationale": self.rationale,
            "validated": self.validated,
        }


@dataclass(frozen=True)
class DanglingFinding:
    fqdn: Fqdn
    provider: str
    matched_fp: str
    stage: DanglingStage
    matched_cname: str
    evidence: tuple[Evidence, ...] = ()
    takeover_paths: tuple[TakeoverPath, ...] = ()


def _terminal_observation(record: HostedDomainRecord, transport) -> DnsObservation:
    """Resolve the last chain element on its own: the records 'behind'
    the assigned subdomain, where discontinuation signals live."""
    tail = record.observation.cname_chain[-1]
    return transport.resolve(tail, RRType.A)


def _http_stage_probe(record: HostedDomainRecord, transport):
    """HTTPS with SNI = Host = fqdn, falling back to plain HTTP when the
    edge has no certificate to offer for the dead name."""
    ips = record.observation.a_records
    if not ips:
        return None, None
    probe = HttpProbe(
        target_ip=ips[0], scheme=Scheme.HTTPS, host_header=record.fqdn, sni=record.fqdn
    )
    response = transport.probe(probe)
    if response.failure is TransportFailure.TLS_ERROR:
        probe = HttpProbe(target_ip=ips[0], scheme=Scheme.HTTP, host_header=record.fqdn)
        response = transport.probe(probe)
    return probe, response


def detect_dangling(
    record: HostedDomainRecord,
    transport,
    db: ProviderDb,
) -> Optional[DanglingFinding]:
    """Match the record against service-discontinued fingerprints.

    The hosting provider's own fingerprint applies first. When another
    provider's sharing edge regenerates this record's CNAME target (the
    Multi-CDN namespace case), that provider's fingerprint applies too;
    without it, a terminated Multi-CDN service hiding in the host
    provider's namespace would be invisible.

    Returns None for healthy records. Raises LookupError when no
    fingerprint source exists at all, so the caller reports Inconclusive
    rather than guessing.
    """
    profile = db.by_name[record.provider]
    sources: list[tuple[str, Fingerprint]] = []
    if profile.discontinued_fp is not None:
        sources.append((record.provider, profile.discontinued_fp))
    for other, edge in db.edges_into(record.provider):
        if other.discontinued_fp is None:
            continue
        if edge.expand(str(record.fqdn)) == record.matched_cname:
            sources.append((other.name, other.discontinued_fp))
    if not sources:
        raise LookupError(f"{record.provider}: no service-discontinued fingerprint")

    terminal: Optional[DnsObservation] = None
    for owner, fp in sources:
        if fp.dns_signal is None:
            continue
        if terminal is None:
            terminal = _terminal_observation(record, transport)
        if match_fingerprint(replace(fp, status=None, header=None, body_contains=None), dns=terminal):
            return DanglingFinding(
                fqdn=record.fqdn,
                provider=record.provider,
                matched_fp=fp.id,
                stage=DanglingStage.DNS_STAGE,
                matched_cname=record.matched_cname,
                evidence=(
                    Evidence(
                        "dns-stage",
                        f"terminal resolution of {record.matched_cname} matches {fp.id} ({owner})",
                        observation=terminal,
                        fingerprint_id=fp.id,
                    ),
                ),
            )

    http_sources = [(owner, fp) for owner, fp in sources if fp.needs_http]
    if not http_sources:
        return None
    probe, response = _http_stage_probe(record, transport)
    if response is None:
        return None
    if response.failure is not None:
        raise DanglingProbeFailure(f"{record.fqdn}: HTTP-stage probe failed ({response.failure.value})")
    for owner, fp in http_sources:
        checkable = replace(fp, dns_signal=None)
        if match_fingerprint(checkable, http=response):
            return DanglingFinding(
                fqdn=record.fqdn,
                provider=record.provider,
                matched_fp=fp.id,
                stage=DanglingStage.HTTP_STAGE,
                matched_cname=record.matched_cname,
                evidence=(
                    Evidence(
                        "http-stage",
                        f"edge response matches {fp.id} ({owner})",
                        probe=probe,
                        response=response,
                        fingerprint_id=fp.id,
                    ),
                ),
            )
    return None


def enumerate_takeover_paths(
    finding: DanglingFinding,
    db: ProviderDb,
    register: Optional[RegisterFn] = None,
    transport=None,
) -> list[TakeoverPath]:
    """Assemble takeover paths from provider knowledge. With a mock
    registration oracle, each path is additionally validated end to end:
    register the domain as an attacker and confirm the edge serves it.
    An empty list means dangling-only: the fingerprint matched but no
    automated path is known."""
    hosting = db.by_name[finding.provider]
    paths: list[TakeoverPath] = []
    effective = hosting.effective_verification
    if effective == "none":
        paths.append(
            TakeoverPath(
                TakeoverKind.NO_VERIFICATION,
                hosting.name,
                "provider performs no effective domain verification",
            )
        )
    elif effective == "w1_misconnection":
        paths.append(
            TakeoverPath(
                TakeoverKind.FLAWED_W1,
                hosting.name,
                "misconnection: the custom domain binds via the fixed subdomain "
                "even though the attacker is assigned a fresh name",
            )
        )
    elif effective == "w2_shared_random":
        paths.append(
            TakeoverPath(
                TakeoverKind.FLAWED_W2,
                hosting.name,
                "assigned subdomain is a deterministic function of the custom domain: "
                "any account regenerates the victim's name",
            )
        )
    for other, edge in db.edges_into(finding.provider):
        expanded = edge.expand(str(finding.fqdn))
        if expanded is not None and expanded == finding.matched_cname:
            paths.append(
                TakeoverPath(
                    TakeoverKind.MULTI_CDN_SHARED_CNAME,
                    other.name,
                    f"{other.name} regenerates {expanded} for this custom domain, "
                    f"bypassing {finding.provider}'s verification",
                )
            )
    if register is not None:
        paths = [
            replace(path, validated=_validate_path(path, finding, register, transport))
            for path in paths
        ]
    return paths


def _validate_path(path: TakeoverPath, finding: DanglingFinding, register: RegisterFn, transport) -> bool:
    domain = str(finding.fqdn)
    try:
        assigned = register(path.via_provider, domain, "attacker-account-1")
    except VerificationFailed as blocked:
        logger.info("registration blocked: %s", blocked)
        return False
    if path.kind is TakeoverKind.FLAWED_W2:
        second = register(path.via_provider, domain, "attacker-account-2")
        if second != assigned:
            return False
    if path.kind is TakeoverKind.MULTI_CDN_SHARED_CNAME and assigned != finding.matched_cname:
        return False
    if transport is None:
        return True
    obs = transport.resolve(finding.fqdn, RRType.A)
    if not obs.a_records:
        return False
    response = transport.probe(
        HttpProbe(target_ip=obs.a_records[0], scheme=Scheme.HTTP, host_header=finding.fqdn)
    )
    return response.failure is None and response.ok


def check_origin_exposure(fqdn: Fqdn, observation: DnsObservation, transport) -> Verdict:
    """Residual-resolution check: probe the single A record once with the
    domain as Host and once with the bare IP literal. Equal bodies mean
    the address serves the site without its name: the origin is exposed."""
    if len(observation.a_records) != 1 or observation.cname_chain:
        raise ExposurePrecondition(
            f"{fqdn}: needs exactly one A record and no CNAME chain "
            f"(has {len(observation.a_records)} records, chain of {len(observation.cname_chain)})"
        )
    ip = observation.a_records[0]
    named = transport.probe(HttpProbe(target_ip=ip, scheme=Scheme.HTTP, host_header=fqdn))
    literal = transport.probe(HttpProbe(target_ip=ip, scheme=Scheme.HTTP, host_header=parse_fqdn(ip)))
    named_ev = Evidence("host-named", f"host={fqdn} at {ip}", response=named)
    literal_ev = Evidence("host-literal", f"host={ip} at {ip}", response=literal)
    if named.failure is not None or literal.failure is not None:
        return Verdict.inconclusive((named_ev, literal_ev))
    if named.ok and literal.ok and named.body_hash == literal.body_hash:
        return Verdict.vulnerable((named_ev, literal_ev, Evidence("exposure", "identical bodies with and without the hostname")))
    return Verdict.not_vulnerable((named_ev, literal_ev))
