"""
Domain-borrowing detection: a domain whose DNS never delegated to a CDN
but which that CDN's ingress nevertheless serves. The oracle is the
provider's non-hosted fingerprint: first a freshly generated random host
must reproduce it (the live baseline), then every candidate that does
NOT reproduce it is being served, i.e. borrowed.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .core import (
    Evidence,
    Fqdn,
    HttpProbe,
    HttpResponseSummary,
    Scheme,
    Verdict,
    derive_rng,
    parse_fqdn,
)
from .providers import ProviderProfile, match_fingerprint

logger = logging.getLogger(__name__)

BASELINE_HOST_LENGTH = 32


class BaselineMismatch(Exception):
    """The live edge no longer answers unknown hosts the way the DB says;
    the provider is excluded from the borrowing scan."""


class BorrowingTls(Enum):
    SHARED_CERTIFICATE = "shared_certificate"
    WILDCARD_CERTIFICATE = "wildcard_certificate"
    HTTP_ONLY = "http_only"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class BorrowingCandidate:
    domain: Fqdn
    provider: str
    ingress_ip: str
    response: HttpResponseSummary
    verdict: Verdict
    tls: Optional[BorrowingTls] = None


def random_baseline_host(seed: int, provider: str) -> Fqdn:
    """32 random characters under the reserved .invalid TLD, so a
    live-mode accident can never land on a real domain."""
    rng = derive_rng(seed, "baseline", provider)
    alphabet = string.ascii_lowercase + string.digits
    label = "".join(rng.choice(alphabet) for _ in range(BASELINE_HOST_LENGTH))
    return parse_fqdn(f"{label}.invalid")


def probe_baseline(profile: ProviderProfile, ingress_ip: str, transport, seed: int = 0) -> HttpResponseSummary:
    """Probe a random non-existent host at a representative ingress and
    require the answer to match the DB's non-hosted fingerprint."""
    if profile.nonhosted_fp is None:
        raise ValueError(f"{profile.name}: no non-hosted fingerprint to verify against")
    host = random_baseline_host(seed, profile.name)
    response = transport.probe(HttpProbe(target_ip=ingress_ip, scheme=Scheme.HTTP, host_header=host))
    if not match_fingerprint(profile.nonhosted_fp, http=response):
        raise BaselineMismatch(
            f"{profile.name}: random host {host} answered "
            f"{response.failure.value if response.failure else response.status}, "
            f"which does not match fingerprint {profile.nonhosted_fp.id}"
        )
    return response


def find_borrowing(
    domains: list[Fqdn],
    profile: ProviderProfile,
    ingress_ip: str,
    transport,
    db=None,
) -> list[BorrowingCandidate]:
    """Probe each non-hosted domain as the Host header at one
    representative ingress. A concrete response that does not match the
    non-hosted fingerprint means the edge serves the domain: borrowing.

    With a provider DB supplied, the non-hosted precondition is enforced:
    a candidate whose CNAME chain attributes to the probed provider is a
    caller bug, not a borrowing case."""
    fp = profile.nonhosted_fp
    if fp is None:
        raise ValueError(f"{profile.name}: baseline-first ordering violated (no fingerprint)")
    if db is not None:
        from .providers import identify_cdn
        from .transport import RRType
        for domain in domains:
            match = identify_cdn(transport.resolve(domain, RRType.ALL), db)
            if match is not None and match.provider == profile.name:
                raise ValueError(f"{domain} is hosted by {profile.name}; not a borrowing candidate")
    out = []
    for domain in domains:
        probe = HttpProbe(target_ip=ingress_ip, scheme=Scheme.HTTP, host_header=domain)
        response = transport.probe(probe)
        served_evidence = Evidence(
            "borrowing-probe",
            f"host={domain} at {profile.name} ingress {ingress_ip}",
            probe=probe,
            response=response,
            fingerprint_id=fp.id,
        )
        if response.failure is not None and not fp.no_response:
            verdict = Verdict.inconclusive((served_evidence,))
        elif match_fingerprint(fp, http=response):
            verdict = Verdict.not_vulnerable((served_evidence,))
        elif response.status is not None:
            verdict = Verdict.vulnerable((served_evidence,))
        else:
            verdict = Verdict.inconclusive((served_evidence,))
        out.append(
            BorrowingCandidate(
                domain=domain,
                provider=profile.name,
                ingress_ip=ingress_ip,
                response=response,
                verdict=verdict,
            )
        )
    return out


def classify_borrowing_tls(candidate: BorrowingCandidate, transport) -> BorrowingTls:
    """For a borrowing-vulnerable candidate, classify how the edge serves
    it over TLS: another tenant's wildcard certificate covering the name,
    the provider's default shared certificate, or plain HTTP only."""
    probe = HttpProbe(
        target_ip=candidate.ingress_ip,
        scheme=Scheme.HTTPS,
        host_header=candidate.domain,
        sni=candidate.domain,
    )
    response = transport.probe(probe)
    if response.failure is None and response.status is not None:
        cert = response.tls_cert_name or ""
        if cert.startswith("*.") and _wildcard_covers(cert, str(candidate.domain)):
            return BorrowingTls.WILDCARD_CERTIFICATE
        return BorrowingTls.SHARED_CERTIFICATE
    http_side = candidate.response
    if http_side.failure is None and http_side.status is not None:
        return BorrowingTls.HTTP_ONLY
    retry = transport.probe(
        HttpProbe(target_ip=candidate.ingress_ip, scheme=Scheme.HTTP, host_header=candidate.domain)
    )
    if retry.failure is None:
        return BorrowingTls.HTTP_ONLY
    return BorrowingTls.INCONCLUSIVE


def _wildcard_covers(pattern: str, name: str) -> bool:
    base = pattern[1:]  # "*.x.y" -> ".x.y"
    return name.endswith(base) and "." not in name[: -len(base)]
