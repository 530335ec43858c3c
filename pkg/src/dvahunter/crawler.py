"""
Subdomain enumeration: expands target SLDs through a prefix dictionary,
confirms candidates by DNS, and filters wildcard zones by comparing each
answer against the wildcard signature instead of mere existence, so
explicitly defined hosts under a wildcard survive.
"""

from __future__ import annotations

import logging
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import DnsObservation, DomainSyntaxError, Fqdn, Rcode, derive_rng, parse_fqdn
from .transport import RRType

logger = logging.getLogger(__name__)

RANDOM_PREFIX_LENGTH = 16
WILDCARD_PROBES = 3


class WildcardInconclusive(Exception):
    """Random-prefix answers disagreed; the zone cannot be classified."""


@dataclass(frozen=True)
class PrefixDictionary:
    """Ordered, deduplicated, lowercase label prefixes. A prefix may span
    several labels (e.g. "dev.api")."""

    prefixes: tuple[str, ...]

    @classmethod
    def from_lines(cls, lines: list[str]) -> "PrefixDictionary":
        seen = set()
        ordered = []
        for raw in lines:
            line = raw.split("#", 1)[0].strip().lower()
            if not line:
                continue
            for label in line.split("."):
                parse_fqdn(f"{label}.example.com")  # syntax check, raises DomainSyntaxError
            if line not in seen:
                seen.add(line)
                ordered.append(line)
        return cls(prefixes=tuple(ordered))

    @classmethod
    def load(cls, path: str | Path) -> "PrefixDictionary":
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines())

    def __len__(self) -> int:
        return len(self.prefixes)


@dataclass(frozen=True)
class WildcardSignature:
    """The common answer a wildcard zone returns for random prefixes."""

    cname_chain: tuple[str, ...]
    a_records: frozenset[str]
    ns: frozenset[str]

    @classmethod
    def of(cls, obs: DnsObservation) -> "WildcardSignature":
        return cls(
            cname_chain=tuple(str(c) for c in obs.cname_chain),
            a_records=frozenset(obs.a_records),
            ns=frozenset(obs.ns),
        )


@dataclass
class EnumerationResult:
    confirmed: list[Fqdn] = field(default_factory=list)
    unconfirmed: list[str] = field(default_factory=list)
    wildcard: Optional[WildcardSignature] = None
    wildcard_inconclusive: bool = False
    excluded_by_wildcard: list[str] = field(default_factory=list)


def _random_label(rng) -> str:
    alphabet = string.ascii_lowercase + string.digits
    return "".join(rng.choice(alphabet) for _ in range(RANDOM_PREFIX_LENGTH))


def detect_wildcard(
    sld: Fqdn,
    transport,
    seed: int = 0,
    probes: int = WILDCARD_PROBES,
) -> Optional[WildcardSignature]:
    """Probe random prefixes under the SLD. All resolving with one common
    answer means wildcard (returns the signature); none resolving means no
    wildcard (returns None); disagreement raises WildcardInconclusive."""
    rng = derive_rng(seed, "wildcard", str(sld))
    signatures = []
    for _ in range(probes):
        name = parse_fqdn(f"{_random_label(rng)}.{sld}")
        obs = transport.resolve(name, RRType.ALL)
        if obs.rcode is Rcode.NOERROR and obs.has_records:
            signatures.append(WildcardSignature.of(obs))
        else:
            signatures.append(None)
    if all(sig is None for sig in signatures):
        return None
    if any(sig is None for sig in signatures) or len(set(signatures)) != 1:
        raise WildcardInconclusive(f"random prefixes under {sld} answered inconsistently")
    return signatures[0]


def enumerate_subdomains(
    sld: Fqdn,
    dictionary: PrefixDictionary,
    transport,
    seed: int = 0,
    workers: int = 1,
) -> EnumerationResult:
    """Join every prefix with the SLD, keep the candidates whose DNS
    answer carries records, and drop the ones indistinguishable from the
    wildcard signature. Output is sorted and deduplicated; per-candidate
    timeouts land in ``unconfirmed``."""
    result = EnumerationResult()
    try:
        result.wildcard = detect_wildcard(sld, transport, seed=seed)
    except WildcardInconclusive:
        result.wildcard_inconclusive = True
        logger.warning("wildcard check inconclusive for %s; enumeration proceeds without exclusion", sld)

    candidates = []
    for prefix in dictionary.prefixes:
        try:
            candidates.append(parse_fqdn(f"{prefix}.{sld}"))
        except DomainSyntaxError:
            result.unconfirmed.append(f"{prefix}.{sld}")

    def probe(name: Fqdn) -> tuple[Fqdn, DnsObservation]:
        return name, transport.resolve(name, RRType.ALL)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            observations = list(pool.map(probe, candidates))
    else:
        observations = [probe(name) for name in candidates]

    confirmed: set[Fqdn] = set()
    for name, obs in observations:
        if obs.rcode is not Rcode.NOERROR or not obs.has_records:
            result.unconfirmed.append(str(name))
            continue
        if result.wildcard is not None and WildcardSignature.of(obs) == result.wildcard:
            result.excluded_by_wildcard.append(str(name))
            continue
        confirmed.add(name)
    result.confirmed = sorted(confirmed, key=str)
    return result
