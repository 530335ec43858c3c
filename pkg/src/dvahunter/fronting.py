"""
Domain-fronting testing: harvest stable static URLs from CDN-hosted
domains, generate bounded (front, target, url) tuples, execute the
three-request protocol, and fold tuple verdicts into a provider verdict.

Budgets: at most 10 domains touched per provider, at most 10 tuples
executed per provider, at most 10 URLs harvested per domain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from html.parser import HTMLParser
from typing import Optional
from urllib.parse import urlparse

from .core import (
    Evidence,
    Fqdn,
    HttpProbe,
    HttpResponseSummary,
    Scheme,
    Verdict,
    VerdictKind,
    derive_rng,
    sha1_body,
)

logger = logging.getLogger(__name__)

MAX_DOMAINS_PER_PROVIDER = 10
MAX_TUPLES_PER_PROVIDER = 10
MAX_URLS_PER_DOMAIN = 10

_STATIC_KINDS = {
    ".png": "image", ".jpg": "image", ".jpeg": "image", ".gif": "image",
    ".svg": "image", ".ico": "image", ".webp": "image",
    ".js": "script",
    ".css": "stylesheet",
}


class UrlKind(Enum):
    IMAGE = "image"
    SCRIPT = "script"
    STYLESHEET = "stylesheet"


class RootFetchFailed(Exception):
    """The "/" page of a hosted domain was unreachable."""


class InsufficientDomains(Exception):
    """Fewer than two usable hosted domains; the provider cannot be paired."""


@dataclass(frozen=True)
class HarvestedUrl:
    domain: Fqdn
    path: str
    kind: UrlKind
    stability_hash: bytes  # set only when two fetches matched


@dataclass(frozen=True)
class FrontingTuple:
    fd: Fqdn  # front domain (SNI)
    td: Fqdn  # target domain (Host)
    ut: HarvestedUrl  # URL on td
    ingress_ip: str
    rt: Optional[HttpResponseSummary] = None
    rv: Optional[HttpResponseSummary] = None
    rf: Optional[HttpResponseSummary] = None

    def __post_init__(self) -> None:
        if self.fd == self.td:
            raise ValueError("front and target domains must differ")
        if self.ut.domain != self.td:
            raise ValueError("tuple URL must live on the target domain")


class _AssetExtractor(HTMLParser):
    def __init__(self) -> None:
        super().__init__()
        self.refs: list[str] = []

    def handle_starttag(self, tag: str, attrs) -> None:
        wanted = {"img": "src", "script": "src", "link": "href"}
        attr = wanted.get(tag)
        if attr is None:
            return
        for name, value in attrs:
            if name == attr and value:
                self.refs.append(value)


def _classify(path: str) -> Optional[UrlKind]:
    lowered = path.lower().split("?", 1)[0]
    for ext, kind in _STATIC_KINDS.items():
        if lowered.endswith(ext):
            return UrlKind(kind)
    return None


def _same_domain_path(ref: str, domain: Fqdn) -> Optional[str]:
    if ref.startswith("//"):
        ref = "https:" + ref
    if "://" in ref:
        parsed = urlparse(ref)
        if parsed.hostname != str(domain):
            return None
        return parsed.path or "/"
    if ref.startswith("/"):
        return ref
    return "/" + ref


def harvest_urls(
    domain: Fqdn,
    ingress_ip: str,
    transport,
    max_urls: int = MAX_URLS_PER_DOMAIN,
    seed: int = 0,
) -> list[HarvestedUrl]:
    """Fetch "/" through the CDN, collect same-domain static asset
    references, fetch each twice, and keep the ones whose bodies hashed
    identically. Seeded-random truncation caps the result at max_urls."""
    root = transport.probe(
        HttpProbe(target_ip=ingress_ip, scheme=Scheme.HTTPS, host_header=domain, sni=domain, path="/")
    )
    if root.failure is not None or not root.ok:
        raise RootFetchFailed(f"{domain}: / answered {root.failure.value if root.failure else root.status}")
    extractor = _AssetExtractor()
    extractor.feed(root.body_excerpt.decode("utf-8", "replace"))
    candidates: list[tuple[str, UrlKind]] = []
    seen: set[str] = set()
    for ref in extractor.refs:
        path = _same_domain_path(ref, domain)
        if path is None or path in seen:
            continue
        kind = _classify(path)
        if kind is None:
            continue
        seen.add(path)
        candidates.append((path, kind))
    stable: list[HarvestedUrl] = []
    for path, kind in candidates:
        probe = HttpProbe(target_ip=ingress_ip, scheme=Scheme.HTTPS, host_header=domain, sni=domain, path=path)
        first = transport.probe(probe)
        second = transport.probe(probe)
        if first.failure is not None or second.failure is not None:
            continue
        if not first.ok or first.body_hash != second.body_hash:
            continue
        stable.append(HarvestedUrl(domain=domain, path=path, kind=kind, stability_hash=first.body_hash))
    if len(stable) > max_urls:
        rng = derive_rng(seed, "harvest", str(domain))
        stable = sorted(rng.sample(stable, max_urls), key=lambda u: u.path)
    return stable


def generate_tuples(
    provider: str,
    urls_by_domain: dict[Fqdn, list[HarvestedUrl]],
    ingress_ip: str,
    seed: int = 0,
    max_tuples: int = MAX_TUPLES_PER_PROVIDER,
) -> list[FrontingTuple]:
    """Pair distinct hosted domains of one provider into up to
    ``max_tuples`` (front, target, url) tuples, seeded-random. Targets
    need at least one harvested URL; fronts do not."""
    domains = sorted(urls_by_domain, key=str)
    if len(domains) < 2:
        raise InsufficientDomains(f"{provider}: {len(domains)} usable domain(s)")
    pairs = [
        (fd, td)
        for fd in domains
        for td in domains
        if fd != td and urls_by_domain[td]
    ]
    if not pairs:
        raise InsufficientDomains(f"{provider}: no pair with a harvested URL")
    rng = derive_rng(seed, "tuples", provider)
    rng.shuffle(pairs)
    out = []
    for fd, td in pairs[:max_tuples]:
        ut = rng.choice(urls_by_domain[td])
        out.append(FrontingTuple(fd=fd, td=td, ut=ut, ingress_ip=ingress_ip))
    return out


def run_tuple(item: FrontingTuple, transport) -> FrontingTuple:
    """The three-step protocol, strictly sequential against one ingress:
    1. SNI=target, Host=target  -> rt (the reference object)
    2. SNI=front,  Host=target  -> rv (the fronting attempt)
    3. SNI=front,  Host=front   -> rf (validity control)
    """
    def step(sni: Fqdn, host: Fqdn) -> HttpResponseSummary:
        return transport.probe(
            HttpProbe(target_ip=item.ingress_ip, scheme=Scheme.HTTPS, host_header=host, sni=sni, path=item.ut.path)
        )

    rt = step(item.td, item.td)
    rv = step(item.fd, item.td)
    rf = step(item.fd, item.fd)
    return replace(item, rt=rt, rv=rv, rf=rf)


def judge_tuple(item: FrontingTuple) -> Verdict:
    """Vulnerable iff rt is a clean 2xx, rv's body hash equals rt's, and
    rf is a 404/empty body or differs from rt. Hash comparison decides;
    any transport failure forces Inconclusive."""
    rt, rv, rf = item.rt, item.rv, item.rf
    if rt is None or rv is None or rf is None:
        raise ValueError("tuple has not been executed")

    def note(kind: str, detail: str, response: Optional[HttpResponseSummary]) -> Evidence:
        return Evidence(kind=kind, detail=detail, response=response)

    base = (
        note("rt", f"sni=td host=td {item.td}{item.ut.path}", rt),
        note("rv", f"sni=fd({item.fd}) host=td({item.td})", rv),
        note("rf", f"sni=fd host=fd {item.fd}", rf),
    )
    for name, response in (("rt", rt), ("rv", rv), ("rf", rf)):
        if response.failure is not None:
            return Verdict.inconclusive(base + (note("failure", f"{name} transport failure", response),))
    if not rt.ok:
        return Verdict.inconclusive(base + (note("invalid", f"rt status {rt.status} is not a clean 2xx", rt),))
    if rv.body_hash != rt.body_hash:
        return Verdict.not_vulnerable(base + (note("mismatch", "rv does not reproduce rt", rv),))
    empty_hash = sha1_body(b"")
    if rf.status == 404:
        control = "rf answered 404"
    elif rf.body_hash == empty_hash:
        control = "rf body empty"
    elif rf.body_hash != rt.body_hash:
        control = "rf differs from rt"
    else:
        return Verdict.inconclusive(
            base + (note("invalid", "rf reproduced rt: front serves the target object, test invalid", rf),)
        )
    return Verdict.vulnerable(base + (note("control", control, rf),))


def judge_provider(verdicts: list[Verdict]) -> Verdict:
    """Vulnerable needs at least one vulnerable tuple and no contradicting
    tuple; mixed vulnerable/not-vulnerable results refuse to guess."""
    if not verdicts:
        return Verdict.inconclusive((Evidence("fronting", "no tuples could be executed"),))
    kinds = [v.kind for v in verdicts]
    vulnerable = kinds.count(VerdictKind.VULNERABLE)
    clean = kinds.count(VerdictKind.NOT_VULNERABLE)
    summary = Evidence(
        "fronting",
        f"tuples: {vulnerable} vulnerable, {clean} not vulnerable, "
        f"{len(kinds) - vulnerable - clean} inconclusive",
    )
    if vulnerable and not clean:
        supporting = tuple(e for v in verdicts if v.kind is VerdictKind.VULNERABLE for e in v.evidence)
        return Verdict.vulnerable((summary,) + supporting)
    if clean and not vulnerable:
        return Verdict.not_vulnerable((summary,))
    if vulnerable and clean:
        return Verdict.inconclusive(
            (Evidence("mixed-results", "tuple verdicts disagree across domain pairs; refusing to guess"), summary)
        )
    return Verdict.inconclusive((summary,))
