"""
A scenario-driven simulated internet: DNS zones, CDN providers with
configurable verification/fronting/borrowing/takeover behaviors, and
origin servers. It backs the mock transport and serves as the ground
truth oracle for the acceptance suite.

Design notes:
  * TLS is modeled as metadata: the SNI travels with the probe and
    certificate names are declared fields, so no real handshake happens
    and the whole world stays deterministic and fast.
  * Non-hosted and service-discontinued responses are synthesized from
    the provider DB fingerprints, so detector and simulator share one
    source of truth and cannot drift apart.
  * serve_dns/serve_http are pure functions of (scenario, query) except
    for two explicitly stateful features: per-URL fetch counters behind
    "dynamic" origins, and attacker registrations. Replaying the same
    call sequence on a fresh session reproduces identical responses.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

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
from .providers import Fingerprint, ProviderDb

MAX_CHAIN = 16
MISMATCH_STATUS = 421  # Misdirected Request: the standards-defined SNI/Host mismatch answer


class ScenarioError(ValueError):
    pass


class VerificationFailed(Exception):
    """Registration blocked by the provider's verification mode."""

    def __init__(self, provider: str, mode: "VerificationMode", reason: str):
        super().__init__(f"{provider}: {reason} (mode={mode.value})")
        self.provider = provider
        self.mode = mode


class RegisteredBy(Enum):
    LEGIT_OWNER = "legit"
    ATTACKER = "attacker"


class FrontingPolicy(Enum):
    ROUTE_BY_HOST_IGNORING_SNI = "route_by_host_ignoring_sni"
    REJECT_ON_MISMATCH = "reject_on_mismatch"


class BorrowingPolicy(Enum):
    SERVE_ANY_REGISTERED_HOST = "serve_any_registered_host"
    REQUIRE_DNS_PROOF = "require_dns_proof"


class VerificationMode(Enum):
    NONE = "none"
    DNS_TOKEN_CHECKED = "dns_token_checked"
    FLAWED_MISCONNECTION = "flawed_misconnection"  # W1: custom domain binds via the fixed subdomain
    FLAWED_SHARED_RANDOM = "flawed_shared_random"  # W2: assigned name is a pure function of the domain


@dataclass(frozen=True)
class HostEntry:
    host: str
    origin_ip: str
    registered_by: RegisteredBy = RegisteredBy.LEGIT_OWNER
    dns_points_here: bool = True


@dataclass(frozen=True)
class ScenarioProvider:
    name: str
    ingress_ips: tuple[tuple[str, str], ...]  # (ip, city)
    fronting_policy: FrontingPolicy = FrontingPolicy.REJECT_ON_MISMATCH
    borrowing_policy: BorrowingPolicy = BorrowingPolicy.REQUIRE_DNS_PROOF
    verification_mode: VerificationMode = VerificationMode.DNS_TOKEN_CHECKED
    host_table: tuple[HostEntry, ...] = ()
    assigned_subdomain_rule: str = "random"  # "random" or a template containing {domain}
    shared_cert_name: Optional[str] = None
    wildcard_certs: tuple[str, ...] = ()
    server_header: Optional[str] = None
    degraded_ips: frozenset[str] = frozenset()
    nonhosted_override: Optional[tuple[int, str]] = None  # mis-configured world knob

    def __post_init__(self) -> None:
        if not self.ingress_ips:
            raise ScenarioError(f"{self.name}: needs at least one ingress IP")
        if self.verification_mode is VerificationMode.FLAWED_SHARED_RANDOM and "{domain}" in self.assigned_subdomain_rule:
            # the W2 flaw is domain-determinism of the *random* label;
            # template rules model Multi-CDN namespaces instead
            raise ScenarioError(f"{self.name}: flawed_shared_random uses the random rule")

    @property
    def ips(self) -> tuple[str, ...]:
        return tuple(ip for ip, _ in self.ingress_ips)


@dataclass(frozen=True)
class ZoneRecord:
    cname: Optional[str] = None
    a: tuple[str, ...] = ()
    ns: tuple[str, ...] = ()
    servfail: bool = False
    external: bool = False  # cname target intentionally outside the scenario


@dataclass(frozen=True)
class Origin:
    """A static content server. ``per_host`` makes it virtual-host bound:
    unknown Host values get a 404 instead of the default body. ``dynamic``
    appends a per-fetch counter so repeated fetches differ."""

    body: bytes
    per_host: Optional[dict[str, bytes]] = None
    dynamic: bool = False
    content_type: str = "text/html"


@dataclass(frozen=True)
class DiscontinuedService:
    provider: str
    origin_ip: Optional[str] = None  # residual-resolution target, where applicable


@dataclass
class Scenario:
    providers: list[ScenarioProvider]
    zones: dict[str, ZoneRecord] = field(default_factory=dict)
    origins: dict[str, Origin] = field(default_factory=dict)
    discontinued: dict[str, DiscontinuedService] = field(default_factory=dict)
    seed: int = 0
    attacker_origin_ip: Optional[str] = None

    def provider(self, name: str) -> ScenarioProvider:
        for prov in self.providers:
            if prov.name == name:
                return prov
        raise KeyError(name)


def derive_label(seed: int, *parts: object) -> str:
    material = "|".join([str(seed)] + [str(p) for p in parts])
    return hashlib.sha1(material.encode("utf-8")).hexdigest()[:10]


def _suffix_base(prov: ScenarioProvider, db: ProviderDb) -> str:
    profile = db.by_name.get(prov.name)
    if profile is not None and profile.assigned_suffixes:
        return profile.assigned_suffixes[0]
    return f".{_slug(prov.name)}.example"


def _slug(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalnum())


def assigned_subdomain_for(
    prov: ScenarioProvider, db: ProviderDb, seed: int, domain: str, account: str
) -> str:
    """The name a provider hands out when ``account`` deploys ``domain``.

    Template rules expand the domain (Multi-CDN namespaces). The
    flawed-shared-random mode derives the label from the domain alone,
    which is exactly the W2 weakness: every account gets the same name.
    """
    if "{domain}" in prov.assigned_subdomain_rule:
        return prov.assigned_subdomain_rule.replace("{domain}", domain)
    base = _suffix_base(prov, db)
    if prov.verification_mode is VerificationMode.FLAWED_SHARED_RANDOM:
        label = derive_label(seed, prov.name, domain)
    else:
        label = derive_label(seed, prov.name, domain, account)
    return f"cdn-{label}{base}"


def verification_record_name(domain: str) -> str:
    return f"cdnverify.{domain}"


def token_target(prov_name: str, label: str) -> str:
    return f"token-{label}.dv.{_slug(prov_name)}.example"


_GENERIC_404 = b"<html><body>no such site here</body></html>"


class SimulatedInternet:
    """One session over a scenario: answers DNS and HTTP, accepts attacker
    registrations, and keeps the per-fetch counters for dynamic origins."""

    def __init__(self, scenario: Scenario, db: ProviderDb):
        self.scenario = scenario
        self.db = db
        self._ip_owner: dict[str, ScenarioProvider] = {}
        for prov in scenario.providers:
            for ip in prov.ips:
                if ip in self._ip_owner or ip in scenario.origins:
                    raise ScenarioError(f"ingress IP {ip} assigned twice")
                self._ip_owner[ip] = prov
        self._registrations: dict[str, dict[str, HostEntry]] = {p.name: {} for p in scenario.providers}
        self._zone_overrides: dict[str, ZoneRecord] = {}
        self._fetch_counts: dict[tuple[str, str, str], int] = {}
        self._write_lock = threading.Lock()
        self._dangling_targets = self._index_dangling_targets()

    # -- DNS ----------------------------------------------------------------

    def _index_dangling_targets(self) -> dict[str, tuple[str, str]]:
        """cname target -> (discontinued host, behavior provider)."""
        out: dict[str, tuple[str, str]] = {}
        for host, service in self.scenario.discontinued.items():
            record = self.scenario.zones.get(host)
            if record is not None and record.cname:
                out[record.cname] = (host, service.provider)
        return out

    def _lookup(self, name: str) -> Optional[ZoneRecord]:
        override = self._zone_overrides.get(name)
        if override is not None:
            return override
        record = self.scenario.zones.get(name)
        if record is not None:
            return record
        labels = name.split(".")
        for depth in range(1, len(labels)):
            wildcard = "*." + ".".join(labels[depth:])
            record = self.scenario.zones.get(wildcard)
            if record is not None:
                return record
        dangling = self._dangling_targets.get(name)
        if dangling is not None:
            return self._dangling_behavior(*dangling)
        return None

    def _dangling_behavior(self, host: str, provider_name: str) -> Optional[ZoneRecord]:
        """What the assigned subdomain of a terminated service resolves to,
        synthesized from the behavior provider's discontinued fingerprint."""
        profile = self.db.by_name.get(provider_name)
        fp = profile.discontinued_fp if profile is not None else None
        prov = self.scenario.provider(provider_name)
        if fp is not None and fp.dns_signal is not None:
            kind = fp.dns_signal.kind.value
            if kind == "nxdomain":
                return None
            if kind == "servfail":
                return ZoneRecord(servfail=True)
            if kind == "resolves_to":
                return ZoneRecord(a=(fp.dns_signal.ip,))
            if kind == "single_a_record":
                residual = self.scenario.discontinued[host].origin_ip
                if residual is None:
                    raise ScenarioError(f"{host}: single_a_record behavior needs a residual origin_ip")
                return ZoneRecord(a=(residual,))
        # HTTP-typed fingerprint (or none): DNS keeps pointing at the edge
        return ZoneRecord(a=prov.ips)

    def serve_dns(self, name: Union[Fqdn, str]) -> DnsObservation:
        fqdn = name if isinstance(name, Fqdn) else parse_fqdn(str(name))
        text = str(fqdn)
        record = self._lookup(text)
        if record is None:
            return DnsObservation(fqdn=fqdn, rcode=Rcode.NXDOMAIN)
        if record.servfail:
            return DnsObservation(fqdn=fqdn, rcode=Rcode.SERVFAIL)
        chain: list[str] = []
        seen = {text}
        loop = False
        a_records: tuple[str, ...] = record.a
        ns = record.ns
        cursor = record
        while cursor.cname is not None and len(chain) < MAX_CHAIN:
            target = cursor.cname
            if target in seen:
                loop = True
                break
            chain.append(target)
            seen.add(target)
            nxt = self._lookup(target)
            if nxt is None or nxt.servfail:
                a_records = ()
                break
            a_records = nxt.a
            cursor = nxt
        return DnsObservation(
            fqdn=fqdn,
            cname_chain=tuple(parse_fqdn(c) for c in chain),
            ns=tuple(parse_fqdn(n) for n in ns),
            a_records=a_records,
            rcode=Rcode.NOERROR,
            cname_loop=loop,
        )

    def city_of(self, ip: str) -> Optional[str]:
        prov = self._ip_owner.get(ip)
        if prov is None:
            return None
        for addr, city in prov.ingress_ips:
            if addr == ip:
                return city
        return None

    # -- HTTP ---------------------------------------------------------------

    def _active_entry(self, prov: ScenarioProvider, host: str) -> Optional[HostEntry]:
        entry = self._registrations[prov.name].get(host)
        if entry is not None:
            return entry
        for item in prov.host_table:
            if item.host == host:
                return item
        return None

    def _select_cert(self, prov: ScenarioProvider, sni: str) -> Optional[str]:
        entry = self._active_entry(prov, sni)
        if entry is not None and entry.registered_by is RegisteredBy.LEGIT_OWNER:
            return sni
        for pattern in prov.wildcard_certs:
            base = pattern[1:]  # "*.x.y" -> ".x.y"
            if sni.endswith(base) and "." not in sni[: -len(base)]:
                return pattern
        if prov.shared_cert_name:
            return prov.shared_cert_name
        return None

    def _headers(self, prov: ScenarioProvider, ip: str, extra: tuple[tuple[str, str], ...] = ()) -> tuple:
        headers: list[tuple[str, str]] = []
        if prov.server_header and ip not in prov.degraded_ips:
            headers.append(("Server", prov.server_header))
        headers.extend(extra)
        return tuple(headers)

    def _fp_response(
        self, fp: Fingerprint, prov: ScenarioProvider, ip: str, cert: Optional[str]
    ) -> HttpResponseSummary:
        if fp.no_response:
            return HttpResponseSummary.failed(TransportFailure.TIMEOUT)
        phrase = fp.body_contains or b""
        body = b"<html><body>" + phrase + b"</body></html>"
        extra = (fp.header,) if fp.header is not None else ()
        return HttpResponseSummary.from_body(
            fp.status or 503, body, self._headers(prov, ip, extra), tls_cert_name=cert
        )

    def _origin_body(self, origin: Origin, ip: str, host: str, path: str) -> Optional[bytes]:
        if origin.per_host is not None:
            body = origin.per_host.get(host)
            if body is None:
                return None
        else:
            body = origin.body
        if origin.dynamic:
            with self._write_lock:
                key = (ip, host, path)
                count = self._fetch_counts.get(key, 0) + 1
                self._fetch_counts[key] = count
            body = body + f"<!-- fetch {count} -->".encode("ascii")
        return body

    def serve_http(self, probe: HttpProbe) -> HttpResponseSummary:
        ip = probe.target_ip
        prov = self._ip_owner.get(ip)
        if prov is None:
            origin = self.scenario.origins.get(ip)
            if origin is None:
                return HttpResponseSummary.failed(TransportFailure.CONNECT_REFUSED)
            body = self._origin_body(origin, ip, str(probe.host_header), probe.path)
            if body is None:
                return HttpResponseSummary.from_body(404, b"<html><body>unknown virtual host</body></html>")
            return HttpResponseSummary.from_body(200, body, (("Content-Type", origin.content_type),))

        cert: Optional[str] = None
        if probe.scheme is Scheme.HTTPS:
            cert = self._select_cert(prov, str(probe.sni))
            if cert is None:
                return HttpResponseSummary.failed(TransportFailure.TLS_ERROR)

        host = str(probe.host_header)
        entry = self._active_entry(prov, host)
        if entry is not None:
            proof_blocked = (
                entry.registered_by is RegisteredBy.ATTACKER
                and not entry.dns_points_here
                and prov.borrowing_policy is BorrowingPolicy.REQUIRE_DNS_PROOF
            )
            if not proof_blocked:
                if (
                    probe.scheme is Scheme.HTTPS
                    and str(probe.sni) != host
                    and prov.fronting_policy is FrontingPolicy.REJECT_ON_MISMATCH
                ):
                    return HttpResponseSummary.from_body(
                        MISMATCH_STATUS,
                        b"<html><body>421 Misdirected Request</body></html>",
                        self._headers(prov, ip),
                        tls_cert_name=cert,
                    )
                origin = self.scenario.origins.get(entry.origin_ip)
                if origin is None:
                    return HttpResponseSummary.failed(TransportFailure.CONNECT_REFUSED)
                body = self._origin_body(origin, ip, host, probe.path)
                if body is None:
                    body = origin.body
                return HttpResponseSummary.from_body(
                    200, body, self._headers(prov, ip, (("Content-Type", origin.content_type),)), tls_cert_name=cert
                )

        service = self.scenario.discontinued.get(host)
        if service is not None and service.provider == prov.name:
            profile = self.db.by_name.get(prov.name)
            fp = profile.discontinued_fp if profile is not None else None
            if fp is not None and fp.needs_http:
                return self._fp_response(fp, prov, ip, cert)

        if prov.nonhosted_override is not None:
            status, text = prov.nonhosted_override
            return HttpResponseSummary.from_body(
                status, text.encode("utf-8"), self._headers(prov, ip), tls_cert_name=cert
            )
        profile = self.db.by_name.get(prov.name)
        fp = profile.nonhosted_fp if profile is not None else None
        if fp is not None:
            return self._fp_response(fp, prov, ip, cert)
        return HttpResponseSummary.from_body(404, _GENERIC_404, self._headers(prov, ip), tls_cert_name=cert)

    # -- registration -------------------------------------------------------

    def attacker_register(
        self,
        provider_name: str,
        custom_domain: str,
        account: str,
        origin_ip: Optional[str] = None,
    ) -> str:
        """Create a CDN service for ``custom_domain`` under ``account``.

        Returns the assigned subdomain, or raises VerificationFailed when
        the provider's verification mode blocks the registration. On
        success the custom domain binds to the attacker origin at this
        provider's ingresses, and a previously dangling assigned name
        resolves again.
        """
        prov = self.scenario.provider(provider_name)
        mode = prov.verification_mode
        if mode is VerificationMode.DNS_TOKEN_CHECKED:
            record = self.scenario.zones.get(verification_record_name(custom_domain))
            expected = f".dv.{_slug(provider_name)}."
            if record is None or record.cname is None or expected not in record.cname:
                raise VerificationFailed(provider_name, mode, f"no DNS token for {custom_domain}")
        assigned = assigned_subdomain_for(prov, self.db, self.scenario.seed, custom_domain, account)
        target_origin = origin_ip or self.scenario.attacker_origin_ip
        if target_origin is None:
            raise ScenarioError("scenario has no attacker origin")
        with self._write_lock:
            self._registrations[provider_name][custom_domain] = HostEntry(
                host=custom_domain,
                origin_ip=target_origin,
                registered_by=RegisteredBy.ATTACKER,
                dns_points_here=True,
            )
            # the assigned name now serves traffic again
            self._zone_overrides[assigned] = ZoneRecord(a=prov.ips)
            old = self.scenario.zones.get(custom_domain)
            if custom_domain in self.scenario.discontinued and old is not None and old.cname:
                # W1 misconnection: the victim's old assigned name routes to
                # the edge via the fixed subdomain even though the attacker
                # was handed a different name
                self._zone_overrides[old.cname] = ZoneRecord(a=prov.ips)
        return assigned


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def scenario_to_json(scenario: Scenario) -> dict[str, Any]:
    return {
        "schema": "simnet-scenario/1",
        "seed": scenario.seed,
        "attacker_origin_ip": scenario.attacker_origin_ip,
        "providers": [
            {
                "name": p.name,
                "ingress_ips": [[ip, city] for ip, city in p.ingress_ips],
                "fronting_policy": p.fronting_policy.value,
                "borrowing_policy": p.borrowing_policy.value,
                "verification_mode": p.verification_mode.value,
                "assigned_subdomain_rule": p.assigned_subdomain_rule,
                "shared_cert_name": p.shared_cert_name,
                "wildcard_certs": list(p.wildcard_certs),
                "server_header": p.server_header,
                "degraded_ips": sorted(p.degraded_ips),
                "nonhosted_override": (
                    {"status": p.nonhosted_override[0], "body": p.nonhosted_override[1]}
                    if p.nonhosted_override
                    else None
                ),
                "host_table": [
                    {
                        "host": h.host,
                        "origin_ip": h.origin_ip,
                        "registered_by": h.registered_by.value,
                        "dns_points_here": h.dns_points_here,
                    }
                    for h in p.host_table
                ],
            }
            for p in scenario.providers
        ],
        "zones": {
            name: {
                "cname": rec.cname,
                "a": list(rec.a),
                "ns": list(rec.ns),
                "servfail": rec.servfail,
                "external": rec.external,
            }
            for name, rec in sorted(scenario.zones.items())
        },
        "origins": {
            ip: {
                "body": origin.body.decode("utf-8"),
                "per_host": (
                    {host: body.decode("utf-8") for host, body in sorted(origin.per_host.items())}
                    if origin.per_host is not None
                    else None
                ),
                "dynamic": origin.dynamic,
                "content_type": origin.content_type,
            }
            for ip, origin in sorted(scenario.origins.items())
        },
        "discontinued_hosts": {
            host: {"provider": svc.provider, "origin_ip": svc.origin_ip}
            for host, svc in sorted(scenario.discontinued.items())
        },
    }


def scenario_from_json(data: dict[str, Any]) -> Scenario:
    try:
        providers = []
        for raw in data["providers"]:
            providers.append(
                ScenarioProvider(
                    name=raw["name"],
                    ingress_ips=tuple((ip, city) for ip, city in raw["ingress_ips"]),
                    fronting_policy=FrontingPolicy(raw.get("fronting_policy", "reject_on_mismatch")),
                    borrowing_policy=BorrowingPolicy(raw.get("borrowing_policy", "require_dns_proof")),
                    verification_mode=VerificationMode(raw.get("verification_mode", "dns_token_checked")),
                    host_table=tuple(
                        HostEntry(
                            host=h["host"],
                            origin_ip=h["origin_ip"],
                            registered_by=RegisteredBy(h.get("registered_by", "legit")),
                            dns_points_here=bool(h.get("dns_points_here", True)),
                        )
                        for h in raw.get("host_table", [])
                    ),
                    assigned_subdomain_rule=raw.get("assigned_subdomain_rule", "random"),
                    shared_cert_name=raw.get("shared_cert_name"),
                    wildcard_certs=tuple(raw.get("wildcard_certs", [])),
                    server_header=raw.get("server_header"),
                    degraded_ips=frozenset(raw.get("degraded_ips", [])),
                    nonhosted_override=(
                        (raw["nonhosted_override"]["status"], raw["nonhosted_override"]["body"])
                        if raw.get("nonhosted_override")
                        else None
                    ),
                )
            )
        zones = {
            name: ZoneRecord(
                cname=rec.get("cname"),
                a=tuple(rec.get("a", [])),
                ns=tuple(rec.get("ns", [])),
                servfail=bool(rec.get("servfail", False)),
                external=bool(rec.get("external", False)),
            )
            for name, rec in data.get("zones", {}).items()
        }
        origins = {
            ip: Origin(
                body=raw["body"].encode("utf-8"),
                per_host=(
                    {host: body.encode("utf-8") for host, body in raw["per_host"].items()}
                    if raw.get("per_host") is not None
                    else None
                ),
                dynamic=bool(raw.get("dynamic", False)),
                content_type=raw.get("content_type", "text/html"),
            )
            for ip, raw in data.get("origins", {}).items()
        }
        discontinued = {
            host: DiscontinuedService(provider=raw["provider"], origin_ip=raw.get("origin_ip"))
            for host, raw in data.get("discontinued_hosts", {}).items()
        }
    except (KeyError, TypeError, ValueError) as err:
        raise ScenarioError(f"bad scenario document: {err}")
    return Scenario(
        providers=providers,
        zones=zones,
        origins=origins,
        discontinued=discontinued,
        seed=int(data.get("seed", 0)),
        attacker_origin_ip=data.get("attacker_origin_ip"),
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path}: not valid JSON: {err}")
    return scenario_from_json(data)


def validate_scenario(scenario: Scenario, db: ProviderDb) -> list[str]:
    """Cross-checks beyond what construction enforces; returns problems."""
    problems: list[str] = []
    seen_names = set()
    for prov in scenario.providers:
        if prov.name in seen_names:
            problems.append(f"duplicate scenario provider {prov.name}")
        seen_names.add(prov.name)
        if prov.name not in db.by_name:
            problems.append(f"scenario provider {prov.name} missing from provider DB")
        for entry in prov.host_table:
            if entry.host in scenario.discontinued:
                problems.append(f"{prov.name}: {entry.host} is both active and discontinued")
            if entry.origin_ip not in scenario.origins:
                problems.append(f"{prov.name}: host {entry.host} origin {entry.origin_ip} not in origins")
    dangling_targets = set()
    for host, svc in scenario.discontinued.items():
        if svc.provider not in seen_names:
            problems.append(f"discontinued host {host}: unknown provider {svc.provider}")
        record = scenario.zones.get(host)
        if record is not None and record.cname:
            dangling_targets.add(record.cname)
    suffixes = list(db.suffix_index)
    for name, record in scenario.zones.items():
        if record.cname is None or record.external:
            continue
        target = record.cname
        if target in scenario.zones or target in dangling_targets:
            continue
        if any(target.endswith(suffix) for suffix in suffixes):
            continue
        problems.append(f"zone {name}: cname target {target} is unresolvable and not marked external")
    if scenario.attacker_origin_ip is not None and scenario.attacker_origin_ip not in scenario.origins:
        problems.append(f"attacker origin {scenario.attacker_origin_ip} not in origins")
    return problems
