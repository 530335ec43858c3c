"""
The scan orchestrator: enumerate -> crawl -> discover hosted -> collect
ingress -> per-mode detection -> report. Partial failures degrade to
Inconclusive entries; nothing aborts the run after configuration checks
pass.

Mode phases run in the order fronting, borrowing, exposure, takeover.
Takeover goes last because mock-mode path validation registers attacker
services and therefore mutates the simulated world.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

from . import borrowing as borrowing_mod
from . import fronting as fronting_mod
from . import takeover as takeover_mod
from .checker import (
    HostedDomainRecord,
    IngressNodeSet,
    Recheck,
    collect_ingress,
    crawl_records,
    discover_hosted,
)
from .core import DomainSyntaxError, Evidence, Fqdn, Rcode, Verdict, VerdictKind, derive_rng, parse_fqdn
from .crawler import PrefixDictionary, enumerate_subdomains
from .providers import DnsSignalKind, ProviderDb, identify_cdn, load_provider_db
from .psl import PublicSuffixList
from .report import ScanReport
from .simnet import SimulatedInternet, load_scenario, validate_scenario
from .transport import Backend, RRType, TransportConfig, make_transport

logger = logging.getLogger(__name__)

MODES = ("all", "fronting", "borrowing", "takeover", "exposure")


class ConfigError(Exception):
    """Raised before any network activity when the configuration is unusable."""


@dataclass
class ScanConfig:
    targets: Path
    providers: Path
    suffixes: Path
    dictionary: Path
    mode: str = "all"
    backend: Backend = Backend.MOCK
    scenario: Optional[Path] = None
    resolver: Optional[str] = None
    qps: float = 20.0
    seed: int = 0
    geoip: Optional[Path] = None
    out: Optional[Path] = None
    shards: int = 1
    workers: int = 1
    verify_tls: bool = False
    record_probes: bool = False


@dataclass
class ScanContext:
    config: ScanConfig
    psl: PublicSuffixList
    db: ProviderDb
    dictionary: PrefixDictionary
    transport: Any
    simnet: Optional[SimulatedInternet]
    geo: Callable[[str], Optional[str]]
    report: ScanReport
    hosted: list[HostedDomainRecord] = field(default_factory=list)
    ingress: dict[str, IngressNodeSet] = field(default_factory=dict)
    observations: dict[str, Any] = field(default_factory=dict)
    nonhosted: list[Fqdn] = field(default_factory=list)


def _sha1_file(path: Path) -> str:
    return hashlib.sha1(path.read_bytes()).hexdigest()


def _load_geo(path: Optional[Path]) -> Callable[[str], Optional[str]]:
    if path is None:
        return lambda ip: None
    table = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        ip, _, city = line.partition(",")
        table[ip.strip()] = city.strip() or None
    return lambda ip: table.get(ip)


def _verdict_json(verdict: Verdict) -> dict[str, Any]:
    return verdict.to_json()


def prepare(config: ScanConfig) -> ScanContext:
    if config.mode not in MODES:
        raise ConfigError(f"unknown mode {config.mode!r}; expected one of {', '.join(MODES)}")
    for label, path in (("targets", config.targets), ("providers", config.providers),
                        ("suffixes", config.suffixes), ("dictionary", config.dictionary)):
        if not Path(path).exists():
            raise ConfigError(f"{label} file not found: {path}")
    try:
        psl = PublicSuffixList.load(config.suffixes)
        db = load_provider_db(config.providers)
        dictionary = PrefixDictionary.load(config.dictionary)
    except ValueError as err:
        raise ConfigError(str(err))

    simnet = None
    if config.backend is Backend.MOCK:
        if config.scenario is None:
            raise ConfigError("mock backend needs --scenario")
        if not Path(config.scenario).exists():
            raise ConfigError(f"scenario file not found: {config.scenario}")
        try:
            scenario = load_scenario(config.scenario)
        except ValueError as err:
            raise ConfigError(str(err))
        problems = validate_scenario(scenario, db)
        if problems:
            raise ConfigError("scenario failed validation: " + "; ".join(problems))
        simnet = SimulatedInternet(scenario, db)
        geo = simnet.city_of
    else:
        if config.resolver is None:
            raise ConfigError("live backend needs --resolver")
        geo = _load_geo(config.geoip)

    transport_config = TransportConfig(
        backend=config.backend,
        qps_limit=config.qps,
        resolver=config.resolver,
        verify_tls=config.verify_tls,
    )
    transport = make_transport(transport_config, simnet=simnet, record=config.record_probes)

    report = ScanReport()
    report.meta = {
        "generated_at": datetime.fromtimestamp(transport.now(), tz=timezone.utc).isoformat(),
        "mode": config.mode,
        "backend": config.backend.value,
        "seed": config.seed,
        "qps_limit": config.qps,
        "provider_db_sha1": _sha1_file(Path(config.providers)),
        "dictionary_sha1": _sha1_file(Path(config.dictionary)),
        "suffix_file_sha1": _sha1_file(Path(config.suffixes)),
        "suffix_snapshot_date": psl.snapshot_date,
        "scenario_sha1": _sha1_file(Path(config.scenario)) if config.scenario else None,
    }
    return ScanContext(
        config=config, psl=psl, db=db, dictionary=dictionary,
        transport=transport, simnet=simnet, geo=geo, report=report,
    )


def _load_targets(ctx: ScanContext) -> tuple[list[Fqdn], list[Fqdn]]:
    """Split the targets file into registrable domains (to enumerate) and
    direct FQDNs."""
    slds, direct = [], []
    for raw in Path(ctx.config.targets).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            fqdn = parse_fqdn(line, ctx.psl)
        except DomainSyntaxError as err:
            logger.warning("skipping malformed target %r: %s", line, err)
            continue
        if fqdn.sld == str(fqdn):
            slds.append(fqdn)
        else:
            direct.append(fqdn)
    return slds, direct


def _phase_enumerate(ctx: ScanContext) -> list[Fqdn]:
    slds, direct = _load_targets(ctx)
    confirmed: dict[str, Fqdn] = {str(f): f for f in direct}
    for sld in sorted(slds, key=str):
        result = enumerate_subdomains(
            sld, ctx.dictionary, ctx.transport, seed=ctx.config.seed, workers=ctx.config.workers
        )
        for fqdn in result.confirmed:
            confirmed.setdefault(str(fqdn), fqdn)
        if result.wildcard is not None:
            ctx.report.meta.setdefault("wildcard_slds", []).append(str(sld))
        if result.wildcard_inconclusive:
            ctx.report.meta.setdefault("wildcard_inconclusive_slds", []).append(str(sld))
    return [confirmed[name] for name in sorted(confirmed)]


def _phase_crawl(ctx: ScanContext, targets: list[Fqdn]) -> None:
    observations = crawl_records(targets, ctx.transport, shards=ctx.config.shards)
    for obs in observations:
        ctx.observations[str(obs.fqdn)] = obs
        ctx.report.domains[str(obs.fqdn)] = {"rcode": obs.rcode.value}
    ctx.hosted = discover_hosted(observations, ctx.db, ctx.transport)
    hosted_names = set()
    for record in ctx.hosted:
        hosted_names.add(str(record.fqdn))
        ctx.report.domains[str(record.fqdn)].update(
            {
                "provider": record.provider,
                "matched_suffix": record.matched_suffix,
                "matched_cname": record.matched_cname,
                "recheck": record.recheck.value,
            }
        )
    for obs in observations:
        if str(obs.fqdn) in hosted_names:
            continue
        if obs.rcode is Rcode.NOERROR and obs.has_records and identify_cdn(obs, ctx.db) is None:
            ctx.nonhosted.append(obs.fqdn)
    ctx.nonhosted.sort(key=str)


def _phase_ingress(ctx: ScanContext) -> None:
    ctx.ingress = collect_ingress(
        ctx.hosted, ctx.geo, ctx.transport, ctx.db, seed=ctx.config.seed, on_empty="skip"
    )
    for provider, nodes in sorted(ctx.ingress.items()):
        ctx.report.providers.setdefault(provider, {})["ingress"] = {
            "nodes": [[ip, city, state.value] for ip, city, state in nodes.nodes],
            "representatives": nodes.representatives,
            "liveness_is_weak": nodes.liveness_is_weak,
        }


def _provider_section(ctx: ScanContext, name: str) -> dict[str, Any]:
    return ctx.report.providers.setdefault(name, {})


def _representative(ctx: ScanContext, provider: str, purpose: str) -> Optional[str]:
    nodes = ctx.ingress.get(provider)
    if nodes is None or not nodes.representatives:
        return None
    rng = derive_rng(ctx.config.seed, purpose, provider)
    return rng.choice(sorted(nodes.representatives))


# -- fronting ----------------------------------------------------------------


def _map_providers(ctx: ScanContext, worker: Callable) -> dict[str, Any]:
    """Apply a per-provider worker, concurrently when workers > 1. Results
    come back keyed by name so report assembly stays ordered regardless of
    scheduling."""
    profiles = list(ctx.db.providers)
    if ctx.config.workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=ctx.config.workers) as pool:
            results = list(pool.map(lambda p: worker(ctx, p), profiles))
    else:
        results = [worker(ctx, p) for p in profiles]
    return {profile.name: result for profile, result in zip(profiles, results)}


def _fronting_direct(ctx: ScanContext, profile) -> Optional[Verdict]:
    """None defers the provider to sharing-edge derivation."""
    name = profile.name
    eligible: dict[Fqdn, HostedDomainRecord] = {}
    for record in ctx.hosted:
        if record.provider != name or record.recheck is Recheck.REFUTED_BY_FINGERPRINT:
            continue
        if not record.observation.a_records:
            continue
        eligible.setdefault(record.fqdn, record)
    rep = _representative(ctx, name, "fronting-ingress")
    if len(eligible) < 2 or rep is None:
        if profile.shares_infra_of:
            return None
        return Verdict.inconclusive(
            (Evidence("fronting", f"{len(eligible)} usable hosted domain(s), no pairing possible"),)
        )
    rng = derive_rng(ctx.config.seed, "fronting-domains", name)
    domains = sorted(eligible, key=str)
    if len(domains) > fronting_mod.MAX_DOMAINS_PER_PROVIDER:
        domains = sorted(rng.sample(domains, fronting_mod.MAX_DOMAINS_PER_PROVIDER), key=str)
    urls_by_domain: dict[Fqdn, list] = {}
    for domain in domains:
        try:
            urls_by_domain[domain] = fronting_mod.harvest_urls(
                domain, rep, ctx.transport, seed=ctx.config.seed
            )
        except fronting_mod.RootFetchFailed as err:
            logger.info("harvest failed: %s", err)
            urls_by_domain[domain] = []
    try:
        tuples = fronting_mod.generate_tuples(name, urls_by_domain, rep, seed=ctx.config.seed)
    except fronting_mod.InsufficientDomains as err:
        return Verdict.inconclusive((Evidence("fronting", str(err)),))
    # the three steps inside one tuple stay strictly sequential
    verdicts = [fronting_mod.judge_tuple(fronting_mod.run_tuple(t, ctx.transport)) for t in tuples]
    return fronting_mod.judge_provider(verdicts)


def _phase_fronting(ctx: ScanContext) -> None:
    results = _map_providers(ctx, _fronting_direct)
    direct: dict[str, Verdict] = {}
    for profile in ctx.db.providers:
        verdict = results[profile.name]
        if verdict is None:
            continue
        _provider_section(ctx, profile.name)["fronting"] = _verdict_json(verdict)
        direct[profile.name] = verdict

    # providers with no hosted surface of their own inherit through the
    # infrastructure they share (a Multi-CDN fronts whatever its carriers front)
    for profile in ctx.db.providers:
        name = profile.name
        if name in direct or not profile.shares_infra_of:
            continue
        section = _provider_section(ctx, name)
        kinds = []
        notes = []
        for edge in profile.shares_infra_of:
            target = direct.get(edge.provider)
            if target is None:
                continue
            kinds.append(target.kind)
            notes.append(f"{edge.provider}:{target.kind.value}")
        if VerdictKind.VULNERABLE in kinds:
            verdict = Verdict.vulnerable(
                (Evidence("fronting-via-edge", "vulnerable through shared infrastructure: " + ", ".join(notes)),)
            )
        elif kinds and all(k is VerdictKind.NOT_VULNERABLE for k in kinds):
            verdict = Verdict.not_vulnerable(
                (Evidence("fronting-via-edge", "all shared infrastructure rejects mismatches"),)
            )
        else:
            verdict = Verdict.inconclusive(
                (Evidence("fronting-via-edge", "shared-infrastructure verdicts undetermined"),)
            )
        section["fronting"] = _verdict_json(verdict)
        section.setdefault("notes", []).append(
            "fronting verdict derived via infrastructure-sharing edges: " + ", ".join(notes)
        )

    # annotate certificate-level sharing edges on directly-tested providers
    for profile in ctx.db.providers:
        if profile.name in direct and profile.shares_infra_of:
            section = _provider_section(ctx, profile.name)
            for edge in profile.shares_infra_of:
                section.setdefault("notes", []).append(
                    f"shares infrastructure of {edge.provider}" + (f" ({edge.note})" if edge.note else "")
                )


# -- borrowing ----------------------------------------------------------------


def _borrowing_for_provider(ctx: ScanContext, profile):
    """(verdict, baseline | None, hits, loud_note | None); candidates for one
    provider run sequentially, providers may run in parallel."""
    name = profile.name
    if profile.nonhosted_fp is None:
        verdict = Verdict.inconclusive(
            (Evidence("borrowing", "no non-hosted fingerprint for this provider; skipped"),)
        )
        return verdict, None, [], None
    rep = _representative(ctx, name, "borrowing-ingress")
    if rep is None:
        return (
            Verdict.inconclusive((Evidence("borrowing", "no live ingress representative"),)),
            None, [], None,
        )
    try:
        baseline = borrowing_mod.probe_baseline(profile, rep, ctx.transport, seed=ctx.config.seed)
    except borrowing_mod.BaselineMismatch as err:
        verdict = Verdict.inconclusive((Evidence("baseline-mismatch", str(err)),))
        return verdict, None, [], f"BASELINE MISMATCH, provider excluded: {err}"
    candidates = borrowing_mod.find_borrowing(ctx.nonhosted, profile, rep, ctx.transport, db=ctx.db)
    hits = []
    kinds = []
    for candidate in candidates:
        kinds.append(candidate.verdict.kind)
        if candidate.verdict.kind is not VerdictKind.VULNERABLE:
            continue
        tls = borrowing_mod.classify_borrowing_tls(candidate, ctx.transport)
        hits.append((candidate, tls))
    if hits:
        verdict = Verdict.vulnerable(
            tuple(e for candidate, _tls in hits for e in candidate.verdict.evidence)
        )
    elif VerdictKind.NOT_VULNERABLE in kinds:
        verdict = Verdict.not_vulnerable(
            (Evidence("borrowing", f"{len(candidates)} candidate(s) all matched the non-hosted fingerprint"),)
        )
    else:
        verdict = Verdict.inconclusive(
            (Evidence("borrowing", "no candidate produced a definitive answer"),)
        )
    return verdict, baseline, hits, None


def _phase_borrowing(ctx: ScanContext) -> None:
    results = _map_providers(ctx, _borrowing_for_provider)
    for profile in ctx.db.providers:
        name = profile.name
        verdict, baseline, hits, note = results[name]
        section = _provider_section(ctx, name)
        section["borrowing"] = _verdict_json(verdict)
        if note:
            section.setdefault("notes", []).append(note)
        if baseline is not None:
            section["borrowing_baseline"] = baseline.to_json()
        if hits:
            section["borrowing_hits"] = [
                {"domain": str(candidate.domain), "tls": tls.value} for candidate, tls in hits
            ]
        for candidate, tls in hits:
            entry = ctx.report.domains.setdefault(str(candidate.domain), {"rcode": "noerror"})
            entry.setdefault("borrowed_at", []).append(name)
            entry.setdefault("tls_borrowing_by_provider", {})[name] = tls.value


# -- exposure ------------------------------------------------------------------


def _phase_exposure(ctx: ScanContext) -> None:
    for name in sorted(ctx.observations):
        obs = ctx.observations[name]
        if obs.rcode is not Rcode.NOERROR:
            continue
        if len(obs.a_records) != 1 or obs.cname_chain:
            continue
        verdict = takeover_mod.check_origin_exposure(obs.fqdn, obs, ctx.transport)
        ctx.report.domains[name]["exposure"] = _verdict_json(verdict)


# -- takeover ------------------------------------------------------------------


def _phase_takeover(ctx: ScanContext) -> None:
    register = None
    if ctx.simnet is not None:
        register = ctx.simnet.attacker_register
    vulnerable_via: dict[str, list[str]] = {}
    scanned: dict[str, int] = {}
    inconclusive_records: dict[str, int] = {}

    records = sorted(ctx.hosted, key=lambda r: str(r.fqdn))

    def detect(record):
        try:
            return takeover_mod.detect_dangling(record, ctx.transport, ctx.db)
        except (LookupError, takeover_mod.DanglingProbeFailure) as err:
            return err

    # detection probes are independent; path validation below stays
    # sequential because mock registrations mutate the world
    if ctx.config.workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=ctx.config.workers) as pool:
            detections = list(pool.map(detect, records))
    else:
        detections = [detect(record) for record in records]

    for record, outcome in zip(records, detections):
        scanned[record.provider] = scanned.get(record.provider, 0) + 1
        entry = ctx.report.domains[str(record.fqdn)]
        if isinstance(outcome, LookupError):
            entry["dangling_check"] = "inconclusive: no service-discontinued fingerprint"
            inconclusive_records[record.provider] = inconclusive_records.get(record.provider, 0) + 1
            continue
        if isinstance(outcome, takeover_mod.DanglingProbeFailure):
            entry["dangling_check"] = f"inconclusive: {outcome}"
            inconclusive_records[record.provider] = inconclusive_records.get(record.provider, 0) + 1
            continue
        finding = outcome
        if finding is None:
            entry["dangling_check"] = "healthy"
            continue
        paths = takeover_mod.enumerate_takeover_paths(
            finding, ctx.db, register=register, transport=ctx.transport
        )
        entry["dangling"] = {
            "matched_fp": finding.matched_fp,
            "stage": finding.stage.value,
            "matched_cname": finding.matched_cname,
        }
        entry["takeover_paths"] = [p.to_json() for p in paths]
        for path in paths:
            if path.validated is False:
                continue
            vulnerable_via.setdefault(path.via_provider, []).append(str(finding.fqdn))
        # residual single-A fingerprints route straight into the
        # origin-exposure check (the leaked address is the old origin)
        fp_owner = finding.matched_fp.split(":", 1)[0]
        owner_fp = ctx.db.by_name[fp_owner].discontinued_fp
        if (
            owner_fp is not None
            and owner_fp.dns_signal is not None
            and owner_fp.dns_signal.kind is DnsSignalKind.SINGLE_A_RECORD
            and record.observation.cname_chain
        ):
            terminal = ctx.transport.resolve(record.observation.cname_chain[-1], RRType.A)
            try:
                verdict = takeover_mod.check_origin_exposure(finding.fqdn, terminal, ctx.transport)
                entry["exposure"] = _verdict_json(verdict)
            except takeover_mod.ExposurePrecondition as err:
                entry["exposure_check"] = f"skipped: {err}"

    for profile in ctx.db.providers:
        name = profile.name
        section = _provider_section(ctx, name)
        if name in vulnerable_via:
            domains = sorted(set(vulnerable_via[name]))
            section["takeover"] = _verdict_json(
                Verdict.vulnerable(
                    (Evidence("takeover", f"validated takeover path(s) for: {', '.join(domains)}"),)
                )
            )
            continue
        if profile.discontinued_fp is None:
            section["takeover"] = _verdict_json(
                Verdict.inconclusive(
                    (Evidence("takeover", "no service-discontinued fingerprint for this provider"),)
                )
            )
            continue
        total = scanned.get(name, 0)
        if total == 0:
            section["takeover"] = _verdict_json(
                Verdict.inconclusive((Evidence("takeover", "no hosted domains observed"),))
            )
        elif inconclusive_records.get(name, 0) == total:
            section["takeover"] = _verdict_json(
                Verdict.inconclusive(
                    (Evidence("takeover", "every hosted record left the dangling check undecided"),)
                )
            )
        else:
            section["takeover"] = _verdict_json(
                Verdict.not_vulnerable(
                    (Evidence("takeover", "no dangling domain with a feasible takeover path"),)
                )
            )


def run_scan_with_context(config: ScanConfig) -> ScanContext:
    """run_scan, but hands back the full context (the probe/query logs on a
    recording transport feed the call-audit tests)."""
    ctx = prepare(config)
    targets = _phase_enumerate(ctx)
    _phase_crawl(ctx, targets)
    _phase_ingress(ctx)
    mode = config.mode
    if mode in ("all", "fronting"):
        _phase_fronting(ctx)
    if mode in ("all", "borrowing"):
        _phase_borrowing(ctx)
    if mode in ("all", "exposure"):
        _phase_exposure(ctx)
    if mode in ("all", "takeover"):
        _phase_takeover(ctx)
    ctx.report.finalize()
    if config.out is not None:
        ctx.report.dump(config.out)
    return ctx


def run_scan(config: ScanConfig) -> ScanReport:
    return run_scan_with_context(config).report
