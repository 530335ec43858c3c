"""
Acceptance suite: one test per release criterion, each printing a
PASS line with the measured result. Run with `pytest -s` to see them.

The simulated internet is the ground-truth oracle throughout: provider
verdicts are compared against the policies the scenario was built with,
never against the scanner's own output.
"""

import itertools
import random
import time

import pytest

from dvahunter.core import (
    HttpResponseSummary,
    Rcode,
    TransportFailure,
    VerdictKind,
    parse_fqdn,
    sha1_body,
)
from dvahunter.crawler import PrefixDictionary, WildcardSignature, enumerate_subdomains
from dvahunter.fronting import FrontingTuple, HarvestedUrl, UrlKind, harvest_urls, judge_tuple
from dvahunter.providers import DnsSignalKind, match_fingerprint
from dvahunter.report import ScanReport
from dvahunter.scan import run_scan, run_scan_with_context
from dvahunter.simnet import Scenario, SimulatedInternet, ZoneRecord
from dvahunter.transport import MockTransport
from dvahunter.worlds import (
    build_budget_world,
    build_dangling_world,
    build_exposure_world,
    build_reference_world,
    reference_flags,
)
from tests.conftest import DATA, scan_config, write_world
from tests.test_core import reference_sha1


def announce(number: int, message: str) -> None:
    print(f"\nACCEPTANCE {number} PASS: {message}")


# -- 1. reference-world equivalence ------------------------------------------------

def test_acceptance_1_reference_world_equivalence(db, tmp_path):
    from dvahunter.cli import main
    out = tmp_path / "reference-world-report.json"
    started = time.monotonic()
    exit_code = main([
        "scan",
        "--targets", str(DATA["reference_world_targets.txt"]),
        "--scenario", str(DATA["reference_world.json"]),
        "--mode", "all", "--backend", "mock", "--seed", "7",
        "--out", str(out),
    ])
    elapsed = time.monotonic() - started
    assert exit_code == 1  # findings present
    report = ScanReport.load(out)

    flags = reference_flags(db)
    disagreements = []
    for profile in db.providers:
        section = report.providers[profile.name]
        f = flags[profile.name]
        expected = {
            "fronting": "vulnerable" if f.fronting else "not_vulnerable",
            "borrowing": "vulnerable" if f.borrowing else (
                "not_vulnerable" if profile.nonhosted_fp else "inconclusive"
            ),
            "takeover": "vulnerable" if f.takeover else (
                "not_vulnerable" if profile.discontinued_fp else "inconclusive"
            ),
        }
        for category, want in expected.items():
            got = section[category]["kind"]
            if got != want:
                disagreements.append((profile.name, category, want, got))
    assert disagreements == []

    counters = report.counters
    assert counters["providers_scanned"] == 45
    assert counters["fronting_vulnerable"] == 40
    assert counters["borrowing_vulnerable"] == 24
    assert counters["takeover_vulnerable"] == 19
    assert elapsed < 60.0
    announce(1, f"45-provider world, 0 disagreements, counters 40/24/19, {elapsed:.1f}s")


# -- 2. fronting judge truth table ----------------------------------------------

BODY_REFERENCE = b"reference object bytes"
BODY_OTHER = b"some other content"
BODY_404 = b"<html>404 Not Found</html>"
BODY_5XX = b"<html>server error</html>"

STATES = ("2xx-match", "2xx-mismatch", "404", "5xx", "failure")


def materialize(state: str) -> HttpResponseSummary:
    if state == "2xx-match":
        return HttpResponseSummary.from_body(200, BODY_REFERENCE)
    if state == "2xx-mismatch":
        return HttpResponseSummary.from_body(200, BODY_OTHER)
    if state == "404":
        return HttpResponseSummary.from_body(404, BODY_404)
    if state == "5xx":
        return HttpResponseSummary.from_body(500, BODY_5XX)
    return HttpResponseSummary.failed(TransportFailure.TIMEOUT)


def oracle(rt, rv, rf) -> VerdictKind:
    """Independent brute-force reading of the three protocol conditions."""
    if any(r.failure is not None for r in (rt, rv, rf)):
        return VerdictKind.INCONCLUSIVE
    rt_valid = rt.status is not None and 200 <= rt.status < 300
    if not rt_valid:
        return VerdictKind.INCONCLUSIVE
    rv_matches = rv.body_hash == rt.body_hash
    rf_clears = (
        rf.status == 404
        or rf.body_hash == sha1_body(b"")
        or rf.body_hash != rt.body_hash
    )
    if rv_matches and rf_clears:
        return VerdictKind.VULNERABLE
    if not rv_matches:
        return VerdictKind.NOT_VULNERABLE
    return VerdictKind.INCONCLUSIVE


def test_acceptance_2_fronting_judge_truth_table():
    url = HarvestedUrl(domain=parse_fqdn("target.com"), path="/x.png",
                       kind=UrlKind.IMAGE, stability_hash=sha1_body(BODY_REFERENCE))
    base = FrontingTuple(fd=parse_fqdn("front.com"), td=parse_fqdn("target.com"),
                         ut=url, ingress_ip="198.18.0.1")
    from dataclasses import replace
    agreements = 0
    for s_rt, s_rv, s_rf in itertools.product(STATES, repeat=3):
        rt, rv, rf = materialize(s_rt), materialize(s_rv), materialize(s_rf)
        verdict = judge_tuple(replace(base, rt=rt, rv=rv, rf=rf))
        expected = oracle(rt, rv, rf)
        assert verdict.kind is expected, (s_rt, s_rv, s_rf)
        agreements += 1
    assert agreements == 125
    announce(2, "125/125 (rt, rv, rf) states agree with the brute-force oracle")


# -- 3. fingerprint corpus -------------------------------------------------------

def synthetic_pair(fp):
    """(positive, negative) evidence for one fingerprint."""
    if fp.no_response:
        return (
            {"http": HttpResponseSummary.failed(TransportFailure.TIMEOUT)},
            {"http": HttpResponseSummary.from_body(200, b"healthy page")},
        )
    if fp.dns_signal is not None:
        kind = fp.dns_signal.kind
        name = parse_fqdn("probe.example.com")
        from dvahunter.core import DnsObservation
        if kind is DnsSignalKind.NXDOMAIN:
            pos = DnsObservation(fqdn=name, rcode=Rcode.NXDOMAIN)
        elif kind is DnsSignalKind.SERVFAIL:
            pos = DnsObservation(fqdn=name, rcode=Rcode.SERVFAIL)
        elif kind is DnsSignalKind.RESOLVES_TO:
            pos = DnsObservation(fqdn=name, a_records=(fp.dns_signal.ip,))
        else:  # single A record only
            pos = DnsObservation(fqdn=name, a_records=("198.18.200.1",))
        neg = DnsObservation(fqdn=name, a_records=("198.18.200.1", "198.18.200.2"))
        return {"dns": pos}, {"dns": neg}
    headers = [fp.header] if fp.header is not None else []
    body = b"<html><body>" + (fp.body_contains or b"") + b"</body></html>"
    positive = HttpResponseSummary.from_body(fp.status or 200, body, headers)
    negative = HttpResponseSummary.from_body(418, b"<html>nothing of note</html>", [("Server", "generic")])
    return {"http": positive}, {"http": negative}


def test_acceptance_3_fingerprint_corpus(db):
    checked = {"nonhosted": 0, "discontinued": 0}
    for profile in db.providers:
        for family, fp in (("nonhosted", profile.nonhosted_fp), ("discontinued", profile.discontinued_fp)):
            if fp is None:
                continue
            positive, negative = synthetic_pair(fp)
            assert match_fingerprint(fp, **positive) is True, fp.id
            assert match_fingerprint(fp, **negative) is False, fp.id
            checked[family] += 1
    assert checked == {"nonhosted": 24, "discontinued": 19}
    announce(3, "43 fingerprints: 100% on synthetic positives and negatives")


# -- 4. dangling detection recall/precision --------------------------------------

@pytest.mark.parametrize("k", [0, 7, 50])
def test_acceptance_4_dangling_detection(db, tmp_path, k):
    world = build_dangling_world(db, hosted_per_provider=10, discontinued_count=k)
    scenario_path, targets_path = write_world(tmp_path, world, f"dangling-{k}")
    report = run_scan(scan_config(targets_path, scenario_path, mode="takeover"))

    fingerprinted = {h for h, svc in world.scenario.discontinued.items() if svc.provider != "Akamai"}
    flagged = {name for name, d in report.domains.items() if d.get("dangling")}
    missed = fingerprinted - flagged
    false_positives = flagged - fingerprinted
    assert missed == set()
    assert false_positives == set()
    assert len(flagged) == k

    akamai = report.providers["Akamai"]["takeover"]["kind"]
    assert akamai == "inconclusive"
    akamai_dangler = [d for d in report.domains.values()
                      if str(d.get("dangling_check", "")).startswith("inconclusive")]
    assert akamai_dangler, "fingerprint-less provider must surface as inconclusive"
    announce(4, f"k={k}: found exactly {len(flagged)}, precision=recall=1.0, N/A provider inconclusive")


# -- 5. W1 / W2 / Multi-CDN takeover paths ----------------------------------------

def test_acceptance_5_takeover_path_kinds(db):
    world = build_reference_world(db)
    net = SimulatedInternet(world.scenario, db)
    report = run_scan(scan_config(DATA["reference_world_targets.txt"], DATA["reference_world.json"], mode="takeover"))

    def paths_of(domain):
        return [(p["kind"], p["via_provider"], p["validated"]) for p in report.domains[domain]["takeover_paths"]]

    assert paths_of("legacy.edgio-retired.net") == [("flawed_w1", "Edgio", True)]
    assert paths_of("legacy.cachefly-retired.net") == [("flawed_w1", "Cachefly", True)]
    assert paths_of("legacy.kuocai-retired.net") == [("flawed_w2", "KuoCai", True)]
    assert paths_of("legacy.yundun-retired.net") == [("flawed_w2", "Yundun", True)]
    assert paths_of("promo.kkshift-shop.com") == [("multi_cdn_shared_cname", "KuaikuaiCloud", True)]

    # W2 property: two accounts receive the identical assigned name
    for provider, domain in (("KuoCai", "legacy.kuocai-retired.net"),
                             ("Yundun", "legacy.yundun-retired.net")):
        first = net.attacker_register(provider, domain, "account-one")
        second = net.attacker_register(provider, domain, "account-two")
        assert first == second
    announce(5, "W1/W2/shared-CNAME paths exact, all registration-validated, W2 account-independent")


# -- 6. fronting budget compliance ------------------------------------------------

def test_acceptance_6_budget_compliance(db, tmp_path):
    world = build_budget_world(db, domains_per_provider=20, assets_per_page=30)
    scenario_path, targets_path = write_world(tmp_path, world, "budget")
    ctx = run_scan_with_context(scan_config(targets_path, scenario_path, mode="fronting", record_probes=True))

    ip_owner = {}
    for prov in world.scenario.providers:
        for ip in prov.ips:
            ip_owner[ip] = prov.name
    hosts_touched: dict[str, set] = {}
    tuples_run: dict[str, int] = {}
    urls_used: dict[tuple, set] = {}
    for entry in ctx.transport.probe_log:
        probe = entry.probe
        if probe.sni is None:
            continue  # plain-http probes belong to the checker, not the tester
        provider = ip_owner[probe.target_ip]
        hosts_touched.setdefault(provider, set()).add(str(probe.host_header))
        if str(probe.sni) != str(probe.host_header):
            tuples_run[provider] = tuples_run.get(provider, 0) + 1
            urls_used.setdefault((provider, str(probe.host_header)), set()).add(probe.path)

    assert set(hosts_touched) == {"Bunny", "Fastly"}
    for provider in ("Bunny", "Fastly"):
        assert len(hosts_touched[provider]) <= 10, hosts_touched[provider]
        assert tuples_run[provider] <= 10
        assert ctx.report.providers[provider]["fronting"]["kind"] == "vulnerable"
    for (_provider, _domain), paths in urls_used.items():
        assert len(paths) <= 10

    # per-domain harvest cap, checked directly on a 30-asset page
    net = SimulatedInternet(build_budget_world(db).scenario, db)
    domain = parse_fqdn(world.healthy_hosts[0])
    rep = world.scenario.providers[0].ips[0]
    harvested = harvest_urls(domain, rep, MockTransport(net), seed=3)
    assert len(harvested) == 10
    announce(6, "per provider: <=10 domains, <=10 tuples; per domain: <=10 harvested URLs")


# -- 7. wildcard exclusion property -----------------------------------------------

def test_acceptance_7_wildcard_exclusion(db):
    rng = random.Random(1717)
    trials = 25
    for trial in range(trials):
        sld = f"wild-{trial:02d}.com"
        wildcard_a = tuple(sorted({f"198.18.{rng.randrange(50)}.{rng.randrange(1, 200)}"
                                   for _ in range(rng.randint(1, 3))}))
        zones = {f"*.{sld}": ZoneRecord(a=wildcard_a)}
        distinct_hosts = []
        shadowed_hosts = []
        prefixes = []
        for i in range(rng.randint(1, 5)):
            prefix = f"real{i}"
            prefixes.append(prefix)
            if rng.random() < 0.5:
                zones[f"{prefix}.{sld}"] = ZoneRecord(a=(f"203.0.113.{rng.randrange(1, 200)}",))
                distinct_hosts.append(f"{prefix}.{sld}")
            else:
                zones[f"{prefix}.{sld}"] = ZoneRecord(a=wildcard_a)
                shadowed_hosts.append(f"{prefix}.{sld}")
        prefixes += [f"noise{i}" for i in range(3)]
        transport = MockTransport(SimulatedInternet(Scenario(providers=[], zones=zones), db))
        result = enumerate_subdomains(parse_fqdn(sld), PrefixDictionary.from_lines(prefixes),
                                      transport, seed=trial)
        assert result.wildcard is not None
        confirmed = {str(f) for f in result.confirmed}
        for name in confirmed:
            obs = transport.resolve(parse_fqdn(name))
            assert WildcardSignature.of(obs) != result.wildcard, name
        assert set(distinct_hosts) <= confirmed
        assert not confirmed & set(shadowed_hosts)
    announce(7, f"{trials} randomized wildcard zones: exclusion complete, distinct hosts retained")


# -- 8. origin exposure -------------------------------------------------------------

def test_acceptance_8_origin_exposure(db, tmp_path):
    world = build_exposure_world(total=40, exposed=6)
    scenario_path, targets_path = write_world(tmp_path, world, "exposure")
    report = run_scan(scan_config(targets_path, scenario_path, mode="exposure"))
    flagged = {name for name, d in report.domains.items()
               if (d.get("exposure") or {}).get("kind") == "vulnerable"}
    assert flagged == set(world.exposed_domains)
    assert len(flagged) == 6
    assert report.counters["domains_origin_exposed"] == 6
    announce(8, "40 single-A domains: exactly the 6 exposed origins flagged")


# -- 9. determinism ------------------------------------------------------------------

def test_acceptance_9_byte_identical_reports(tmp_path):
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    run_scan(scan_config(DATA["reference_world_targets.txt"], DATA["reference_world.json"], seed=99, out=first))
    run_scan(scan_config(DATA["reference_world_targets.txt"], DATA["reference_world.json"], seed=99, out=second))
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_bytes()) > 10_000
    announce(9, f"two identical-seed runs: byte-identical {first.stat().st_size}-byte reports")


# -- 10. SHA1 conformance -------------------------------------------------------------

def test_acceptance_10_sha1_conformance():
    vectors = {
        b"": "da39a3ee5e6b4b0d3255bfef95601890afd80709",
        b"abc": "a9993e364706816aba3e25717850c26c9cd0d89d",
        b"a" * 1_000_000: "34aa973cd4c4daa4f61eeb2bdbad27316534016f",
    }
    for message, expected in vectors.items():
        assert sha1_body(message).hex() == expected
        assert reference_sha1(message).hex() == expected
    announce(10, "FIPS 180 vectors bit-exact (empty, 'abc', million-'a')")
