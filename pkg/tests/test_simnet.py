import json

import pytest

from dvahunter.core import HttpProbe, Rcode, Scheme, TransportFailure, parse_fqdn
from dvahunter.simnet import (
    BorrowingPolicy,
    DiscontinuedService,
    FrontingPolicy,
    HostEntry,
    Origin,
    RegisteredBy,
    Scenario,
    ScenarioProvider,
    SimulatedInternet,
    VerificationFailed,
    VerificationMode,
    ZoneRecord,
    load_scenario,
    scenario_to_json,
    scenario_from_json,
    validate_scenario,
)
from dvahunter.worlds import build_reference_world


def probe(ip, host, sni=None, scheme=Scheme.HTTPS, path="/"):
    return HttpProbe(
        target_ip=ip,
        scheme=scheme,
        host_header=parse_fqdn(host),
        sni=parse_fqdn(sni) if sni else None,
        path=path,
    )


@pytest.fixture(scope="module")
def world(db):
    return build_reference_world(db)


@pytest.fixture()
def net(world, db):
    return SimulatedInternet(world.scenario, db)


def ingress_of(world, name):
    return world.scenario.provider(name).ips[0]


class TestServeDns:
    def test_discontinued_gcore_servfails(self, net):
        obs = net.serve_dns("legacy.gcore-retired.net")
        target = obs.cname_chain[-1]
        assert net.serve_dns(target).rcode is Rcode.SERVFAIL

    def test_discontinued_kuaikuai_resolves_to_loopback(self, net):
        obs = net.serve_dns("promo.kkshift-shop.com")
        assert obs.a_records == ("127.0.0.1",)

    def test_live_host_resolves_through_chain(self, world, net):
        obs = net.serve_dns("www.fastly-site-a.com")
        assert obs.rcode is Rcode.NOERROR
        assert obs.a_records == world.scenario.provider("Fastly").ips

    def test_wildcard_zone_entries(self, db):
        zones = {
            "*.wild.com": ZoneRecord(a=("1.2.3.4",)),
            "www.wild.com": ZoneRecord(a=("5.6.7.8",)),
        }
        net = SimulatedInternet(Scenario(providers=[], zones=zones), db)
        assert net.serve_dns("anything.wild.com").a_records == ("1.2.3.4",)
        assert net.serve_dns("www.wild.com").a_records == ("5.6.7.8",)
        assert net.serve_dns("a.b.wild.com").a_records == ("1.2.3.4",)


class TestServeHttp:
    def test_unknown_host_gets_nonhosted_fingerprint(self, world, net):
        response = net.serve_http(probe(ingress_of(world, "Fastly"), "nosuch.example.org",
                                        sni="nosuch.example.org"))
        assert response.status == 500
        assert b"Fastly error: unknown domain" in response.body_excerpt

    def test_fronting_vulnerable_routes_by_host(self, world, net):
        ip = ingress_of(world, "Fastly")
        own = net.serve_http(probe(ip, "www.fastly-site-b.com", sni="www.fastly-site-b.com"))
        fronted = net.serve_http(probe(ip, "www.fastly-site-b.com", sni="www.fastly-site-a.com"))
        assert fronted.status == 200
        assert fronted.body_hash == own.body_hash

    def test_secure_provider_rejects_mismatch_with_421(self, world, net):
        ip = ingress_of(world, "Tencent")
        response = net.serve_http(probe(ip, "www.tencent-site-b.com", sni="www.tencent-site-a.com"))
        assert response.status == 421

    def test_plain_http_probe_without_sni_is_served(self, world, net):
        response = net.serve_http(probe(ingress_of(world, "Fastly"), "www.fastly-site-a.com",
                                        scheme=Scheme.HTTP))
        assert response.status == 200

    def test_silent_provider_times_out_unknown_hosts(self, world, net):
        response = net.serve_http(probe(ingress_of(world, "CDN77"), "nosuch.example.org",
                                        scheme=Scheme.HTTP))
        assert response.failure is TransportFailure.TIMEOUT

    def test_discontinued_host_emits_http_fingerprint(self, world, net):
        response = net.serve_http(probe(ingress_of(world, "Fastly"), "legacy.fastly-retired.net",
                                        scheme=Scheme.HTTP))
        assert response.status == 500
        assert b"Fastly error: unknown domain" in response.body_excerpt

    def test_unrouted_ip_refuses_connection(self, net):
        response = net.serve_http(probe("192.0.2.254", "www.fastly-site-a.com", scheme=Scheme.HTTP))
        assert response.failure is TransportFailure.CONNECT_REFUSED

    def test_borrowed_host_served_only_where_policy_allows(self, world, net):
        served = net.serve_http(probe(ingress_of(world, "Fastly"), "pages.shared-press-kit.org",
                                      scheme=Scheme.HTTP))
        assert served.status == 200
        # Baidu requires DNS proof: the same attacker entry is never served
        refused = net.serve_http(probe(ingress_of(world, "Baidu"), "pages.shared-press-kit.org",
                                       scheme=Scheme.HTTP))
        assert refused.status != 200

    def test_tls_cert_selection(self, world, net):
        # legit host: its own name
        own = net.serve_http(probe(ingress_of(world, "Fastly"), "www.fastly-site-a.com",
                                   sni="www.fastly-site-a.com"))
        assert own.tls_cert_name == "www.fastly-site-a.com"
        # borrowed host at a shared-cert provider: the default certificate
        shared = net.serve_http(probe(ingress_of(world, "Fastly"), "pages.shared-press-kit.org",
                                      sni="pages.shared-press-kit.org"))
        assert shared.tls_cert_name == "default.fastly.ssl.net"
        # wildcard-matching provider hands out the tenant wildcard
        wild = net.serve_http(probe(ingress_of(world, "Netlify"), "pages.shared-press-kit.org",
                                    sni="pages.shared-press-kit.org"))
        assert wild.tls_cert_name == "*.shared-press-kit.org"
        # no certificate available at all: TLS failure
        bare = net.serve_http(probe(ingress_of(world, "KuoCai"), "pages.shared-press-kit.org",
                                    sni="pages.shared-press-kit.org"))
        assert bare.failure is TransportFailure.TLS_ERROR

    def test_degraded_ingress_omits_server_header(self, world, net):
        cf = world.scenario.provider("Cloudflare")
        degraded_ip = next(iter(cf.degraded_ips))
        healthy_ip = next(ip for ip in cf.ips if ip not in cf.degraded_ips)
        good = net.serve_http(probe(healthy_ip, "www.cloudflare-site-a.com", scheme=Scheme.HTTP))
        bad = net.serve_http(probe(degraded_ip, "www.cloudflare-site-a.com", scheme=Scheme.HTTP))
        assert good.header("Server") == "cloudflare"
        assert bad.header("Server") is None

    def test_dynamic_origin_changes_between_fetches(self, db):
        scenario = Scenario(
            providers=[],
            zones={"churn.example.com": ZoneRecord(a=("198.18.0.1",))},
            origins={"198.18.0.1": Origin(body=b"<html>tick</html>", dynamic=True)},
        )
        net = SimulatedInternet(scenario, db)
        first = net.serve_http(probe("198.18.0.1", "churn.example.com", scheme=Scheme.HTTP))
        second = net.serve_http(probe("198.18.0.1", "churn.example.com", scheme=Scheme.HTTP))
        assert first.body_hash != second.body_hash


class TestPolicyInvariants:
    def test_reject_on_mismatch_never_serves_foreign_body(self, world, net):
        # sweep every secure provider's hosts: sni != host never yields
        # another host's content
        for prov in world.scenario.providers:
            if prov.fronting_policy is not FrontingPolicy.REJECT_ON_MISMATCH:
                continue
            hosts = [h.host for h in prov.host_table if h.registered_by is RegisteredBy.LEGIT_OWNER]
            for host in hosts:
                for other in hosts:
                    if host == other:
                        continue
                    response = net.serve_http(probe(prov.ips[0], host, sni=other))
                    assert response.status == 421

    def test_require_dns_proof_never_serves_unproven_entries(self, world, net):
        for prov in world.scenario.providers:
            if prov.borrowing_policy is not BorrowingPolicy.REQUIRE_DNS_PROOF:
                continue
            for entry in prov.host_table:
                if entry.registered_by is RegisteredBy.ATTACKER and not entry.dns_points_here:
                    response = net.serve_http(probe(prov.ips[0], entry.host, scheme=Scheme.HTTP))
                    assert response.status != 200 or b"press kit" not in response.body_excerpt


class TestAttackerRegister:
    def test_w2_two_accounts_same_subdomain(self, net):
        first = net.attacker_register("KuoCai", "victim.domain.com", "acct-1")
        second = net.attacker_register("KuoCai", "victim.domain.com", "acct-2")
        assert first == second

    def test_account_dependence_is_exactly_the_w2_flaw(self, world, net):
        # account-independent assignment happens iff the provider runs the
        # flawed shared-random rule (template namespaces excluded: those are
        # domain-derived by design and flagged via sharing edges instead)
        for prov in world.scenario.providers:
            if prov.verification_mode in (VerificationMode.DNS_TOKEN_CHECKED,):
                continue
            if "{domain}" in prov.assigned_subdomain_rule:
                continue
            a = net.attacker_register(prov.name, "victim.domain.com", "acct-1")
            b = net.attacker_register(prov.name, "victim.domain.com", "acct-2")
            if prov.verification_mode is VerificationMode.FLAWED_SHARED_RANDOM:
                assert a == b, prov.name
            else:
                assert a != b, prov.name

    def test_dns_token_checked_rejects_without_token(self, net):
        with pytest.raises(VerificationFailed):
            net.attacker_register("Baidu", "victim.domain.com", "acct-1")

    def test_dns_token_checked_accepts_with_token(self, db, world):
        scenario = world.scenario
        scenario.zones["cdnverify.tokened.example.com"] = ZoneRecord(
            cname="token-abc.dv.baidu.example", external=True
        )
        net = SimulatedInternet(scenario, db)
        assigned = net.attacker_register("Baidu", "tokened.example.com", "acct-1")
        assert assigned.endswith(".bdydns.com")
        del scenario.zones["cdnverify.tokened.example.com"]

    def test_multicdn_template_collides_with_namespace(self, net):
        assigned = net.attacker_register("KuaikuaiCloud", "custom.com", "attacker")
        assert assigned == "custom.com.a.bdydns.com"

    def test_registration_binds_and_resurrects_dangling_name(self, world, net):
        host = "legacy.fastly-retired.net"
        before = net.serve_http(probe(ingress_of(world, "Fastly"), host, scheme=Scheme.HTTP))
        assert before.status == 500
        net.attacker_register("Fastly", host, "attacker")
        obs = net.serve_dns(host)
        assert obs.a_records == world.scenario.provider("Fastly").ips
        after = net.serve_http(probe(obs.a_records[0], host, scheme=Scheme.HTTP))
        assert after.status == 200
        assert b"staging bucket" in after.body_excerpt


class TestScenarioIo:
    def test_roundtrip_through_json(self, world, db):
        doc = scenario_to_json(world.scenario)
        clone = scenario_from_json(json.loads(json.dumps(doc)))
        assert scenario_to_json(clone) == doc
        assert not validate_scenario(clone, db)

    def test_validate_catches_unknown_provider(self, db, world):
        broken = scenario_from_json(scenario_to_json(world.scenario))
        broken.providers[0] = ScenarioProvider(
            name="NotARealCdn", ingress_ips=(("198.18.99.1", "x"),)
        )
        problems = validate_scenario(broken, db)
        assert any("NotARealCdn" in p for p in problems)

    def test_validate_catches_active_and_discontinued_overlap(self, db):
        scenario = Scenario(
            providers=[ScenarioProvider(
                name="Fastly", ingress_ips=(("198.18.0.1", "x"),),
                host_table=(HostEntry(host="a.example.com", origin_ip="198.18.0.9"),),
            )],
            zones={},
            origins={"198.18.0.9": Origin(body=b"x")},
            discontinued={"a.example.com": DiscontinuedService(provider="Fastly")},
        )
        problems = validate_scenario(scenario, db)
        assert any("both active and discontinued" in p for p in problems)

    def test_committed_preset_loads_and_validates(self, db):
        from tests.conftest import DATA
        scenario = load_scenario(DATA["reference_world.json"])
        assert not validate_scenario(scenario, db)
        assert len(scenario.providers) == 45
