import pytest

from dvahunter.core import HttpProbe, Rcode, Scheme, parse_fqdn
from dvahunter.simnet import Origin, Scenario, SimulatedInternet, ZoneRecord
from dvahunter.transport import (
    RateLimiter,
    RRType,
    VirtualClock,
    build_dns_query,
    parse_dns_response,
)


@pytest.fixture()
def chain_world(db):
    zones = {
        "foo.site.com": ZoneRecord(cname="x.fastly.net"),
        "x.fastly.net": ZoneRecord(a=("10.0.0.5",)),
        "a.loop.com": ZoneRecord(cname="b.loop.com"),
        "b.loop.com": ZoneRecord(cname="a.loop.com"),
        "broken.site.com": ZoneRecord(servfail=True),
    }
    scenario = Scenario(providers=[], zones=zones, origins={"10.0.0.5": Origin(body=b"hi")})
    return SimulatedInternet(scenario, db)


class TestMockResolve:
    def test_chain_followed_to_terminal_records(self, chain_world):
        from dvahunter.transport import MockTransport
        transport = MockTransport(chain_world)
        obs = transport.resolve(parse_fqdn("foo.site.com"))
        assert [str(c) for c in obs.cname_chain] == ["x.fastly.net"]
        assert obs.a_records == ("10.0.0.5",)
        assert obs.rcode is Rcode.NOERROR

    def test_absent_name_is_nxdomain(self, chain_world):
        from dvahunter.transport import MockTransport
        obs = MockTransport(chain_world).resolve(parse_fqdn("missing.site.com"))
        assert obs.rcode is Rcode.NXDOMAIN
        assert not obs.has_records

    def test_cname_loop_truncated_and_flagged(self, chain_world):
        from dvahunter.transport import MockTransport
        obs = MockTransport(chain_world).resolve(parse_fqdn("a.loop.com"))
        assert obs.cname_loop is True
        assert [str(c) for c in obs.cname_chain] == ["b.loop.com"]
        assert obs.a_records == ()

    def test_rrtype_filtering(self, chain_world):
        from dvahunter.transport import MockTransport
        transport = MockTransport(chain_world)
        cname_only = transport.resolve(parse_fqdn("foo.site.com"), RRType.CNAME)
        assert cname_only.cname_chain and not cname_only.a_records
        ns_only = transport.resolve(parse_fqdn("foo.site.com"), RRType.NS)
        assert not ns_only.cname_chain and not ns_only.a_records

    def test_servfail_surfaces_in_rcode(self, chain_world):
        from dvahunter.transport import MockTransport
        obs = MockTransport(chain_world).resolve(parse_fqdn("broken.site.com"))
        assert obs.rcode is Rcode.SERVFAIL

    def test_https_probe_requires_sni(self, chain_world):
        from dvahunter.transport import MockTransport
        transport = MockTransport(chain_world)
        with pytest.raises(ValueError):
            transport.probe(HttpProbe(target_ip="10.0.0.5", scheme=Scheme.HTTPS,
                                      host_header=parse_fqdn("foo.site.com")))

    def test_sni_and_host_are_independent(self, chain_world):
        from dvahunter.transport import MockTransport
        transport = MockTransport(chain_world, record=True)
        transport.probe(HttpProbe(target_ip="10.0.0.5", scheme=Scheme.HTTPS,
                                  host_header=parse_fqdn("host.example.com"),
                                  sni=parse_fqdn("front.example.com")))
        sent = transport.probe_log[0].probe
        assert str(sent.sni) == "front.example.com"
        assert str(sent.host_header) == "host.example.com"

    def test_determinism_over_replay(self, chain_world, db):
        from dvahunter.transport import MockTransport
        def run():
            from dvahunter.simnet import SimulatedInternet
            transport = MockTransport(SimulatedInternet(chain_world.scenario, db))
            probes = [
                transport.resolve(parse_fqdn("foo.site.com")).to_json(),
                transport.probe(HttpProbe(target_ip="10.0.0.5", scheme=Scheme.HTTP,
                                          host_header=parse_fqdn("foo.site.com"))).to_json(),
            ]
            return probes
        assert run() == run()


class TestRateLimiter:
    def test_window_never_exceeds_qps(self):
        clock = VirtualClock()
        sent = []

        limiter = RateLimiter(5, now=clock.now, sleep=clock.sleep)
        for _ in range(23):
            limiter.acquire()
            sent.append(clock.now())
        # over any sliding 1-second window at most 5 sends happened
        for i, start in enumerate(sent):
            in_window = [t for t in sent if start <= t < start + 1.0]
            assert len(in_window) <= 5
        assert clock.now() >= (23 - 5) / 5  # had to wait for capacity

    def test_accounting_mode_never_blocks(self):
        clock = VirtualClock()
        limiter = RateLimiter(2, now=clock.now, sleep=clock.sleep, enforce=False)
        for _ in range(10):
            limiter.acquire()
        assert clock.now() == 0.0
        assert limiter.sent_in_window() == 10


class TestDnsWire:
    def test_query_roundtrip_shape(self):
        query = build_dns_query("www.example.com", 1, 0x1234)
        assert query[:2] == b"\x12\x34"
        assert b"\x03www\x07example\x03com\x00" in query

    def test_parse_answer_with_compression(self):
        # header: qid=1 flags=0x8180 qd=1 an=2
        header = b"\x00\x01\x81\x80\x00\x01\x00\x02\x00\x00\x00\x00"
        question = b"\x03www\x07example\x03com\x00" + b"\x00\x01\x00\x01"
        # answer 1: www.example.com CNAME edge.example.com (via pointer to offset 12)
        cname_rdata = b"\x04edge" + b"\xc0\x10"  # edge + pointer to example.com
        answer1 = b"\xc0\x0c" + b"\x00\x05\x00\x01\x00\x00\x00\x3c" + len(cname_rdata).to_bytes(2, "big") + cname_rdata
        # answer 2: edge.example.com A 10.0.0.5 (name pointer into answer 1 rdata)
        answer2 = b"\xc0\x2d" + b"\x00\x01\x00\x01\x00\x00\x00\x3c\x00\x04" + bytes([10, 0, 0, 5])
        rcode, answers = parse_dns_response(header + question + answer1 + answer2)
        assert rcode == 0
        assert ("www.example.com", 5, "edge.example.com") in answers
        assert ("edge.example.com", 1, "10.0.0.5") in answers

    def test_parse_rejects_short_packet(self):
        with pytest.raises(ValueError):
            parse_dns_response(b"\x00\x01")

    def test_compression_loop_detected(self):
        header = b"\x00\x01\x81\x80\x00\x00\x00\x01\x00\x00\x00\x00"
        looping = b"\xc0\x0c" + b"\x00\x01\x00\x01\x00\x00\x00\x3c\x00\x04" + bytes([1, 2, 3, 4])
        with pytest.raises(ValueError):
            parse_dns_response(header + looping)
