"""
dvahunter: a scanner for CDN domain-verification weaknesses.

Detects three exploitation surfaces over CDN-hosted domains: domain
fronting (edges that route by Host while the TLS SNI names someone
else), domain borrowing (edges serving domains whose DNS never
delegated to them), and domain takeover (dangling DNS records pointing
at terminated CDN services, including Multi-CDN shared-namespace
claims), plus a residual-resolution origin-exposure check.

Everything runs against either live sockets or a deterministic
in-process simulated internet; the simulated backend is the ground
truth the test suite verifies against.
"""

from .core import (
    DnsObservation,
    DomainSyntaxError,
    DomainTooLongError,
    Evidence,
    Fqdn,
    HttpProbe,
    HttpResponseSummary,
    Rcode,
    Scheme,
    TransportFailure,
    Verdict,
    VerdictKind,
    parse_fqdn,
    sha1_body,
)
from .providers import (
    CdnMatch,
    Fingerprint,
    ProviderDb,
    ProviderProfile,
    identify_cdn,
    load_provider_db,
    match_fingerprint,
)
from .psl import PublicSuffixList
from .report import ScanReport, diff_reports
from .scan import ScanConfig, run_scan
from .simnet import Scenario, SimulatedInternet, load_scenario, validate_scenario
from .transport import Backend, LiveTransport, MockTransport, TransportConfig

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "CdnMatch",
    "DnsObservation",
    "DomainSyntaxError",
    "DomainTooLongError",
    "Evidence",
    "Fingerprint",
    "Fqdn",
    "HttpProbe",
    "HttpResponseSummary",
    "LiveTransport",
    "MockTransport",
    "ProviderDb",
    "ProviderProfile",
    "PublicSuffixList",
    "Rcode",
    "ScanConfig",
    "ScanReport",
    "Scenario",
    "Scheme",
    "SimulatedInternet",
    "TransportConfig",
    "TransportFailure",
    "Verdict",
    "VerdictKind",
    "diff_reports",
    "identify_cdn",
    "load_provider_db",
    "load_scenario",
    "match_fingerprint",
    "parse_fqdn",
    "run_scan",
    "sha1_body",
    "validate_scenario",
]
