"""
Scan reports: a versioned JSON document with per-provider and per-domain
sections, self-consistent counters, deterministic ordering, and a diff
operation for periodic monitoring (the prior report file is the entire
scan state; no database involved).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

SCHEMA = "dvahunter-report/1"

PROVIDER_CATEGORIES = ("fronting", "borrowing", "takeover")


class IncompatibleRuns(ValueError):
    """Reports built against different provider DBs cannot be diffed."""


class CounterMismatch(ValueError):
    """Stored counters disagree with a recomputation from the sections."""


@dataclass
class ScanReport:
    meta: dict[str, Any] = field(default_factory=dict)
    providers: dict[str, dict[str, Any]] = field(default_factory=dict)
    domains: dict[str, dict[str, Any]] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)

    def recompute_counters(self) -> dict[str, int]:
        counters = {
            "providers_scanned": len(self.providers),
            "domains_scanned": len(self.domains),
            "domains_hosted": sum(1 for d in self.domains.values() if d.get("provider")),
            "domains_dangling": sum(1 for d in self.domains.values() if d.get("dangling")),
            "domains_borrowed": sum(1 for d in self.domains.values() if d.get("borrowed_at")),
            "domains_origin_exposed": sum(
                1 for d in self.domains.values()
                if (d.get("exposure") or {}).get("kind") == "vulnerable"
            ),
        }
        for category in PROVIDER_CATEGORIES:
            for outcome in ("vulnerable", "not_vulnerable", "inconclusive"):
                counters[f"{category}_{outcome}"] = sum(
                    1
                    for p in self.providers.values()
                    if (p.get(category) or {}).get("kind") == outcome
                )
        return counters

    def finalize(self) -> "ScanReport":
        self.counters = self.recompute_counters()
        return self

    def verify_counters(self) -> None:
        fresh = self.recompute_counters()
        if fresh != self.counters:
            drift = {k: (self.counters.get(k), v) for k, v in fresh.items() if self.counters.get(k) != v}
            raise CounterMismatch(f"stored counters disagree with sections: {drift}")

    def to_json(self) -> dict[str, Any]:
        self.verify_counters()
        return {
            "schema": SCHEMA,
            "meta": self.meta,
            "counters": dict(sorted(self.counters.items())),
            "providers": {name: self.providers[name] for name in sorted(self.providers)},
            "domains": {name: self.domains[name] for name in sorted(self.domains)},
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ScanReport":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema: {data.get('schema')!r}")
        return cls(
            meta=data.get("meta", {}),
            providers=data.get("providers", {}),
            domains=data.get("domains", {}),
            counters=data.get("counters", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScanReport":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def has_findings(self) -> bool:
        for category in PROVIDER_CATEGORIES:
            if self.counters.get(f"{category}_vulnerable", 0):
                return True
        return bool(
            self.counters.get("domains_dangling", 0)
            or self.counters.get("domains_borrowed", 0)
            or self.counters.get("domains_origin_exposed", 0)
        )

    # -- renderings ----------------------------------------------------------

    def to_text(self) -> str:
        lines = [
            "dvahunter scan report",
            f"  generated: {self.meta.get('generated_at')}  seed: {self.meta.get('seed')}  "
            f"backend: {self.meta.get('backend')}  mode: {self.meta.get('mode')}",
            f"  provider db: {self.meta.get('provider_db_sha1', '')[:12]}  "
            f"suffix snapshot: {self.meta.get('suffix_snapshot_date')}",
            "",
            "providers "
            + " ".join(
                f"{cat}:{self.counters.get(f'{cat}_vulnerable', 0)}/{self.counters.get('providers_scanned', 0)}"
                for cat in PROVIDER_CATEGORIES
            ),
        ]
        for name in sorted(self.providers):
            section = self.providers[name]
            cells = []
            for category in PROVIDER_CATEGORIES:
                verdict = section.get(category)
                cells.append(f"{category}={verdict['kind'] if verdict else '-'}")
            lines.append(f"  {name:<16} {' '.join(cells)}")
        flagged = [
            (name, d) for name, d in sorted(self.domains.items())
            if d.get("dangling") or d.get("borrowed_at") or (d.get("exposure") or {}).get("kind") == "vulnerable"
        ]
        lines.append("")
        lines.append(f"flagged domains ({len(flagged)}):")
        for name, d in flagged:
            marks = []
            if d.get("dangling"):
                marks.append("dangling")
                marks.extend(p["kind"] for p in d.get("takeover_paths", []))
            if d.get("borrowed_at"):
                marks.append(f"borrowed@{len(d['borrowed_at'])}")
            if (d.get("exposure") or {}).get("kind") == "vulnerable":
                marks.append("origin-exposed")
            lines.append(f"  {name:<40} {', '.join(marks)}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["fqdn", "rcode", "provider", "matched_suffix", "recheck", "dangling_fp",
             "takeover_paths", "borrowed_at", "tls_borrowing", "origin_exposed"]
        )
        for name in sorted(self.domains):
            d = self.domains[name]
            dangling = d.get("dangling") or {}
            writer.writerow([
                name,
                d.get("rcode", ""),
                d.get("provider", ""),
                d.get("matched_suffix", ""),
                d.get("recheck", ""),
                dangling.get("matched_fp", ""),
                ";".join(p["kind"] for p in d.get("takeover_paths", [])),
                ";".join(sorted(d.get("borrowed_at", []))),
                ";".join(f"{prov}:{tls}" for prov, tls in sorted(d.get("tls_borrowing_by_provider", {}).items())),
                (d.get("exposure") or {}).get("kind", ""),
            ])
        return buf.getvalue()


def diff_reports(prev: ScanReport, nxt: ScanReport) -> dict[str, Any]:
    """Changes between two runs of the same provider DB: providers newly
    vulnerable / newly fixed per category, domains newly dangling /
    resolved."""
    prev_hash = prev.meta.get("provider_db_sha1")
    next_hash = nxt.meta.get("provider_db_sha1")
    if prev_hash != next_hash:
        raise IncompatibleRuns(f"provider DB changed between runs: {prev_hash} -> {next_hash}")
    out: dict[str, Any] = {
        "newly_vulnerable": {},
        "newly_fixed": {},
        "newly_dangling": [],
        "resolved_dangling": [],
    }
    for category in PROVIDER_CATEGORIES:
        turned, fixed = [], []
        names = set(prev.providers) | set(nxt.providers)
        for name in sorted(names):
            before = ((prev.providers.get(name) or {}).get(category) or {}).get("kind")
            after = ((nxt.providers.get(name) or {}).get(category) or {}).get("kind")
            if after == "vulnerable" and before != "vulnerable":
                turned.append(name)
            if before == "vulnerable" and after != "vulnerable":
                fixed.append(name)
        if turned:
            out["newly_vulnerable"][category] = turned
        if fixed:
            out["newly_fixed"][category] = fixed
    prev_dangling = {n for n, d in prev.domains.items() if d.get("dangling")}
    next_dangling = {n for n, d in nxt.domains.items() if d.get("dangling")}
    out["newly_dangling"] = sorted(next_dangling - prev_dangling)
    out["resolved_dangling"] = sorted(prev_dangling - next_dangling)
    out["empty"] = not (
        out["newly_vulnerable"] or out["newly_fixed"] or out["newly_dangling"] or out["resolved_dangling"]
    )
    return out
