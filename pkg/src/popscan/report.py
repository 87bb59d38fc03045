"""Summary tables over labelled pop-up records.

Per-type rows carry the pop-up count, the number of records with at least
one sneaky pattern, that count's share of all sneaky records
(``distribution_pct``), the type's share of all pop-ups (``pow_share_pct``)
and the sneaky ratio within the type (``ratio_pct``).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .classifier import PowType, SneakyPattern

TYPE_ORDER = [t.value for t in PowType]
PATTERN_ORDER = [p.value for p in SneakyPattern]


@dataclass(frozen=True)
class TypeRow:
    type: str
    pow_count: int
    sneaky_count: int
    distribution_pct: float
    pow_share_pct: float
    ratio_pct: float

    def to_dict(self) -> dict:
        return {
            "type": self.type,
            "pow_count": self.pow_count,
            "sneaky_count": self.sneaky_count,
            "distribution_pct": self.distribution_pct,
            "pow_share_pct": self.pow_share_pct,
            "ratio_pct": self.ratio_pct,
        }


@dataclass
class ClickHistogram:
    """Dismissal effort per top-level pop-up: taps needed, back, or stuck."""

    by_clicks: dict[int, int] = field(default_factory=dict)
    by_back: int = 0
    forced: int = 0

    @property
    def total(self) -> int:
        return sum(self.by_clicks.values()) + self.by_back + self.forced

    def within(self, clicks: int) -> int:
        return sum(n for c, n in self.by_clicks.items() if c <= clicks)

    def to_dict(self) -> dict:
        total = self.total
        return {
            "by_clicks": {str(k): v for k, v in sorted(self.by_clicks.items())},
            "back": self.by_back,
            "forced": self.forced,
            "total": total,
            "within_two_clicks": self.within(2),
            "within_two_clicks_pct": 100.0 * self.within(2) / total if total else 0.0,
        }


@dataclass
class SummaryReport:
    rows: list[TypeRow]
    histogram: ClickHistogram
    pattern_counts: dict[str, int]
    stats: dict
    low_confidence: int = 0

    @property
    def total_pows(self) -> int:
        return sum(r.pow_count for r in self.rows)

    @property
    def total_sneaky(self) -> int:
        return sum(r.sneaky_count for r in self.rows)

    def to_dict(self) -> dict:
        total, sneaky = self.total_pows, self.total_sneaky
        return {
            "schema_version": 1,
            "rows": [r.to_dict() for r in self.rows],
            "totals": {
                "pow_count": total,
                "sneaky_count": sneaky,
                "ratio_pct": 100.0 * sneaky / total if total else 0.0,
            },
            "click_histogram": self.histogram.to_dict(),
            "pattern_counts": dict(self.pattern_counts),
            "low_confidence_records": self.low_confidence,
            "stats": dict(sorted(self.stats.items())),
        }

    def to_text(self) -> str:
        header = f"{'type':<32}{'PoWs':>6}{'sneaky':>8}{'dist%':>9}{'share%':>9}{'ratio%':>9}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.type:<32}{r.pow_count:>6}{r.sneaky_count:>8}"
                f"{r.distribution_pct:>9.2f}{r.pow_share_pct:>9.2f}{r.ratio_pct:>9.2f}"
            )
        total, sneaky = self.total_pows, self.total_sneaky
        if self.rows:
            ratio = 100.0 * sneaky / total if total else 0.0
            lines.append("-" * len(header))
            lines.append(f"{'total':<32}{total:>6}{sneaky:>8}{100.0 if sneaky else 0.0:>9.2f}{100.0:>9.2f}{ratio:>9.2f}")
        lines.append("")
        lines.append("patterns: " + ", ".join(f"{k}={v}" for k, v in self.pattern_counts.items()))
        h = self.histogram
        bins = " ".join(f"{k}:{v}" for k, v in sorted(h.by_clicks.items()))
        lines.append(f"clicks to dismiss: {bins or '-'}  back:{h.by_back}  forced:{h.forced}")
        if self.stats:
            lines.append("exploration: " + ", ".join(f"{k}={v}" for k, v in sorted(self.stats.items())
                                                     if not isinstance(v, (list, dict))))
        return "\n".join(lines) + "\n"


def type_rows(labels: Iterable[dict]) -> list[TypeRow]:
    """Table rows from label dicts (``{"type": ..., "sneaky": ...}``); empty input gives no rows."""
    pows: Counter = Counter()
    sneaky: Counter = Counter()
    for lab in labels:
        pows[lab["type"]] += 1
        if lab["sneaky"]:
            sneaky[lab["type"]] += 1
    total, total_sneaky = sum(pows.values()), sum(sneaky.values())
    rows = []
    for t in TYPE_ORDER + sorted(set(pows) - set(TYPE_ORDER)):
        if not pows[t]:
            continue
        rows.append(TypeRow(
            type=t,
            pow_count=pows[t],
            sneaky_count=sneaky[t],
            distribution_pct=100.0 * sneaky[t] / total_sneaky if total_sneaky else 0.0,
            pow_share_pct=100.0 * pows[t] / total,
            ratio_pct=100.0 * sneaky[t] / pows[t],
        ))
    return rows


def pattern_counts(labels: Iterable[dict]) -> dict[str, int]:
    counts = {p: 0 for p in PATTERN_ORDER}
    for lab in labels:
        for p in lab["patterns"]:
            counts[p] = counts.get(p, 0) + 1
    return counts


def click_histogram(dismissals: Iterable[dict]) -> ClickHistogram:
    h = ClickHistogram()
    for d in dismissals:
        if d["dismissed"] and not d.get("dismissed_by_back", False):
            h.by_clicks[d["clicks_used"]] = h.by_clicks.get(d["clicks_used"], 0) + 1
        elif d["dismissed"]:
            h.by_back += 1
        else:
            h.forced += 1
    return h


def build_report(records: list[dict], stats: Optional[dict] = None) -> SummaryReport:
    """Report over serialized records; each must carry its ``labels``."""
    labels = [r["labels"] for r in records]
    top_level = [r["dismissal"] for r in records if not r.get("chain_parent")]
    low = sum(1 for lab in labels if any(lab.get("low_confidence", {}).values()))
    return SummaryReport(
        rows=type_rows(labels),
        histogram=click_histogram(top_level),
        pattern_counts=pattern_counts(labels),
        stats=dict(stats or {}),
        low_confidence=low,
    )
