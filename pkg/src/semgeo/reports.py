"""Human-readable aligned-text reports (machine-readable twins live in ingest.formats)."""

from __future__ import annotations

from typing import Sequence

from semgeo.concepts import BetaDelta, CiAggregate, rank_concepts
from semgeo.geo import AccuracyTable


def _align(rows: Sequence[Sequence[str]], right: Sequence[bool]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = []
    for r in rows:
        cells = [c.rjust(w) if ra else c.ljust(w) for c, w, ra in zip(r, widths, right)]
        out.append("  ".join(cells).rstrip())
    return "\n".join(out) + "\n"


def _km(x: float) -> str:
    return f"{x:g}"


def accuracy_report(tables: Sequence[tuple[str, AccuracyTable]]) -> str:
    radii = tables[0][1].radii
    head = ["mode", "n"] + [f"{_km(r)} km" for r in radii]
    rows = [head]
    for mode, t in tables:
        rows.append([mode, str(t.entries[0].n)] + [f"{100 * e.accuracy:.1f}" for e in t.entries])
    return "a_r [%] @ km\n" + _align(rows, [False] + [True] * (len(head) - 1))


def ci_report(aggs: Sequence[CiAggregate], intervals, top: int = 10, by: str = "median") -> str:
    """Per interval: the ``top`` highest and lowest concepts with |s| and ci."""
    parts = []
    for iv in intervals:
        label = f"[{_km(iv[0])}-{_km(iv[1])}) km"
        for lowest in (False, True):
            ranked = rank_concepts(aggs, iv, top, lowest=lowest, by=by)
            title = f"{'lowest' if lowest else 'top'}-{top} {label} (ci_{by})"
            if not ranked:
                parts.append(f"{title}\n  (no concept reaches the image threshold)\n")
                continue
            rows = [["s", "|s|", "ci_median", "ci_mean"]]
            rows += [[str(a.concept), str(a.count), f"{a.median:.2f}", f"{a.mean:.2f}"] for a in ranked]
            parts.append(title + "\n" + _align(rows, [False, True, True, True]))
    return "\n".join(parts)


def beta_delta_report(deltas: Sequence[BetaDelta]) -> str:
    if not deltas:
        return "no common (concept, interval) keys\n"
    ivs = sorted({d.interval for d in deltas})
    concepts = []
    for d in deltas:
        if d.concept not in concepts:
            concepts.append(d.concept)
    lookup = {(d.concept, d.interval): d.delta for d in deltas}
    rows = [["s"] + [f"[{_km(lo)}-{_km(hi)})" for lo, hi in ivs]]
    for c in concepts:
        rows.append([str(c)] + [f"{lookup[(c, iv)]:+.2f}" if (c, iv) in lookup else "" for iv in ivs])
    return "delta ci_median (dilated - plain)\n" + _align(rows, [False] + [True] * len(ivs))
