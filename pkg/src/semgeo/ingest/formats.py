"""Line-oriented TSV formats for pipeline artefacts.

Every file starts with a ``# semgeo-<kind> v1`` line, may carry further
``#`` metadata lines, then a column header and tab-separated rows. Floats
are written with ``repr`` so that reading a file back gives bit-identical
values. Rows are always emitted in a canonical order, so rebuilding from
the same inputs gives byte-identical files.
"""

from __future__ import annotations

import io
import math
import os
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from semgeo.concepts import BetaDelta, CiAggregate, CiRecord
from semgeo.errors import InputError
from semgeo.geo import AccuracyTable, GeoCoordinate
from semgeo.hierarchy import LocationForest, LocationId
from semgeo.inference import PROB_SUM_TOL, PredictionRecord
from semgeo.partitioning import MultiPartitioning, Partitioning

VERSION = "v1"
NONE = "-"


def _magic(kind: str) -> str:
    return f"# semgeo-{kind} {VERSION}"


def _fmt(x) -> str:
    if x is None:
        return NONE
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _clean(text: str) -> str:
    return " ".join(str(text).split())


def _write_text(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _table(kind: str, meta: Sequence[str], columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(_magic(kind) + "\n")
    for m in meta:
        buf.write(f"# {m}\n")
    buf.write("\t".join(columns) + "\n")
    for row in rows:
        buf.write("\t".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _read_table(path, kind: str) -> tuple[list[str], list[str], Iterator[tuple[int, list[str]]]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0].strip() != _magic(kind):
        raise InputError(f"{path}: not a semgeo-{kind} {VERSION} file")
    meta = []
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        meta.append(lines[i][1:].strip())
        i += 1
    if i >= len(lines):
        raise InputError(f"{path}: missing column header")
    columns = lines[i].split("\t")
    body = ((n + 1, line.split("\t")) for n, line in enumerate(lines[i + 1:], start=i + 1) if line.strip())
    return meta, columns, body


def _float(text: str, path, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{path}:{line}: not a number: {text!r}") from None


def _concept(text: str):
    return int(text) if text.isdigit() else text


# -- forest -----------------------------------------------------------------

def write_forest(path, forest: LocationForest) -> None:
    rows = [(str(n), str(forest.parent[n]) if n in forest.parent else None, forest.count(n))
            for n in sorted(forest.nodes)]
    meta = [f"nodes={len(forest.nodes)}", f"roots={len(forest.roots())}",
            f"cycles_broken={len(forest.broken_cycles)}"]
    _write_text(path, _table("forest", meta, ("location", "parent", "sample_count"), rows))


def read_forest(path) -> LocationForest:
    _, columns, body = _read_table(path, "forest")
    if columns != ["location", "parent", "sample_count"]:
        raise InputError(f"{path}: unexpected forest columns {columns}")
    nodes, parent, counts = set(), {}, {}
    for line, row in body:
        if len(row) != 3:
            raise InputError(f"{path}:{line}: expected 3 fields")
        loc = LocationId.parse(row[0])
        if loc in nodes:
            raise InputError(f"{path}:{line}: duplicate location {loc}")
        nodes.add(loc)
        if row[1] != NONE:
            parent[loc] = LocationId.parse(row[1])
        n = int(row[2])
        if n:
            counts[loc] = n
    dangling = [p for p in parent.values() if p not in nodes]
    if dangling:
        raise InputError(f"{path}: parents not listed as locations: {[str(x) for x in dangling[:5]]}")
    return LocationForest(nodes=nodes, parent=parent, sample_count=counts)


# -- partitioning -----------------------------------------------------------

PARTITION_COLUMNS = ("level", "tau_min", "cell", "localname", "parent_cell",
                     "lat", "lon", "count", "n_assigned")


def write_partitioning(path, mp: MultiPartitioning, localnames: Optional[dict] = None) -> None:
    localnames = localnames or {}
    rows = []
    for i, level in enumerate(mp.levels):
        pmap = mp.parent_cell[i] if i < len(mp.parent_cell) else {}
        for c in level.cells:
            center = level.cell_center[c]
            rows.append((i, level.tau_min, str(c), _clean(localnames.get(c, "")) or NONE,
                         str(pmap[c]) if c in pmap else None, center.lat_deg, center.lon_deg,
                         level.cell_count[c], level.n_assigned.get(c, 0)))
    meta = ["taus=" + ",".join(str(t) for t in mp.taus),
            "cells=" + ",".join(str(len(p)) for p in mp.levels)]
    _write_text(path, _table("partitioning", meta, PARTITION_COLUMNS, rows))


def read_partitioning(path) -> tuple[MultiPartitioning, dict]:
    """Returns the multi-partitioning and a cell -> localname map."""
    _, columns, body = _read_table(path, "partitioning")
    if tuple(columns) != PARTITION_COLUMNS:
        raise InputError(f"{path}: unexpected partitioning columns {columns}")
    levels: dict = {}
    names = {}
    for line, row in body:
        if len(row) != len(PARTITION_COLUMNS):
            raise InputError(f"{path}:{line}: expected {len(PARTITION_COLUMNS)} fields")
        lvl, tau = int(row[0]), int(row[1])
        cell = LocationId.parse(row[2])
        entry = levels.setdefault(lvl, {"tau": tau, "cells": [], "center": {}, "count": {},
                                        "assigned": {}, "parent": {}})
        if entry["tau"] != tau:
            raise InputError(f"{path}:{line}: inconsistent tau_min within level {lvl}")
        entry["cells"].append(cell)
        entry["center"][cell] = GeoCoordinate(_float(row[5], path, line), _float(row[6], path, line))
        entry["count"][cell] = int(row[7])
        entry["assigned"][cell] = int(row[8])
        if row[4] != NONE:
            entry["parent"][cell] = LocationId.parse(row[4])
        if row[3] != NONE:
            names[cell] = row[3]
    if sorted(levels) != list(range(len(levels))) or not levels:
        raise InputError(f"{path}: levels must be numbered 0..n-1")
    parts = [Partitioning(levels[i]["tau"], levels[i]["cells"], levels[i]["center"],
                          levels[i]["count"], levels[i]["assigned"]) for i in range(len(levels))]
    maps = [levels[i]["parent"] for i in range(len(levels) - 1)]
    for i, m in enumerate(maps):
        missing = [c for c in parts[i].cells if c not in m]
        if missing:
            raise InputError(f"{path}: level {i} cells without parent cell: {[str(c) for c in missing[:5]]}")
    return MultiPartitioning(parts, maps), names


# -- probabilities ----------------------------------------------------------

def write_probabilities(path, mp: MultiPartitioning, rows: Iterable[tuple[str, Sequence[np.ndarray]]]) -> None:
    meta = [f"level {i} " + ",".join(str(c) for c in p.cells) for i, p in enumerate(mp.levels)]
    cols = ["sample_id"] + [f"level{i}" for i in range(len(mp.levels))]
    out = []
    for sid, probs in rows:
        out.append([sid] + [",".join(repr(float(x)) for x in np.asarray(v).ravel()) for v in probs])
    _write_text(path, _table("probabilities", meta, cols, out))


def read_probabilities(path, mp: MultiPartitioning, renormalize: bool = False,
                       tol: float = PROB_SUM_TOL) -> Iterator[tuple[str, list[np.ndarray]]]:
    """Stream ``(sample_id, per-level vectors)``; header orderings must match ``mp``."""
    meta, columns, body = _read_table(path, "probabilities")
    orders = {}
    for m in meta:
        parts = m.split(" ", 2)
        if len(parts) == 3 and parts[0] == "level":
            orders[int(parts[1])] = parts[2].split(",") if parts[2] else []
    if sorted(orders) != list(range(len(mp.levels))):
        raise InputError(f"{path}: header declares levels {sorted(orders)}, partitioning has {len(mp.levels)}")
    for i, level in enumerate(mp.levels):
        declared = [LocationId.parse(t) for t in orders[i]]
        expected = list(level.cells)
        if declared != expected:
            j = next((k for k, (a, b) in enumerate(zip(declared, expected)) if a != b),
                     min(len(declared), len(expected)))
            got = str(declared[j]) if j < len(declared) else "<end>"
            want = str(expected[j]) if j < len(expected) else "<end>"
            raise InputError(f"{path}: level {i} cell ordering diverges at position {j}: "
                             f"file has {got}, partitioning has {want}")
    if len(columns) != len(mp.levels) + 1:
        raise InputError(f"{path}: expected {len(mp.levels) + 1} columns")
    for line, row in body:
        if len(row) != len(columns):
            raise InputError(f"{path}:{line}: expected {len(columns)} fields")
        vecs = []
        for i, cell in enumerate(row[1:]):
            try:
                v = np.array([float(x) for x in cell.split(",")], dtype=np.float64)
            except ValueError:
                raise InputError(f"{path}:{line}: non-numeric probability at level {i}") from None
            if v.shape[0] != len(mp.levels[i]):
                raise InputError(f"{path}:{line}: level {i} has {v.shape[0]} values, expected {len(mp.levels[i])}")
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise InputError(f"{path}:{line}: level {i} probabilities must be finite and non-negative")
            total = float(v.sum())
            if renormalize and total > 0:
                v = v / total
            elif abs(total - 1.0) > tol:
                raise InputError(f"{path}:{line}: level {i} sums to {total:.9g} (use renormalize)")
            vecs.append(v)
        yield row[0], vecs


# -- predictions and accuracy -----------------------------------------------

def write_predictions(path, records: Iterable[tuple[str, PredictionRecord]]) -> None:
    rows = []
    for mode, r in records:
        rows.append((r.sample_id, mode, str(r.predicted_cell), r.predicted_coordinate.lat_deg,
                     r.predicted_coordinate.lon_deg, r.gcd_error_km))
    _write_text(path, _table("predictions", [], ("sample_id", "mode", "cell", "lat", "lon", "gcd_error_km"), rows))


def write_accuracy(path, tables: Sequence[tuple[str, AccuracyTable]]) -> None:
    rows = [(mode, e.radius_km, e.accuracy, e.n) for mode, t in tables for e in t.entries]
    _write_text(path, _table("accuracy", [], ("mode", "radius_km", "accuracy", "n"), rows))


# -- concept influence ------------------------------------------------------

CI_COLUMNS = ("sample_id", "concept", "beta", "relative_size", "tki", "ci", "gcd_error_km")


def write_ci_records(path, records: Iterable[CiRecord]) -> None:
    rows = [(r.sample_id, r.concept, r.beta, r.relative_size, r.tki, r.ci, r.gcd_error_km) for r in records]
    _write_text(path, _table("ci-records", [], CI_COLUMNS, rows))


def read_ci_records(path) -> list[CiRecord]:
    _, columns, body = _read_table(path, "ci-records")
    if tuple(columns) != CI_COLUMNS:
        raise InputError(f"{path}: unexpected columns {columns}")
    out = []
    for line, row in body:
        if len(row) != len(CI_COLUMNS):
            raise InputError(f"{path}:{line}: expected {len(CI_COLUMNS)} fields")
        out.append(CiRecord(row[0], _concept(row[1]), _float(row[3], path, line), _float(row[4], path, line),
                            _float(row[5], path, line), _float(row[6], path, line), int(row[2])))
    return out


AGG_COLUMNS = ("concept", "lo_km", "hi_km", "count", "median", "mean")


def write_aggregates(path, aggs: Iterable[CiAggregate], meta: Sequence[str] = ()) -> None:
    rows = [(a.concept, a.interval[0], a.interval[1], a.count, a.median, a.mean) for a in aggs]
    _write_text(path, _table("ci-aggregate", meta, AGG_COLUMNS, rows))


def read_aggregates(path) -> list[CiAggregate]:
    _, columns, body = _read_table(path, "ci-aggregate")
    if tuple(columns) != AGG_COLUMNS:
        raise InputError(f"{path}: unexpected columns {columns}")
    out = []
    for line, row in body:
        if len(row) != len(AGG_COLUMNS):
            raise InputError(f"{path}:{line}: expected {len(AGG_COLUMNS)} fields")
        out.append(CiAggregate(_concept(row[0]), (_float(row[1], path, line), _float(row[2], path, line)),
                               int(row[3]), _float(row[4], path, line), _float(row[5], path, line)))
    return out


def write_beta_delta(path, deltas: Iterable[BetaDelta]) -> None:
    rows = [(d.concept, d.interval[0], d.interval[1], d.delta, d.median_dilated, d.median_plain) for d in deltas]
    _write_text(path, _table("beta-delta", [], ("concept", "lo_km", "hi_km", "delta", "median_dilated",
                                                 "median_plain"), rows))


def write_assignments(path, taus: Sequence[int], rows: Iterable[tuple[str, Sequence]]) -> None:
    cols = ["sample_id"] + [f"cell_tau{t}" for t in taus]
    out = [[sid] + [str(c) if c is not None else None for c in cells] for sid, cells in rows]
    _write_text(path, _table("assignments", [], cols, out))


def read_manifest(path) -> list[tuple[str, str, str, float]]:
    """CI manifest: TSV with sample_id, explanation, segmentation[, gcd_error_km].

    Relative raster paths are resolved against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise InputError(f"{path}: empty manifest")
    header = lines[0].split("\t")
    for col in ("sample_id", "explanation", "segmentation"):
        if col not in header:
            raise InputError(f"{path}: manifest header lacks {col!r}")
    idx = {c: header.index(c) for c in header}
    out = []
    for n, line in enumerate(lines[1:], 2):
        row = line.split("\t")
        if len(row) != len(header):
            raise InputError(f"{path}: row {n} has {len(row)} fields, expected {len(header)}")
        err = _float(row[idx["gcd_error_km"]], path, n) if "gcd_error_km" in idx else math.nan
        out.append((row[idx["sample_id"]], os.path.join(base, row[idx["explanation"]]),
                    os.path.join(base, row[idx["segmentation"]]), err))
    return out
