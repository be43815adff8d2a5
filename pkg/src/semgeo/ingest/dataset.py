"""Streaming reader and writer for coordinate datasets.

A dataset file is UTF-8 CSV or TSV with a header row naming at least
``sample_id``, ``lat`` and ``lon``; an optional ``address`` column holds the
fine-to-coarse location ids separated by ``|`` (``W438331516|R112100|...``).
Malformed rows are skipped and reported until an error budget runs out.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from semgeo.errors import InputError
from semgeo.geo import GeoCoordinate
from semgeo.hierarchy import LocationId, check_address

log = logging.getLogger(__name__)

ADDRESS_SEP = "|"
REQUIRED_COLUMNS = ("sample_id", "lat", "lon")
DEFAULT_MAX_ERRORS = 1000


@dataclass(frozen=True)
class GeoSample:
    sample_id: str
    coordinate: GeoCoordinate
    address: Optional[tuple] = None


@dataclass
class ParseReport:
    """Diagnostics collected while parsing; keeps the first ``keep`` messages."""

    rows: int = 0
    parsed: int = 0
    skipped: int = 0
    messages: list = field(default_factory=list)
    keep: int = 50

    def skip(self, line_no: int, reason: str) -> None:
        self.skipped += 1
        if len(self.messages) < self.keep:
            self.messages.append(f"line {line_no}: {reason}")
        log.debug("skipping line %d: %s", line_no, reason)


def parse_address(text: str) -> Optional[tuple]:
    text = text.strip()
    if not text:
        return None
    return check_address(LocationId.parse(tok) for tok in text.split(ADDRESS_SEP))


def format_address(address) -> str:
    return ADDRESS_SEP.join(str(x) for x in address) if address else ""


def _open_text(path):
    try:
        return open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read dataset {path}: {exc}") from exc


def iter_dataset(lines: Iterable[str], report: Optional[ParseReport] = None,
                 max_errors: int = DEFAULT_MAX_ERRORS, source: str = "<stream>") -> Iterator[GeoSample]:
    """Parse dataset rows from any iterable of text lines."""
    report = report if report is not None else ParseReport()
    it = iter(lines)
    try:
        header_line = next(it)
    except StopIteration:
        return
    delimiter = "\t" if "\t" in header_line else ","
    header = [h.strip().lstrip("﻿") for h in next(csv.reader([header_line], delimiter=delimiter))]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise InputError(f"{source}: header lacks columns {missing}")
    i_id, i_lat, i_lon = (header.index(c) for c in REQUIRED_COLUMNS)
    i_addr = header.index("address") if "address" in header else None
    seen: set = set()
    reader = csv.reader(it, delimiter=delimiter)
    for row in reader:
        line_no = reader.line_num + 1
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        report.rows += 1
        try:
            if len(row) < len(header):
                raise InputError(f"expected {len(header)} fields, got {len(row)}")
            sample_id = row[i_id].strip()
            if not sample_id:
                raise InputError("empty sample_id")
            if sample_id in seen:
                raise InputError(f"duplicate sample_id {sample_id!r}")
            try:
                lat, lon = float(row[i_lat]), float(row[i_lon])
            except ValueError:
                raise InputError(f"non-numeric coordinate {row[i_lat]!r}, {row[i_lon]!r}") from None
            coord = GeoCoordinate(lat, lon)
            address = parse_address(row[i_addr]) if i_addr is not None else None
        except InputError as exc:
            report.skip(line_no, str(exc))
            if report.skipped > max_errors:
                raise InputError(
                    f"{source}: error budget of {max_errors} malformed rows exceeded; "
                    f"first problems: {report.messages[:5]}"
                ) from exc
            continue
        seen.add(sample_id)
        report.parsed += 1
        yield GeoSample(sample_id, coord, address)
    if report.skipped:
        log.warning("%s: skipped %d of %d rows", source, report.skipped, report.rows)


def parse_dataset(path, report: Optional[ParseReport] = None,
                  max_errors: int = DEFAULT_MAX_ERRORS) -> Iterator[GeoSample]:
    """Stream samples from a dataset file (see module docstring for the format)."""
    fh = _open_text(path)
    with fh:
        yield from iter_dataset(fh, report, max_errors, source=os.fspath(path))


def write_dataset(path, samples: Iterable[GeoSample], with_address: bool = True) -> int:
    cols = ["sample_id", "lat", "lon"] + (["address"] if with_address else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    n = 0
    for s in samples:
        row = [s.sample_id, repr(s.coordinate.lat_deg), repr(s.coordinate.lon_deg)]
        if with_address:
            row.append(format_address(s.address))
        w.writerow(row)
        n += 1
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return n
