"""Location metadata store: one JSON object per line.

Field names: ``id``, ``localname``, ``category``, ``type``,
``admin_level``, ``isarea``, ``wikidata``, ``wikipedia``, ``population``,
``place``, ``geometry``. Geometry is passed through untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Optional

from semgeo.errors import InputError
from semgeo.hierarchy import LocationId

FIELDS = ("id", "localname", "category", "type", "admin_level", "isarea",
          "wikidata", "wikipedia", "population", "place", "geometry")


@dataclass(frozen=True)
class LocationRecord:
    id: LocationId
    localname: str = ""
    category: str = ""
    loc_type: str = ""
    admin_level: int = 15
    is_area: bool = False
    wikidata: Optional[str] = None
    wikipedia: Optional[str] = None
    population: Optional[int] = None
    place: Optional[str] = None
    geometry: Any = None

    def __post_init__(self):
        if not 0 <= self.admin_level <= 15:
            raise InputError(f"{self.id}: admin_level {self.admin_level} outside [0, 15]")

    def to_json(self) -> dict:
        return {
            "id": str(self.id),
            "localname": self.localname,
            "category": self.category,
            "type": self.loc_type,
            "admin_level": self.admin_level,
            "isarea": self.is_area,
            "wikidata": self.wikidata,
            "wikipedia": self.wikipedia,
            "population": self.population,
            "place": self.place,
            "geometry": self.geometry,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LocationRecord":
        try:
            pop = obj.get("population")
            return cls(
                id=LocationId.parse(str(obj["id"])),
                localname=obj.get("localname") or "",
                category=obj.get("category") or "",
                loc_type=obj.get("type") or "",
                admin_level=int(obj.get("admin_level", 15)),
                is_area=bool(obj.get("isarea", False)),
                wikidata=obj.get("wikidata"),
                wikipedia=obj.get("wikipedia"),
                population=int(pop) if pop not in (None, "") else None,
                place=obj.get("place"),
                geometry=obj.get("geometry"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad location record {obj!r:.200}: {exc}") from exc


def read_metadata(path) -> dict:
    """Map LocationId -> LocationRecord; duplicate ids are an error."""
    out: dict = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read metadata {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = LocationRecord.from_json(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if rec.id in out:
                raise InputError(f"{path}:{line_no}: duplicate location id {rec.id}")
            out[rec.id] = rec
    return out


def write_metadata(path, records: Iterable[LocationRecord]) -> None:
    recs = sorted(records, key=lambda r: r.id)
    with open(path, "w", encoding="utf-8") as fh:
        for r in recs:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=False) + "\n")
