"""Client for Nominatim-compatible reverse geocoding with an on-disk cache.

One coordinate costs a ``/reverse`` call (to find the place) and a
``/details`` call with ``addressdetails=1`` (to get the OSM ids of every
address component). With ``component_details`` enabled each component is
additionally looked up once to fill its metadata record. All responses are
cached as JSON files keyed by request; a cache hit never touches the
network.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import requests

from semgeo.errors import ConfigError, ServiceError
from semgeo.geo import GeoCoordinate
from semgeo.hierarchy import LocationId, check_address
from semgeo.ingest.metadata import LocationRecord

log = logging.getLogger(__name__)

ENV_PREFIX = "SEMGEO_NOMINATIM_"
_POSTAL_TYPES = {"postcode", "postal_code"}
_RETRY_STATUS = {429, 500, 502, 503, 504}


class GeocodeResponseError(ServiceError):
    """The service answered, but with something we cannot parse."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class NoResultError(ServiceError):
    """The service found nothing at the coordinate."""


@dataclass
class GeocoderConfig:
    base_url: str = "https://nominatim.openstreetmap.org"
    user_agent: str = "semgeo/0.1 (research; reverse geocoding for partitioning)"
    timeout_s: float = 10.0
    # public Nominatim allows at most one request per second
    min_interval_s: float = 1.0
    max_retries: int = 3
    backoff_s: float = 1.0
    max_in_flight: int = 1
    cache_dir: Optional[str] = None
    precision: int = 5
    component_details: bool = True
    language: str = "en"

    @classmethod
    def from_env(cls, environ=None, **overrides) -> "GeocoderConfig":
        """Defaults, then ``SEMGEO_NOMINATIM_*`` variables, then explicit overrides."""
        environ = os.environ if environ is None else environ
        values = {}
        for name, (suffix, conv) in _ENV_FIELDS.items():
            raw = environ.get(ENV_PREFIX + suffix)
            if raw is None:
                continue
            try:
                values[name] = conv(raw)
            except ValueError:
                raise ConfigError(f"{ENV_PREFIX}{suffix}={raw!r} is not valid") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


_ENV_FIELDS = {
    "base_url": ("URL", str),
    "user_agent": ("USER_AGENT", str),
    "timeout_s": ("TIMEOUT", float),
    "min_interval_s": ("RATE", float),
    "max_retries": ("RETRIES", int),
    "max_in_flight": ("IN_FLIGHT", int),
    "cache_dir": ("CACHE", str),
    "precision": ("PRECISION", int),
}


class DiskCache:
    """JSON-file-per-key cache. Writes are serialized and atomic."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.dir / (re.sub(r"[^A-Za-z0-9_.\-]", "_", key) + ".json")

    def get(self, key: str):
        p = self._path(key)
        if not p.exists():
            return None
        with open(p, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def put(self, key: str, value) -> None:
        p = self._path(key)
        data = json.dumps(value, ensure_ascii=False, sort_keys=True, indent=1)
        with self._lock:
            tmp = p.with_suffix(f".tmp{threading.get_ident()}")
            tmp.write_text(data, encoding="utf-8")
            os.replace(tmp, p)


@dataclass
class ReverseResult:
    coordinate: GeoCoordinate
    address: tuple
    records: list = field(default_factory=list)


def cache_key(coord: GeoCoordinate, precision: int) -> str:
    return f"reverse_{coord.lat_deg:.{precision}f}_{coord.lon_deg:.{precision}f}"


def _is_postal(entry: dict) -> bool:
    return (entry.get("type") in _POSTAL_TYPES or entry.get("class") in _POSTAL_TYPES
            or entry.get("rank_address") == 5)


def _entry_id(entry: dict) -> Optional[LocationId]:
    kind, osm_id = entry.get("osm_type"), entry.get("osm_id")
    if not kind or osm_id in (None, ""):
        return None
    return LocationId.of(str(kind), int(osm_id))


def _int_or_none(value) -> Optional[int]:
    if value in (None, ""):
        return None
    digits = re.sub(r"[^\d]", "", str(value))
    return int(digits) if digits else None


def parse_address_components(details: dict) -> list[dict]:
    """Address entries of a ``/details`` answer, fine to coarse, without postal codes.

    Entries lacking an OSM id (country codes, computed postcodes) and entries
    flagged ``isaddress: false`` are dropped; the place itself is prepended
    when the service leaves it out.
    """
    if not isinstance(details, dict) or "address" not in details:
        raise GeocodeResponseError("details response without an address list", json.dumps(details)[:2000])
    out = []
    seen = set()
    own = _entry_id(details)
    entries = list(details["address"])
    if own is not None and all(_entry_id(e) != own for e in entries):
        entries.insert(0, {
            "osm_type": details.get("osm_type"), "osm_id": details.get("osm_id"),
            "localname": details.get("localname", ""), "class": details.get("category", ""),
            "type": details.get("type", ""), "admin_level": details.get("admin_level", 15),
            "isaddress": True,
        })
    for e in entries:
        if not e.get("isaddress", True) or _is_postal(e):
            continue
        loc = _entry_id(e)
        if loc is None or loc in seen:
            continue
        seen.add(loc)
        out.append(dict(e, _id=loc))
    return out


def record_from_details(loc: LocationId, entry: dict, details: Optional[dict]) -> LocationRecord:
    """Build a metadata record from an address entry and, if available, its own details."""
    d = details or {}
    extra = d.get("extratags") or {}
    level = d.get("admin_level", entry.get("admin_level", 15))
    return LocationRecord(
        id=loc,
        localname=d.get("localname") or entry.get("localname") or "",
        category=d.get("category") or entry.get("class") or "",
        loc_type=d.get("type") or entry.get("type") or "",
        admin_level=int(level) if level is not None else 15,
        is_area=bool(d.get("isarea", False)),
        wikidata=extra.get("wikidata"),
        wikipedia=extra.get("wikipedia") or d.get("calculated_wikipedia"),
        population=_int_or_none(extra.get("population")),
        place=extra.get("place") or extra.get("linked_place") or entry.get("place_type"),
        geometry=d.get("geometry"),
    )


class NominatimClient:
    """Reverse geocoder over HTTP. ``session`` may be any object with a
    ``requests``-compatible ``get``; tests pass a recording fake."""

    def __init__(self, config: Optional[GeocoderConfig] = None, session=None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config or GeocoderConfig.from_env()
        if session is None:
            session = requests.Session()
            session.headers["User-Agent"] = self.config.user_agent
        self.session = session
        self.cache = DiskCache(self.config.cache_dir) if self.config.cache_dir else None
        self._sleep = sleep
        self._rate_lock = threading.Lock()
        self._last_request = 0.0
        self.requests_made = 0

    def _throttle(self) -> None:
        with self._rate_lock:
            wait = self._last_request + self.config.min_interval_s - time.monotonic()
            if wait > 0:
                self._sleep(wait)
            self._last_request = time.monotonic()

    def _fetch(self, endpoint: str, params: dict) -> dict:
        url = self.config.base_url.rstrip("/") + "/" + endpoint
        headers = {"User-Agent": self.config.user_agent, "Accept-Language": self.config.language}
        last_exc: Optional[Exception] = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self.config.backoff_s * 2 ** (attempt - 1))
            self._throttle()
            self.requests_made += 1
            try:
                resp = self.session.get(url, params=params, headers=headers, timeout=self.config.timeout_s)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                log.warning("%s attempt %d failed: %s", endpoint, attempt + 1, exc)
                continue
            if resp.status_code in _RETRY_STATUS:
                last_exc = ServiceError(f"HTTP {resp.status_code} from {url}")
                log.warning("%s attempt %d: HTTP %d", endpoint, attempt + 1, resp.status_code)
                continue
            if resp.status_code != 200:
                raise ServiceError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                return json.loads(resp.text)
            except ValueError:
                raise GeocodeResponseError(f"unparseable response from {url}", resp.text) from None
        raise ServiceError(f"{url} failed after {self.config.max_retries + 1} attempts: {last_exc}")

    def _cached(self, key: str, endpoint: str, params: dict) -> dict:
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        data = self._fetch(endpoint, params)
        if self.cache is not None:
            self.cache.put(key, data)
        return data

    def reverse_raw(self, coord: GeoCoordinate) -> dict:
        p = self.config.precision
        params = {"lat": f"{coord.lat_deg:.{p}f}", "lon": f"{coord.lon_deg:.{p}f}",
                  "format": "jsonv2", "addressdetails": 1}
        return self._cached(cache_key(coord, p), "reverse", params)

    def details_raw(self, loc: LocationId, addressdetails: bool) -> dict:
        params = {"osmtype": loc.kind.letter, "osmid": loc.osm_id, "format": "json",
                  "addressdetails": int(addressdetails), "extratags": 1,
                  "polygon_geojson": int(self.config.component_details)}
        suffix = "_addr" if addressdetails else ""
        return self._cached(f"details_{loc}{suffix}", "details", params)

    def reverse_geocode(self, coord: GeoCoordinate) -> ReverseResult:
        rev = self.reverse_raw(coord)
        if not isinstance(rev, dict):
            raise GeocodeResponseError("reverse response is not an object", json.dumps(rev)[:2000])
        if "error" in rev:
            raise NoResultError(f"no result at {coord}: {rev['error']}")
        place = _entry_id(rev)
        if place is None:
            raise GeocodeResponseError("reverse response lacks osm_type/osm_id", json.dumps(rev)[:2000])
        details = self.details_raw(place, addressdetails=True)
        components = parse_address_components(details)
        if not components:
            raise GeocodeResponseError(f"no usable address components at {coord}", json.dumps(details)[:2000])
        address = check_address(e["_id"] for e in components)
        records = []
        for e in components:
            loc = e["_id"]
            own = details if loc == place else (
                self.details_raw(loc, addressdetails=False) if self.config.component_details else None)
            records.append(record_from_details(loc, e, own))
        return ReverseResult(coord, address, records)

    def reverse_geocode_many(self, coords: Sequence[GeoCoordinate]) -> list:
        """Geocode many coordinates with at most ``max_in_flight`` concurrent requests.

        Results keep input order; failures are returned as exception objects.
        """
        def one(c):
            try:
                return self.reverse_geocode(c)
            except ServiceError as exc:
                return exc

        workers = max(1, int(self.config.max_in_flight))
        if workers == 1:
            return [one(c) for c in coords]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, coords))


def reverse_geocode(coord: GeoCoordinate, config: Optional[GeocoderConfig] = None,
                    session=None) -> ReverseResult:
    """One-shot convenience wrapper around :class:`NominatimClient`."""
    return NominatimClient(config, session).reverse_geocode(coord)
