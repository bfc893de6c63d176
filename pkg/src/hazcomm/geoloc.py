"""Geolocation resolution and great-circle distance.

A record's location comes from, in priority order: device coordinates,
the centroid of its place bounding box, or a gazetteer lookup over the
raw text (longest token-sequence match, ties broken by population).
Unresolved is a value, not an error: such nodes stay in the social graph
but are excluded from geographic clustering.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .corpus import TweetRecord

EARTH_RADIUS_KM = 6371.0088

__all__ = [
    "GeoSource",
    "GeoPoint",
    "Gazetteer",
    "UnresolvedInput",
    "load_gazetteer",
    "resolve",
    "haversine",
]


class GeoSource(Enum):
    DEVICE = "device"
    PLACE_CENTROID = "place_centroid"
    GAZETTEER = "gazetteer"
    UNRESOLVED = "unresolved"


class UnresolvedInput(ValueError):
    """Distance requested for an unresolved location."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    source: GeoSource

    def __post_init__(self):
        if self.source is not GeoSource.UNRESOLVED:
            if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
                raise ValueError(f"coordinates out of range: {self.lat}, {self.lon}")

    @property
    def resolved(self) -> bool:
        return self.source is not GeoSource.UNRESOLVED


UNRESOLVED = GeoPoint(float("nan"), float("nan"), GeoSource.UNRESOLVED)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class GazetteerEntry:
    name: str
    lat: float
    lon: float
    population: int


class Gazetteer:
    """Place-name lookup table; matching is longest-first on token runs."""

    def __init__(self, entries: list[GazetteerEntry]):
        self._by_tokens: dict[tuple[str, ...], GazetteerEntry] = {}
        self.max_name_tokens = 0
        for e in sorted(entries, key=lambda e: (e.name, e.population)):
            if not e.name:
                raise ValueError("gazetteer entry with empty name")
            toks = tuple(_TOKEN_RE.findall(e.name.lower()))
            prev = self._by_tokens.get(toks)
            if prev is None or e.population > prev.population:
                self._by_tokens[toks] = e
            self.max_name_tokens = max(self.max_name_tokens, len(toks))

    def __len__(self) -> int:
        return len(self._by_tokens)

    def lookup_text(self, text: str) -> GazetteerEntry | None:
        """Best place mentioned in raw text: longest token run, then
        highest population, then earliest position."""
        tokens = _TOKEN_RE.findall(text.lower())
        best: GazetteerEntry | None = None
        best_key = (-1, -1)
        for i in range(len(tokens)):
            max_len = min(self.max_name_tokens, len(tokens) - i)
            for length in range(max_len, 0, -1):
                entry = self._by_tokens.get(tuple(tokens[i : i + length]))
                if entry is not None:
                    key = (length, entry.population)
                    if key > best_key:
                        best, best_key = entry, key
                    break  # longer match at this start wins; move on
        return best


def load_gazetteer(path: str) -> Gazetteer:
    """Parse `name<TAB>lat<TAB>lon<TAB>population` lines (UTF-8)."""
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            name, lat, lon, pop = line.split("\t")
            entries.append(GazetteerEntry(name, float(lat), float(lon), int(pop)))
    return Gazetteer(entries)


def resolve(rec: "TweetRecord", gaz: Gazetteer) -> GeoPoint:
    """Best available location for a record; pure given (rec, gaz)."""
    if rec.coords is not None:
        return GeoPoint(rec.coords[0], rec.coords[1], GeoSource.DEVICE)
    if rec.place_bbox is not None:
        lat = sum(p[0] for p in rec.place_bbox) / 4.0
        lon = sum(p[1] for p in rec.place_bbox) / 4.0
        return GeoPoint(lat, lon, GeoSource.PLACE_CENTROID)
    hit = gaz.lookup_text(rec.text)
    if hit is not None:
        return GeoPoint(hit.lat, hit.lon, GeoSource.GAZETTEER)
    return UNRESOLVED


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km (Earth radius 6371.0088 km)."""
    if not (a.resolved and b.resolved):
        raise UnresolvedInput("both endpoints must be resolved")
    return haversine_ll(a.lat, a.lon, b.lat, b.lon)


def haversine_ll(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def pairwise_km(lats: "list[float]", lons: "list[float]"):
    """Dense n x n haversine matrix (vectorized), used by clustering."""
    import numpy as np

    phi = np.radians(np.asarray(lats, dtype=float))
    lam = np.radians(np.asarray(lons, dtype=float))
    dphi = phi[:, None] - phi[None, :]
    dlam = lam[:, None] - lam[None, :]
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
