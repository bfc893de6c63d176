"""Post ingestion: hazard dictionaries, record parsing, replayable streams.

Live collection is represented by two stream kinds behind one interface:
FileReplay (JSON-lines, file order preserved) and Synthetic (seeded,
deterministic). Records pass the dictionary filter before they reach the
rest of the pipeline; malformed lines are skipped and counted, never fatal.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Iterator

from .clock import Clock

__all__ = [
    "Veracity",
    "TweetRecord",
    "HazardDictionary",
    "SourceKind",
    "StreamSource",
    "TweetStream",
    "MalformedDictionary",
    "EmptyDictionary",
    "MalformedRecord",
    "SourceUnavailable",
    "load_dictionary",
    "matches",
    "open_stream",
    "parse_record",
    "record_to_json",
]


class MalformedDictionary(ValueError):
    pass


class EmptyDictionary(ValueError):
    pass


class MalformedRecord(ValueError):
    pass


class SourceUnavailable(OSError):
    pass


class Veracity(Enum):
    UNCHECKED = "unchecked"
    REAL = "real"
    FAKE = "fake"


@dataclass(frozen=True)
class TweetRecord:
    id: str
    lang: str
    created_at: int  # epoch milliseconds, UTC
    text: str
    user_id: str
    retweet_of: str | None = None
    reply_to: str | None = None
    coords: tuple[float, float] | None = None  # (lat, lon)
    place_bbox: tuple[tuple[float, float], ...] | None = None  # 4 corners
    veracity: Veracity = Veracity.UNCHECKED

    @property
    def is_retweet(self) -> bool:
        return self.retweet_of is not None

    def __post_init__(self):
        if not self.id:
            raise MalformedRecord("empty id")
        if self.coords is not None:
            lat, lon = self.coords
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise MalformedRecord(f"coords out of range: {self.coords}")
        if self.place_bbox is not None and len(self.place_bbox) != 4:
            raise MalformedRecord("place_bbox must have 4 corners")


_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_HASHTAG_RE = re.compile(r"#\w+")


@dataclass(frozen=True)
class HazardDictionary:
    """Per-hazard keyword/hashtag filter list (the meta-knowledge entry)."""

    hazard_name: str
    keywords: frozenset[str]
    hashtags: frozenset[str]

    def __post_init__(self):
        if not self.keywords and not self.hashtags:
            raise EmptyDictionary(f"hazard '{self.hazard_name}' has no terms")
        for h in self.hashtags:
            if not h.startswith("#"):
                raise MalformedDictionary(f"hashtag without '#': {h}")

    @property
    def keyword_sequences(self) -> tuple[tuple[str, ...], ...]:
        return tuple(tuple(k.split()) for k in sorted(self.keywords))


_SECTION_RE = re.compile(r"^\[hazard:(?P<name>[^\]]+)\]$")


def load_dictionary(path: str) -> HazardDictionary:
    """Parse a dictionary file; terms come out lowercased and deduplicated.

    Multiple [hazard:...] sections in one file merge into a single filter
    (names joined with '+'); the stream filter treats them as one list.
    """
    names: list[str] = []
    keywords: set[str] = set()
    hashtags: set[str] = set()
    in_section = False
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise SourceUnavailable(str(e)) from e

    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SECTION_RE.match(line)
        if m:
            names.append(m.group("name").strip())
            in_section = True
            continue
        if "=" not in line:
            raise MalformedDictionary(f"line {lineno}: expected key=value, got {line!r}")
        if not in_section:
            raise MalformedDictionary(f"line {lineno}: term line before any [hazard:...] section")
        key, _, value = line.partition("=")
        terms = [t.strip().lower() for t in value.split(",") if t.strip()]
        if key.strip() == "keywords":
            keywords.update(terms)
        elif key.strip() == "hashtags":
            for t in terms:
                hashtags.add(t if t.startswith("#") else "#" + t)
        else:
            raise MalformedDictionary(f"line {lineno}: unknown key {key.strip()!r}")

    if not names:
        raise MalformedDictionary("no [hazard:...] section found")
    if not keywords and not hashtags:
        raise EmptyDictionary(f"dictionary file {path} has no terms")
    return HazardDictionary("+".join(names), frozenset(keywords), frozenset(hashtags))


def matches(rec: TweetRecord, dictionary: HazardDictionary) -> bool:
    """Whole-token keyword match (multi-word keywords as contiguous runs)
    or exact hashtag token match, case-insensitive. Pure."""
    text = rec.text.lower()
    if dictionary.hashtags:
        for tag in _HASHTAG_RE.findall(text):
            if tag in dictionary.hashtags:
                return True
    words = _WORD_RE.findall(text)
    for seq in dictionary.keyword_sequences:
        n = len(seq)
        if n == 0 or n > len(words):
            continue
        for i in range(len(words) - n + 1):
            if tuple(words[i : i + n]) == seq:
                return True
    return False


class SourceKind(Enum):
    FILE_REPLAY = "file_replay"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class StreamSource:
    kind: SourceKind
    path: str | None = None          # FileReplay
    seed: int | None = None          # Synthetic
    count: int = 200                 # Synthetic: records to emit
    rate: float | None = None        # posts/second pacing (either kind)


def parse_record(line: str) -> TweetRecord:
    """One JSON-lines record to TweetRecord; raises MalformedRecord."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecord(f"bad JSON: {e}") from e
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not an object")
    try:
        created = _parse_timestamp(obj["created_at"])
        lat, lon = obj.get("lat"), obj.get("lon")
        coords = None
        if lat is not None and lon is not None:
            coords = (float(lat), float(lon))
        bbox = obj.get("place_bbox")
        place_bbox = None
        if bbox is not None:
            place_bbox = tuple((float(p[0]), float(p[1])) for p in bbox)
        return TweetRecord(
            id=str(obj["id"]),
            lang=str(obj.get("lang", "en")),
            created_at=created,
            text=str(obj["text"]),
            user_id=str(obj["user_id"]),
            retweet_of=obj.get("retweet_of"),
            reply_to=obj.get("reply_to"),
            coords=coords,
            place_bbox=place_bbox,
        )
    except MalformedRecord:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedRecord(str(e)) from e


def _parse_timestamp(value) -> int:
    if isinstance(value, (int, float)):
        return int(value)
    s = str(value)
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


def record_to_json(rec: TweetRecord) -> str:
    """Inverse of parse_record, wire field names preserved."""
    dt = datetime.fromtimestamp(rec.created_at / 1000.0, tz=timezone.utc)
    obj = {
        "id": rec.id,
        "lang": rec.lang,
        "created_at": dt.isoformat(timespec="milliseconds").replace("+00:00", "Z"),
        "text": rec.text,
        "user_id": rec.user_id,
        "retweet_of": rec.retweet_of,
        "reply_to": rec.reply_to,
        "lat": rec.coords[0] if rec.coords else None,
        "lon": rec.coords[1] if rec.coords else None,
        "place_bbox": [list(p) for p in rec.place_bbox] if rec.place_bbox else None,
    }
    return json.dumps(obj, sort_keys=True)


class TweetStream:
    """Filtered record iterator with skip accounting.

    accepted/rejected/malformed counters update as the stream is drained;
    a stream is single-reader, but independent streams can run in parallel.
    """

    def __init__(
        self,
        source: StreamSource,
        dictionary: HazardDictionary,
        clock: Clock | None = None,
        langs: frozenset[str] | None = None,
    ):
        self.source = source
        self.dictionary = dictionary
        self.clock = clock
        self.langs = langs
        self.accepted = 0
        self.rejected = 0
        self.malformed = 0

    def __iter__(self) -> Iterator[TweetRecord]:
        if self.source.kind is SourceKind.FILE_REPLAY:
            raw = self._file_records()
        else:
            raw = self._synthetic_records()
        for rec in raw:
            if self.langs is not None and rec.lang not in self.langs:
                self.rejected += 1
                continue
            if not matches(rec, self.dictionary):
                self.rejected += 1
                continue
            self.accepted += 1
            if self.clock is not None and self.source.rate:
                self.clock.sleep(1.0 / self.source.rate)
            yield rec

    def _file_records(self) -> Iterator[TweetRecord]:
        if self.source.path is None:
            raise SourceUnavailable("file replay needs a path")
        try:
            f = open(self.source.path, encoding="utf-8")
        except OSError as e:
            raise SourceUnavailable(str(e)) from e
        with f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    yield parse_record(line)
                except MalformedRecord:
                    self.malformed += 1

    def _synthetic_records(self) -> Iterator[TweetRecord]:
        rng = random.Random(self.source.seed if self.source.seed is not None else 0)
        keywords = sorted(self.dictionary.keywords) or [
            h.lstrip("#") for h in sorted(self.dictionary.hashtags)
        ]
        filler = [
            "morning", "coffee", "office", "match", "concert", "traffic",
            "holiday", "market", "garden", "library", "museum", "airport",
        ]
        sites = [(51.5074, -0.1278), (48.8566, 2.3522), (40.7128, -74.0060),
                 (35.6762, 139.6503), (-33.8688, 151.2093)]
        ts = 1_600_000_000_000
        emitted: list[str] = []
        for i in range(self.source.count):
            ts += rng.randint(0, 5_000)
            rid = f"syn-{i:06d}"
            on_topic = rng.random() < 0.7
            if on_topic:
                words = rng.sample(keywords, k=min(len(keywords), rng.randint(1, 3)))
                words += rng.sample(filler, k=rng.randint(2, 5))
            else:
                words = rng.sample(filler, k=rng.randint(3, 6))
            rng.shuffle(words)
            text = " ".join(words)
            coords = None
            if rng.random() < 0.8:
                base = rng.choice(sites)
                coords = (
                    round(base[0] + rng.uniform(-0.2, 0.2), 6),
                    round(base[1] + rng.uniform(-0.2, 0.2), 6),
                )
            retweet_of = reply_to = None
            if emitted and rng.random() < 0.3:
                target = rng.choice(emitted)
                if rng.random() < 0.5:
                    retweet_of = target
                else:
                    reply_to = target
            yield TweetRecord(
                id=rid,
                lang="en",
                created_at=ts,
                text=text,
                user_id=f"user-{rng.randint(1, 50):03d}",
                retweet_of=retweet_of,
                reply_to=reply_to,
                coords=coords,
            )
            emitted.append(rid)


def open_stream(
    source: StreamSource,
    dictionary: HazardDictionary,
    clock: Clock | None = None,
    langs: frozenset[str] | None = None,
) -> TweetStream:
    """Stream of dictionary-matching records from a replay or synthetic
    source. FileReplay preserves file order; Synthetic is deterministic
    under a fixed seed with non-decreasing timestamps."""
    if source.kind is SourceKind.FILE_REPLAY and source.path is None:
        raise SourceUnavailable("file replay needs a path")
    return TweetStream(source, dictionary, clock=clock, langs=langs)
