"""In-process message relay and geo-sharded document store.

The broker moves (tweet, topic) envelopes from the pipeline to consumer
groups with per-topic FIFO from a single producer and at-least-once
delivery: polled envelopes that are not acknowledged in time are
redelivered with a bumped attempt count. Consumers absorb duplicates by
appending idempotently to their topic collections, which yields
exactly-once effects without exactly-once machinery.

The store routes documents to shards by the geohash prefix of their
location (unresolvable locations go to a designated overflow shard) and
can wrap every shard in a three-member replica set: writes need a
majority, one dead replica loses nothing, and a revived replica resyncs
from a live peer.
"""

from __future__ import annotations

import json
import os
import struct
import threading
import zlib
from copy import deepcopy
from dataclasses import dataclass, replace
from pathlib import Path

from . import geohash
from .clock import Clock, SystemClock

__all__ = [
    "Envelope",
    "Broker",
    "Consumer",
    "TopicCollection",
    "ShardRouter",
    "DocumentStore",
    "BrokerStopped",
    "QueueFull",
    "InvalidTopic",
    "UnknownTopic",
    "RebalanceInProgress",
    "ShardUnavailable",
    "UnknownKey",
    "QuorumLost",
]


class BrokerStopped(RuntimeError):
    pass


class QueueFull(RuntimeError):
    pass


class InvalidTopic(ValueError):
    pass


class UnknownTopic(KeyError):
    pass


class RebalanceInProgress(RuntimeError):
    pass


class ShardUnavailable(RuntimeError):
    pass


class UnknownKey(KeyError):
    pass


class QuorumLost(RuntimeError):
    pass


@dataclass(frozen=True)
class Envelope:
    tweet_id: str
    topic: int
    geolocation: tuple[float, float] | None
    enqueued_at: float
    attempts: int = 0
    offset: int = -1  # assigned by the broker on append

    def to_json(self) -> str:
        return json.dumps(
            {
                "tweet_id": self.tweet_id,
                "topic": self.topic,
                "lat": self.geolocation[0] if self.geolocation else None,
                "lon": self.geolocation[1] if self.geolocation else None,
                "enqueued_at": self.enqueued_at,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, payload: str, offset: int) -> "Envelope":
        obj = json.loads(payload)
        geo = None
        if obj["lat"] is not None and obj["lon"] is not None:
            geo = (obj["lat"], obj["lon"])
        return cls(
            tweet_id=obj["tweet_id"], topic=obj["topic"], geolocation=geo,
            enqueued_at=obj["enqueued_at"], offset=offset,
        )


class _Group:
    def __init__(self):
        self.cursor = 0
        self.acked: set[int] = set()
        self.ack_floor = 0
        self.in_flight: dict[int, tuple[float, int]] = {}  # offset -> (deadline, attempts)
        self.needs_rebalance_notice: set[int] = set()  # consumer ids to bounce once
        self.members: set[int] = set()


class _Partition:
    def __init__(self):
        self.entries: list[Envelope] = []
        self.groups: dict[str, _Group] = {}
        self.lock = threading.Lock()

    def backlog(self) -> int:
        if not self.groups:
            return len(self.entries)
        floor = min(g.ack_floor for g in self.groups.values())
        return len(self.entries) - floor


class Broker:
    """Per-topic partitions with consumer groups; optionally durable.

    Durable mode appends `[u32 len][json envelope]` frames to one log
    file per partition before acknowledging the producer; recover() reads
    them back so no acknowledged envelope is ever lost.
    """

    def __init__(
        self,
        num_topics: int,
        clock: Clock | None = None,
        capacity: int = 100_000,
        redelivery_timeout: float = 30.0,
        log_dir: str | None = None,
        fsync: bool = False,
    ):
        if num_topics < 1:
            raise ValueError("need at least one topic")
        self.num_topics = num_topics
        self.clock = clock or SystemClock()
        self.capacity = capacity
        self.redelivery_timeout = redelivery_timeout
        self.fsync = fsync
        self._partitions = [_Partition() for _ in range(num_topics)]
        self._stopped = False
        self._log_dir = Path(log_dir) if log_dir else None
        self._log_files = {}
        if self._log_dir:
            self._log_dir.mkdir(parents=True, exist_ok=True)
            for t in range(num_topics):
                path = self._log_dir / f"partition_{t}.log"
                self._log_files[t] = open(path, "ab")

    @classmethod
    def recover(cls, log_dir: str, num_topics: int, **kwargs) -> "Broker":
        """Rebuild partitions from the durable logs; group cursors restart
        at zero (duplicates are the consumer's job to absorb)."""
        broker = cls(num_topics, log_dir=None, **kwargs)
        for t in range(num_topics):
            path = Path(log_dir) / f"partition_{t}.log"
            if not path.exists():
                continue
            data = path.read_bytes()
            pos = 0
            while pos + 4 <= len(data):
                (length,) = struct.unpack(">I", data[pos : pos + 4])
                frame = data[pos + 4 : pos + 4 + length]
                if len(frame) < length:
                    break  # torn tail write: not acknowledged, drop
                env = Envelope.from_json(frame.decode("utf-8"),
                                         offset=len(broker._partitions[t].entries))
                broker._partitions[t].entries.append(env)
                pos += 4 + length
        return broker

    def publish(self, env: Envelope) -> int:
        """Durably enqueue; returns the assigned offset (the ack)."""
        if self._stopped:
            raise BrokerStopped("broker is stopped")
        if not (0 <= env.topic < self.num_topics):
            raise InvalidTopic(f"topic {env.topic} outside [0, {self.num_topics})")
        part = self._partitions[env.topic]
        with part.lock:
            if part.backlog() >= self.capacity:
                raise QueueFull(f"partition {env.topic} backlog at capacity")
            offset = len(part.entries)
            stamped = replace(env, offset=offset, attempts=0)
            if env.topic in self._log_files:
                frame = stamped.to_json().encode("utf-8")
                f = self._log_files[env.topic]
                f.write(struct.pack(">I", len(frame)) + frame)
                f.flush()
                if self.fsync:
                    os.fsync(f.fileno())
            part.entries.append(stamped)
        return offset

    def consume(self, topic: int, group: str) -> "Consumer":
        if not (0 <= topic < self.num_topics):
            raise UnknownTopic(f"topic {topic}")
        part = self._partitions[topic]
        consumer = Consumer(self, topic, group)
        with part.lock:
            grp = part.groups.get(group)
            if grp is None:
                grp = part.groups[group] = _Group()
            else:
                # ownership handover: existing members get bounced once
                grp.needs_rebalance_notice = set(grp.members)
            grp.members.add(id(consumer))
        return consumer

    def stop(self) -> None:
        self._stopped = True
        for f in self._log_files.values():
            f.close()

    def topic_depth(self, topic: int) -> int:
        return len(self._partitions[topic].entries)


class Consumer:
    """One group member; poll/ack cycle with redelivery on timeout."""

    def __init__(self, broker: Broker, topic: int, group: str):
        self._broker = broker
        self.topic = topic
        self.group = group

    def poll(self) -> Envelope | None:
        part = self._broker._partitions[self.topic]
        now = self._broker.clock.now()
        with part.lock:
            grp = part.groups[self.group]
            if id(self) in grp.needs_rebalance_notice:
                grp.needs_rebalance_notice.discard(id(self))
                raise RebalanceInProgress(f"group {self.group} rebalancing")
            # expired in-flight deliveries first
            for offset, (deadline, attempts) in sorted(grp.in_flight.items()):
                if deadline <= now:
                    grp.in_flight[offset] = (
                        now + self._broker.redelivery_timeout,
                        attempts + 1,
                    )
                    return replace(part.entries[offset], attempts=attempts + 1)
            while grp.cursor < len(part.entries):
                offset = grp.cursor
                grp.cursor += 1
                if offset in grp.acked:
                    continue
                grp.in_flight[offset] = (now + self._broker.redelivery_timeout, 1)
                return replace(part.entries[offset], attempts=1)
        return None

    def ack(self, env: Envelope) -> None:
        part = self._broker._partitions[self.topic]
        with part.lock:
            grp = part.groups[self.group]
            grp.in_flight.pop(env.offset, None)
            grp.acked.add(env.offset)
            while grp.ack_floor in grp.acked:
                grp.ack_floor += 1


class TopicCollection:
    """Per-topic (tweet_id, geolocation) lists with idempotent append."""

    def __init__(self):
        self._by_topic: dict[int, dict[str, tuple[float, float] | None]] = {}
        self._lock = threading.Lock()

    def append(self, topic: int, tweet_id: str, geo: tuple[float, float] | None) -> bool:
        with self._lock:
            coll = self._by_topic.setdefault(topic, {})
            if tweet_id in coll:
                return False
            coll[tweet_id] = geo
            return True

    def pairs(self, topic: int) -> list[tuple[str, tuple[float, float] | None]]:
        with self._lock:
            return list(self._by_topic.get(topic, {}).items())

    def count(self, topic: int) -> int:
        with self._lock:
            return len(self._by_topic.get(topic, {}))

    def topics(self) -> list[int]:
        with self._lock:
            return sorted(self._by_topic)


class ShardRouter:
    """Deterministic geohash-prefix shard assignment.

    Resolvable locations hash their precision-length geohash cell to one
    of `shard_count` shards; anything unresolvable lands on the overflow
    shard (index shard_count).
    """

    def __init__(self, shard_count: int = 4, precision: int = 4):
        if shard_count < 1:
            raise ValueError("shard_count must be >= 1")
        self.shard_count = shard_count
        self.precision = precision

    @property
    def overflow_shard(self) -> int:
        return self.shard_count

    def route(self, geo: tuple[float, float] | None) -> int:
        if geo is None:
            return self.overflow_shard
        lat, lon = geo
        cell = geohash.encode(lat, lon, self.precision)
        return zlib.crc32(cell.encode("ascii")) % self.shard_count


class _Replica:
    def __init__(self):
        self.data: dict[str, dict[str, dict]] = {}
        self.alive = True

    def put(self, collection: str, key: str, doc: dict) -> None:
        self.data.setdefault(collection, {})[key] = doc

    def fingerprint(self) -> str:
        return json.dumps(self.data, sort_keys=True)


class _ReplicaSet:
    """Three synchronous copies; majority required for writes."""

    def __init__(self, size: int = 3):
        self.replicas = [_Replica() for _ in range(size)]
        self.lock = threading.Lock()

    def alive_count(self) -> int:
        return sum(r.alive for r in self.replicas)

    def put(self, collection: str, key: str, doc: dict) -> None:
        with self.lock:
            if self.alive_count() < (len(self.replicas) // 2 + 1):
                raise QuorumLost("majority of replicas down")
            for r in self.replicas:
                if r.alive:
                    r.put(collection, key, doc)

    def get(self, collection: str, key: str):
        with self.lock:
            for r in self.replicas:
                if r.alive:
                    return r.data.get(collection, {}).get(key)
            raise ShardUnavailable("all replicas down")

    def count(self, collection: str) -> int:
        with self.lock:
            for r in self.replicas:
                if r.alive:
                    return len(r.data.get(collection, {}))
            raise ShardUnavailable("all replicas down")

    def collections(self) -> list[str]:
        with self.lock:
            for r in self.replicas:
                if r.alive:
                    return sorted(r.data)
            raise ShardUnavailable("all replicas down")

    def items(self, collection: str):
        with self.lock:
            for r in self.replicas:
                if r.alive:
                    return sorted(r.data.get(collection, {}).items())
            raise ShardUnavailable("all replicas down")

    def kill(self, index: int) -> None:
        with self.lock:
            self.replicas[index].alive = False

    def revive(self, index: int) -> None:
        """Bring a replica back and resync it from a live peer."""
        with self.lock:
            donor = next((r for r in self.replicas if r.alive), None)
            target = self.replicas[index]
            if donor is not None and donor is not target:
                target.data = deepcopy(donor.data)
            target.alive = True


class DocumentStore:
    """Geo-sharded key/value collections (replication optional)."""

    def __init__(self, shard_count: int = 4, precision: int = 4,
                 replication: bool = False):
        self.router = ShardRouter(shard_count, precision)
        n_shards = shard_count + 1  # + overflow
        self.replication = replication
        if replication:
            self._shards: list = [_ReplicaSet() for _ in range(n_shards)]
        else:
            self._shards = [_Replica() for _ in range(n_shards)]
            self._locks = [threading.Lock() for _ in range(n_shards)]
        self._failed: set[int] = set()

    def _check(self, shard_id: int) -> None:
        if shard_id in self._failed:
            raise ShardUnavailable(f"shard {shard_id} failed (injected)")

    def put(self, collection: str, key: str,
            document: dict, geo: tuple[float, float] | None = None) -> int:
        """Route by geolocation (explicit arg, or lat/lon in the doc);
        returns the shard id as the acknowledgment."""
        if geo is None:
            lat, lon = document.get("lat"), document.get("lon")
            if lat is not None and lon is not None:
                geo = (lat, lon)
        shard_id = self.router.route(geo)
        self._check(shard_id)
        shard = self._shards[shard_id]
        if self.replication:
            shard.put(collection, key, document)
        else:
            with self._locks[shard_id]:
                shard.put(collection, key, document)
        return shard_id

    def get(self, collection: str, key: str) -> dict:
        for shard_id, shard in enumerate(self._shards):
            self._check(shard_id)
            if self.replication:
                doc = shard.get(collection, key)
            else:
                with self._locks[shard_id]:
                    doc = shard.data.get(collection, {}).get(key)
            if doc is not None:
                return doc
        raise UnknownKey(key)

    def count(self, collection: str) -> int:
        total = 0
        for shard_id, shard in enumerate(self._shards):
            self._check(shard_id)
            if self.replication:
                total += shard.count(collection)
            else:
                with self._locks[shard_id]:
                    total += len(shard.data.get(collection, {}))
        return total

    def scan_count(self, collection: str) -> int:
        """Count by scanning every entry (an unindexed count query)."""
        total = 0
        for shard_id, shard in enumerate(self._shards):
            self._check(shard_id)
            if self.replication:
                total += shard.count(collection)
                continue
            with self._locks[shard_id]:
                for _key in shard.data.get(collection, {}):
                    total += 1
        return total

    def match_count(self, collection_a: str, collection_b: str) -> int:
        """Count collection_b keys whose id also exists in collection_a,
        shard-locally (both are routed by the same geolocation). This is
        the topic-count query: match tweet ids across collections."""
        total = 0
        for shard_id, shard in enumerate(self._shards):
            self._check(shard_id)
            if self.replication:
                with shard.lock:
                    replica = next((r for r in shard.replicas if r.alive), None)
                    if replica is None:
                        raise ShardUnavailable("all replicas down")
                    a = replica.data.get(collection_a, {})
                    for key in replica.data.get(collection_b, {}):
                        if key in a:
                            total += 1
                continue
            with self._locks[shard_id]:
                a = shard.data.get(collection_a, {})
                for key in shard.data.get(collection_b, {}):
                    if key in a:
                        total += 1
        return total

    def shard_counts(self, collection: str) -> list[int]:
        out = []
        for shard_id, shard in enumerate(self._shards):
            if self.replication:
                out.append(shard.count(collection))
            else:
                with self._locks[shard_id]:
                    out.append(len(shard.data.get(collection, {})))
        return out

    def replica_set(self, shard_id: int) -> _ReplicaSet:
        if not self.replication:
            raise RuntimeError("replication disabled")
        return self._shards[shard_id]

    def fail_shard(self, shard_id: int) -> None:
        self._failed.add(shard_id)

    def restore_shard(self, shard_id: int) -> None:
        self._failed.discard(shard_id)

    def snapshot(self, out_dir: str) -> list[str]:
        """One `<collection>.<shard>.jsonl` file per collection/shard."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for shard_id, shard in enumerate(self._shards):
            if self.replication:
                collections = shard.collections()
            else:
                with self._locks[shard_id]:
                    collections = sorted(shard.data)
            for coll in collections:
                if self.replication:
                    items = shard.items(coll)
                else:
                    with self._locks[shard_id]:
                        items = sorted(shard.data.get(coll, {}).items())
                path = out / f"{coll}.{shard_id}.jsonl"
                with open(path, "w", encoding="utf-8") as f:
                    for key, doc in items:
                        f.write(json.dumps({"key": key, "doc": doc}, sort_keys=True) + "\n")
                written.append(str(path))
        return written
