"""End-to-end orchestration and the subscriber-facing hub.

The pipeline composes the four stages per micro-batch: social graph
construction, veracity filtering, topic graphs, then geographic
communities, publishing (tweet, topic) envelopes to the relay and pin
updates to the hub. All clocks are injected; retention, liveness and
retrain intervals shrink to milliseconds in tests.
"""

from __future__ import annotations

import hashlib
import json
import queue
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .clock import Clock, SystemClock
from .communities import CommunityGraph, community_graphs
from .corpus import TweetRecord, Veracity, record_to_json
from .geoloc import Gazetteer, GeoPoint, resolve
from .relay import Broker, DocumentStore, Envelope, TopicCollection
from .socialgraph import build_graph
from .textprep import CleanDoc, preprocess
from .topics import TopicModel, fit_online, topic_graphs
from .veracity import LinearFakeNewsModel, VeracityVerdict, classify, filter_graph

__all__ = [
    "PipelineConfig",
    "Subscription",
    "Pin",
    "UnknownTopic",
    "UnknownUser",
    "Hub",
    "Pipeline",
    "SourceSupervisor",
    "bench_once",
    "community_report",
]


class UnknownTopic(KeyError):
    pass


class UnknownUser(KeyError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 3
    eps_c: float = 0.5
    eps_l_km: float = 50.0
    min_pts: int = 3
    batch_size: int = 64
    batch_cadence_s: float = 5.0
    retrain_interval_s: float = 3600.0
    liveness_interval_s: float = 30.0
    pin_retention_s: float = 24 * 3600.0
    link_window_s: float = 24 * 3600.0
    topic_seed: int = 7
    classifier_seed: int = 11
    shard_count: int = 4
    geohash_precision: int = 4
    queue_capacity: int = 100_000
    redelivery_timeout_s: float = 30.0
    fit_passes: int = 5
    # batch-retrain schedule: tau0=1 lets a from-scratch refit take full
    # natural-gradient steps; the streaming default (1024) is for long
    # minibatch sequences. Restarts guard against bad topic inits.
    retrain_tau0: float = 1.0
    topic_restarts: int = 3
    olda_alpha: float | str = "auto"
    olda_eta: float | str = "auto"

    def __post_init__(self):
        if self.k < 1 or self.min_pts < 1:
            raise ValueError("k and min_pts must be >= 1")
        if not (0.0 < self.eps_c <= 1.0):
            raise ValueError("eps_c must be in (0, 1]")
        for name in ("eps_l_km", "retrain_interval_s", "liveness_interval_s",
                     "pin_retention_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_json(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as f:
            return cls(**json.load(f))


@dataclass(frozen=True)
class Subscription:
    user_id: str
    topics: frozenset[int]
    bbox: tuple[tuple[float, float], tuple[float, float]] | None  # (SW, NE)
    created_at: float

    def __post_init__(self):
        if not self.topics:
            raise ValueError("subscription needs at least one topic")
        if self.bbox is not None:
            (s, w), (n, e) = self.bbox
            if s > n or w > e:
                raise ValueError("bbox corners must be (south-west, north-east)")

    def contains(self, lat: float, lon: float) -> bool:
        if self.bbox is None:
            return True
        (s, w), (n, e) = self.bbox
        return s <= lat <= n and w <= lon <= e


@dataclass(frozen=True)
class Pin:
    pin_id: str
    topic: int
    centroid: GeoPoint
    member_count: int
    last_updated: float
    member_ids: frozenset[str]


def _pin_id(topic: int, member_ids: Iterable[str]) -> str:
    digest = hashlib.sha1(
        (f"{topic}|" + ",".join(sorted(member_ids))).encode("utf-8")
    ).hexdigest()
    return f"pin-{topic}-{digest[:12]}"


class Hub:
    """Subscriptions, live pins, and the push-event fan-out.

    Listeners get bounded queues; a listener that falls behind is dropped
    (and counted) rather than ever blocking the pipeline. Events carry a
    subscribed flag so the UI can gray pins from non-subscribed topics.
    """

    def __init__(self, k: int, clock: Clock | None = None,
                 retention_s: float = 24 * 3600.0, listener_buffer: int = 1000):
        self.k = k
        self.clock = clock or SystemClock()
        self.retention_s = retention_s
        self.listener_buffer = listener_buffer
        self._subs: dict[str, Subscription] = {}
        self._listeners: dict[str, queue.Queue] = {}
        self._pins: dict[str, Pin] = {}
        self._latest_communities: dict[int, list[CommunityGraph]] = {}
        self._lock = threading.RLock()
        self.dropped_listeners = 0

    # -- subscriptions --------------------------------------------------

    def subscribe(self, user_id: str, topics: Iterable[int],
                  bbox=None) -> Subscription:
        topic_set = frozenset(int(t) for t in topics)
        for t in topic_set:
            if not (0 <= t < self.k):
                raise UnknownTopic(f"topic {t} outside [0, {self.k})")
        with self._lock:
            existing = self._subs.get(user_id)
            if existing is not None:
                topic_set = topic_set | existing.topics
                bbox = bbox if bbox is not None else existing.bbox
            sub = Subscription(user_id=user_id, topics=topic_set, bbox=bbox,
                               created_at=self.clock.now())
            self._subs[user_id] = sub
            return sub

    def unsubscribe(self, user_id: str, topic: int) -> None:
        """Drop one topic; pushes pin_removed for that topic's live pins
        so clients clear them."""
        with self._lock:
            sub = self._subs.get(user_id)
            if sub is None:
                raise UnknownUser(user_id)
            if topic not in sub.topics:
                raise UnknownTopic(f"user {user_id} not subscribed to {topic}")
            for pin in list(self._pins.values()):
                if pin.topic == topic:
                    self._push_to(user_id, {
                        "type": "pin_removed",
                        "pin_id": pin.pin_id,
                        "topic": pin.topic,
                    })
            remaining = sub.topics - {topic}
            if remaining:
                self._subs[user_id] = replace(sub, topics=remaining)
            else:
                del self._subs[user_id]

    def subscription(self, user_id: str) -> Subscription | None:
        with self._lock:
            return self._subs.get(user_id)

    # -- push channel ----------------------------------------------------

    def attach_listener(self, user_id: str) -> queue.Queue:
        with self._lock:
            q = queue.Queue(maxsize=self.listener_buffer)
            self._listeners[user_id] = q
            return q

    def detach_listener(self, user_id: str) -> None:
        with self._lock:
            self._listeners.pop(user_id, None)

    def _push_to(self, user_id: str, event: dict) -> None:
        q = self._listeners.get(user_id)
        if q is None:
            return
        try:
            q.put_nowait(event)
        except queue.Full:
            del self._listeners[user_id]
            self.dropped_listeners += 1

    def _fan_out(self, pin: Pin, removed: bool = False) -> None:
        for user_id, sub in self._subs.items():
            if not sub.contains(pin.centroid.lat, pin.centroid.lon):
                continue
            if removed:
                event = {"type": "pin_removed", "pin_id": pin.pin_id,
                         "topic": pin.topic}
            else:
                event = {
                    "type": "pin_upsert",
                    "pin_id": pin.pin_id,
                    "topic": pin.topic,
                    "lat": pin.centroid.lat,
                    "lon": pin.centroid.lon,
                    "member_count": pin.member_count,
                    "last_updated": pin.last_updated,
                    "subscribed": pin.topic in sub.topics,
                }
            self._push_to(user_id, event)

    # -- pin lifecycle -----------------------------------------------------

    def update_communities(self, topic: int,
                           communities: Sequence[CommunityGraph]) -> list[Pin]:
        """Upsert pins for a topic's fresh communities.

        A new community adopts an existing pin when member overlap
        reaches 50% (measured against the larger side), so a drifting
        community keeps its pin identity on the map.
        """
        now = self.clock.now()
        touched = []
        with self._lock:
            self._latest_communities[topic] = list(communities)
            existing = [p for p in self._pins.values() if p.topic == topic]
            for comm in communities:
                members = frozenset(comm.member_ids)
                best, best_overlap = None, 0.0
                for pin in existing:
                    inter = len(pin.member_ids & members)
                    overlap = inter / max(len(pin.member_ids), len(members))
                    if overlap > best_overlap:
                        best, best_overlap = pin, overlap
                if best is not None and best_overlap >= 0.5:
                    pin = Pin(best.pin_id, topic, comm.centroid, len(members),
                              now, members)
                    self._pins[best.pin_id] = pin
                else:
                    pid = _pin_id(topic, members)
                    pin = Pin(pid, topic, comm.centroid, len(members), now, members)
                    self._pins[pid] = pin
                touched.append(pin)
                self._fan_out(pin)
        return touched

    def expire_pins(self, now: float | None = None) -> list[str]:
        """Drop pins idle past retention; underlying records stay stored."""
        now = self.clock.now() if now is None else now
        removed = []
        with self._lock:
            for pid, pin in list(self._pins.items()):
                if now - pin.last_updated > self.retention_s:
                    del self._pins[pid]
                    self._fan_out(pin, removed=True)
                    removed.append(pid)
        return removed

    def pins(self, topic: int | None = None) -> list[Pin]:
        with self._lock:
            out = [p for p in self._pins.values()
                   if topic is None or p.topic == topic]
            return sorted(out, key=lambda p: p.pin_id)

    def communities(self, topic: int) -> list[CommunityGraph]:
        with self._lock:
            return list(self._latest_communities.get(topic, []))


def community_report(communities: Iterable[CommunityGraph]) -> str:
    """Deterministic JSON array for a batch of communities."""
    rows = []
    for c in sorted(communities, key=lambda c: (c.topic, c.area_id)):
        rows.append({
            "topic": c.topic,
            "area_id": c.area_id,
            "core_points": [[p.lat, p.lon] for p in c.core_points],
            "member_ids": list(c.member_ids),
            "centroid": [c.centroid.lat, c.centroid.lon],
            "radius_km": round(c.radius_km, 9),
        })
    return json.dumps(rows, sort_keys=True, separators=(",", ":"))


class Pipeline:
    """Micro-batch driver around the four analysis stages.

    State spans batches: a rolling record window for late retweet/reply
    linking, the online topic model (hot-swapped on retrain), and a
    published-pair set so each (tweet, topic) envelope goes out once.
    """

    def __init__(
        self,
        config: PipelineConfig,
        gazetteer: Gazetteer,
        clock: Clock | None = None,
        fake_news_model: LinearFakeNewsModel | None = None,
        remote_classifier=None,
        store: DocumentStore | None = None,
        broker: Broker | None = None,
        hub: Hub | None = None,
    ):
        self.config = config
        self.gazetteer = gazetteer
        self.clock = clock or SystemClock()
        self.fake_news_model = fake_news_model
        self.remote_classifier = remote_classifier
        self.store = store or DocumentStore(config.shard_count,
                                            config.geohash_precision)
        self.broker = broker or Broker(config.k, clock=self.clock,
                                       capacity=config.queue_capacity,
                                       redelivery_timeout=config.redelivery_timeout_s)
        self.hub = hub or Hub(config.k, clock=self.clock,
                              retention_s=config.pin_retention_s)
        self.topic_collection = TopicCollection()
        self._consumers = [self.broker.consume(t, "pipeline") for t in range(config.k)]

        self._window: dict[str, TweetRecord] = {}
        self._contents: dict[str, CleanDoc] = {}
        self._locs: dict[str, GeoPoint] = {}
        self._published: set[tuple[str, int]] = set()
        self._all_docs: list[CleanDoc] = []
        self.model: TopicModel | None = None
        self.model_generation = 0
        self._last_retrain = self.clock.now()
        self.batches = 0
        self.dead_letter_path: str | None = None
        self.quarantined_batches = 0
        self.last_report = "[]"

    # -- classifier plumbing ---------------------------------------------

    def _classify_doc(self, doc: CleanDoc) -> VeracityVerdict:
        if self.remote_classifier is not None:
            raw = self._window[doc.doc_id].text
            verdict = self.remote_classifier.classify(doc.doc_id, raw)
            if verdict is not None:
                return verdict
            return VeracityVerdict(doc.doc_id, Veracity.REAL, 0.0)
        if self.fake_news_model is not None:
            return classify(doc, self.fake_news_model)
        return VeracityVerdict(doc.doc_id, Veracity.REAL, 0.0)

    def swap_fake_news_model(self, model: LinearFakeNewsModel) -> None:
        """Atomic replacement; in-flight classifications keep the old ref."""
        self.fake_news_model = model

    # -- topic model lifecycle ---------------------------------------------

    def _refit_model(self) -> TopicModel:
        """Train a successor snapshot from every stored clean document."""
        from .textprep import build_matrix
        from .topics import fit_batch

        docs = [d for d in self._all_docs if d.tokens]
        if not docs:
            if self.model is not None:
                return self.model
            vocab, _ = build_matrix([CleanDoc("_", ("seed",))])
            return TopicModel.create(self.config.k, vocab,
                                     seed=self.config.topic_seed,
                                     alpha=self.config.olda_alpha,
                                     eta=self.config.olda_eta,
                                     tau0=self.config.retrain_tau0)
        vocab, _ = build_matrix(docs)
        seeds = [self.config.topic_seed + i
                 for i in range(max(1, self.config.topic_restarts))]
        return fit_batch(
            docs, self.config.k, vocab, seeds=seeds,
            passes=self.config.fit_passes,
            alpha=self.config.olda_alpha, eta=self.config.olda_eta,
            tau0=self.config.retrain_tau0,
        )

    def maybe_retrain(self, now: float | None = None) -> bool:
        """Background-retrain contract: refit from stored docs and swap."""
        now = self.clock.now() if now is None else now
        if now - self._last_retrain < self.config.retrain_interval_s:
            return False
        self.model = self._refit_model()
        self.model_generation += 1
        self._last_retrain = now
        return True

    # -- batch processing ---------------------------------------------------

    def process_batch(self, records: Sequence[TweetRecord]) -> list[CommunityGraph]:
        """SocialGraph -> veracity filter -> topic graphs -> communities."""
        if not records:
            return []
        now = self.clock.now()

        for rec in records:
            self._window[rec.id] = rec
            doc = CleanDoc(rec.id, preprocess(rec.text))
            self._contents[rec.id] = doc
            loc = resolve(rec, self.gazetteer)
            self._locs[rec.id] = loc
            self.store.put(
                "tweets", rec.id, json.loads(record_to_json(rec)),
                geo=(loc.lat, loc.lon) if loc.resolved else None,
            )
        self._evict_window()

        window_records = [self._window[i] for i in sorted(self._window)]
        graph = build_graph(window_records, self._contents, self._locs)

        verdicts: dict[str, VeracityVerdict] = {}

        def persist(verdict: VeracityVerdict) -> None:
            verdicts[verdict.doc_id] = verdict
            try:
                doc = self.store.get("tweets", verdict.doc_id)
            except Exception:
                return
            doc["veracity"] = verdict.label.value
            geo = None
            if doc.get("lat") is not None and doc.get("lon") is not None:
                geo = (doc["lat"], doc["lon"])
            loc = self._locs.get(verdict.doc_id)
            if geo is None and loc is not None and loc.resolved:
                geo = (loc.lat, loc.lon)
            self.store.put("tweets", verdict.doc_id, doc, geo=geo)

        cleaned = filter_graph([graph], self._classify_doc, on_verdict=persist)[0]

        # topics learn from clean content only; fake records stop here
        batch_clean = [
            self._contents[r.id] for r in records
            if r.id in cleaned.nodes and self._contents[r.id].tokens
        ]
        self._all_docs.extend(batch_clean)
        if self.model is None:
            self.model = self._refit_model()
        elif batch_clean:
            self.model = fit_online(self.model, batch_clean)

        tgs = topic_graphs([cleaned], self.model, self.config.eps_c)

        all_communities: list[CommunityGraph] = []
        for tg in tgs:
            for node_id in tg.graph.node_ids:
                pair = (node_id, tg.topic)
                if pair not in self._published:
                    loc = self._locs[node_id]
                    geo = (loc.lat, loc.lon) if loc.resolved else None
                    self.broker.publish(Envelope(
                        tweet_id=node_id, topic=tg.topic,
                        geolocation=geo, enqueued_at=now,
                    ))
                    self._published.add(pair)
            comms = community_graphs(tg, self.config.eps_l_km, self.config.min_pts)
            all_communities.extend(comms)
            self.hub.update_communities(tg.topic, comms)

        self._drain_relay()
        self.batches += 1
        self.last_report = community_report(all_communities)
        return all_communities

    def _drain_relay(self) -> None:
        """Consume our own group's envelopes into the topic collections
        (the consumer role: <topic, [(tweet_id, geolocation)]>)."""
        for consumer in self._consumers:
            while True:
                env = consumer.poll()
                if env is None:
                    break
                self.topic_collection.append(env.topic, env.tweet_id, env.geolocation)
                self.store.put(f"topic_{env.topic}", env.tweet_id,
                               {"lat": env.geolocation[0] if env.geolocation else None,
                                "lon": env.geolocation[1] if env.geolocation else None},
                               geo=env.geolocation)
                consumer.ack(env)

    def _evict_window(self) -> None:
        if not self._window:
            return
        horizon_ms = max(r.created_at for r in self._window.values()) \
            - int(self.config.link_window_s * 1000)
        for rid in [r.id for r in self._window.values() if r.created_at < horizon_ms]:
            del self._window[rid]

    def run_stream(
        self, records: Iterable[TweetRecord], batch_size: int | None = None
    ) -> Iterator[list[CommunityGraph]]:
        """Drive the pipeline over a stream in fixed-size micro-batches.

        A failing batch is retried once, then quarantined to the
        dead-letter file; the stream keeps going.
        """
        size = batch_size or self.config.batch_size
        batch: list[TweetRecord] = []
        for rec in records:
            batch.append(rec)
            if len(batch) >= size:
                yield self._process_with_retry(batch)
                batch = []
        if batch:
            yield self._process_with_retry(batch)

    def _process_with_retry(self, batch: list[TweetRecord]) -> list[CommunityGraph]:
        try:
            return self.process_batch(batch)
        except Exception as first_error:
            try:
                return self.process_batch(batch)
            except Exception:
                self.quarantined_batches += 1
                if self.dead_letter_path:
                    with open(self.dead_letter_path, "a", encoding="utf-8") as f:
                        f.write(json.dumps({
                            "batch": self.batches,
                            "error": repr(first_error),
                            "records": [record_to_json(r) for r in batch],
                        }) + "\n")
                return []


class SourceSupervisor:
    """Pumps a source into a queue and restarts it when it stalls.

    The checker wakes every interval; a pump that made no progress for a
    full interval while records remain is considered stalled and a fresh
    iterator is opened (the blocked pump thread is abandoned: Python
    offers no way to kill it).
    """

    def __init__(self, source_factory: Callable[[], Iterable[TweetRecord]],
                 clock: Clock | None = None, interval_s: float = 30.0,
                 buffer: int = 10_000):
        self.source_factory = source_factory
        self.clock = clock or SystemClock()
        self.interval_s = interval_s
        self.records: queue.Queue = queue.Queue(maxsize=buffer)
        self.restarts = 0
        self.checks = 0
        self.finished = False
        self._last_progress = self.clock.now()
        self._stop = threading.Event()
        self._pump_generation = 0
        self._checker: threading.Thread | None = None

    def start(self) -> None:
        self._spawn_pump()
        self._checker = threading.Thread(target=self._check_loop, daemon=True)
        self._checker.start()

    def _spawn_pump(self) -> None:
        self._pump_generation += 1
        gen = self._pump_generation
        self._last_progress = self.clock.now()

        def pump():
            try:
                for rec in self.source_factory():
                    if self._stop.is_set() or gen != self._pump_generation:
                        return
                    self.records.put(rec)
                    self._last_progress = self.clock.now()
                if gen == self._pump_generation:
                    self.finished = True
            except Exception:
                pass  # stalled/poisoned source: checker will reopen

        threading.Thread(target=pump, daemon=True).start()

    def _check_loop(self) -> None:
        while not self._stop.is_set() and not self.finished:
            self.clock.sleep(self.interval_s)
            if self._stop.is_set() or self.finished:
                return
            self.checks += 1
            if self.clock.now() - self._last_progress >= self.interval_s:
                self.restarts += 1
                self._spawn_pump()

    def stop(self) -> None:
        self._stop.set()

    def health_report(self) -> dict:
        return {
            "restarts": self.restarts,
            "checks": self.checks,
            "finished": self.finished,
            "queued": self.records.qsize(),
        }


def bench_once(
    store: DocumentStore,
    writers: int,
    readers: int,
    topic: int = 0,
    pool_size: int = 8,
    seed: int = 0,
) -> float:
    """Wall-clock seconds to run `writers` insert ops (tweet insert plus
    topic-collection update) and `readers` count queries concurrently.

    All tasks are submitted before the timer starts and released by one
    barrier event, so the measurement covers operation execution rather
    than pool spin-up.
    """
    if writers + readers == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    lats = rng.uniform(-60, 60, size=max(writers, 1))
    lons = rng.uniform(-180, 180, size=max(writers, 1))
    release = threading.Event()

    def write_op(i: int) -> None:
        release.wait()
        geo = (float(lats[i]), float(lons[i]))
        store.put("tweets", f"bench-{i}", {"text": f"t{i}", "lat": geo[0],
                                           "lon": geo[1]}, geo=geo)
        store.put(f"topic_{topic}", f"bench-{i}", {"lat": geo[0], "lon": geo[1]},
                  geo=geo)

    def read_op(_: int) -> int:
        release.wait()
        # the topic-count query: match topic-collection ids against the
        # tweets collection
        return store.match_count("tweets", f"topic_{topic}")

    import gc

    with ThreadPoolExecutor(max_workers=min(pool_size, writers + readers)) as pool:
        futures = [pool.submit(write_op, i) for i in range(writers)]
        futures += [pool.submit(read_op, i) for i in range(readers)]
        gc.collect()
        gc.disable()  # collector pauses would swamp sub-second cells
        try:
            start = time.perf_counter()
            release.set()
            for f in futures:
                f.result()
            elapsed = time.perf_counter() - start
        finally:
            gc.enable()
    return elapsed
