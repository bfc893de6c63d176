"""The pub/sub relay and the sharded, replicated document store.

Shows at-least-once delivery with idempotent consumers (a consumer
"crashes" before acknowledging and the envelope comes back with a bumped
attempt count), geohash shard routing, and a replica set surviving the
loss of one member.
"""

from hazcomm.clock import ManualClock
from hazcomm.geohash import encode
from hazcomm.relay import Broker, DocumentStore, Envelope, QuorumLost, TopicCollection

clock = ManualClock()
broker = Broker(num_topics=2, clock=clock, redelivery_timeout=30.0)

for i in range(5):
    broker.publish(Envelope(tweet_id=f"t{i}", topic=0,
                            geolocation=(48.85 + i * 0.01, 2.35), enqueued_at=0.0))
print("published 5 envelopes on topic 0")

consumer = broker.consume(0, "alerts")
collection = TopicCollection()

first = consumer.poll()
collection.append(first.topic, first.tweet_id, first.geolocation)
print(f"polled {first.tweet_id} (attempt {first.attempts}) ... and crashed before ack")

clock.advance(31.0)  # redelivery timeout passes
again = consumer.poll()
print(f"redelivered {again.tweet_id} (attempt {again.attempts}); "
      f"duplicate absorbed: {not collection.append(again.topic, again.tweet_id, again.geolocation)}")
consumer.ack(again)

while (env := consumer.poll()) is not None:
    collection.append(env.topic, env.tweet_id, env.geolocation)
    consumer.ack(env)
print(f"collection now holds {collection.count(0)} unique tweets for topic 0\n")

store = DocumentStore(shard_count=4, replication=True)
paris, tokyo = (48.8566, 2.3522), (35.6762, 139.6503)
print(f"geohash cells: paris={encode(*paris, 4)} tokyo={encode(*tokyo, 4)}")
s1 = store.put("tweets", "p1", {"text": "rain", "lat": paris[0], "lon": paris[1]})
s2 = store.put("tweets", "t1", {"text": "storm", "lat": tokyo[0], "lon": tokyo[1]})
print(f"routed to shards {s1} and {s2}")

rs = store.replica_set(s1)
rs.kill(0)
print(f"killed replica 0 of shard {s1}; read-back still works: "
      f"{store.get('tweets', 'p1')['text']!r}")
rs.kill(1)
try:
    store.put("tweets", "p2", {"lat": paris[0], "lon": paris[1]}, geo=paris)
except QuorumLost as e:
    print(f"two replicas down -> writes rejected: {e}")
rs.revive(0)
rs.revive(1)
print("revived; replica states equal:",
      len({r.fingerprint() for r in rs.replicas}) == 1)
