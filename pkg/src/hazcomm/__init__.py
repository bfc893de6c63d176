"""hazcomm: geolocation-content community detection over hazard posts.

Stages, each usable on its own:

- corpus: dictionary-filtered ingestion from replayable/synthetic streams
- textprep: cleaning, stemming, normalized tf-idf
- geoloc: coordinate/bbox/gazetteer location resolution, haversine
- socialgraph: retweet/reply graph with connected components
- veracity: Real/Fake classification and graph filtering
- topics: online LDA, memberships, topic graphs, perplexity
- coherence: C_V topic coherence
- communities: DBSCAN geo-clustering and cluster validity metrics
- relay: pub/sub broker and geo-sharded replicated store
- gateway: pipeline orchestration, subscriptions, pins, liveness
- api: HTTP + server-sent-events surface
- bench: write/read scalability grid
"""

__version__ = "0.1.0"
