"""Geographic clustering of topic members into communities.

Takes the planted 20-record fixture, builds topic graphs, and runs
density clustering over great-circle distances: each (topic, area)
cluster is one community, evaluated with the three validity indices.
"""

from importlib import resources
from pathlib import Path

from hazcomm.communities import (
    calinski_harabasz,
    community_graphs,
    davies_bouldin,
    silhouette,
)
from hazcomm.corpus import SourceKind, StreamSource, load_dictionary, open_stream
from hazcomm.geoloc import load_gazetteer, resolve
from hazcomm.socialgraph import build_graph
from hazcomm.textprep import CleanDoc, build_matrix, preprocess
from hazcomm.topics import fit_batch, topic_graphs

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"
data = resources.files("hazcomm.data")

dictionary = load_dictionary(str(data.joinpath("hazards_hydro.dict")))
gazetteer = load_gazetteer(str(data.joinpath("gazetteer_minimal.tsv")))
stream = open_stream(
    StreamSource(SourceKind.FILE_REPLAY, path=str(DATA / "e2e_fixture.jsonl")),
    dictionary)
records = list(stream)

contents = {r.id: CleanDoc(r.id, preprocess(r.text)) for r in records}
locs = {r.id: resolve(r, gazetteer) for r in records}
graph = build_graph(records, contents, locs)

docs = [d for d in contents.values() if d.tokens]
vocab, _ = build_matrix(docs)
model = fit_batch(docs, k=2, vocab=vocab, passes=5)

for tg in topic_graphs([graph], model, eps_c=0.5):
    clusters = []
    comms = community_graphs(tg, eps_km=50.0, min_pts=3)
    for c in comms:
        print(f"topic {c.topic} area {c.area_id}: {len(c.member_ids)} members "
              f"around ({c.centroid.lat:.3f}, {c.centroid.lon:.3f}), "
              f"radius {c.radius_km:.1f} km -> {', '.join(c.member_ids)}")
        clusters.append([tg.graph.nodes[i].loc for i in c.member_ids])
    if len(clusters) >= 2:  # validity is per-topic: areas of one clustering
        print(f"  topic {tg.topic} validity: "
              f"Davies-Bouldin {davies_bouldin(clusters):.4f} (lower better), "
              f"Calinski-Harabasz {calinski_harabasz(clusters):.3e} (higher better), "
              f"Silhouette {silhouette(clusters):.4f} (1.0 perfect)")
