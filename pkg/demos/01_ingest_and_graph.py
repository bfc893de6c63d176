"""Dictionary-filtered ingestion and the retweet/reply social graph.

A synthetic seeded stream stands in for the live feed: records matching
the hydrological hazard dictionary pass, everything else is dropped, and
the survivors link into an undirected graph whose connected components
are the conversation threads.
"""

from importlib import resources

from hazcomm.corpus import SourceKind, StreamSource, load_dictionary, open_stream
from hazcomm.geoloc import load_gazetteer, resolve
from hazcomm.socialgraph import build_graph
from hazcomm.textprep import CleanDoc, preprocess

data = resources.files("hazcomm.data")
dictionary = load_dictionary(str(data.joinpath("hazards_hydro.dict")))
gazetteer = load_gazetteer(str(data.joinpath("gazetteer_minimal.tsv")))

print(f"dictionary '{dictionary.hazard_name}': "
      f"{len(dictionary.keywords)} keywords, {len(dictionary.hashtags)} hashtags")

stream = open_stream(StreamSource(SourceKind.SYNTHETIC, seed=7, count=300), dictionary)
records = list(stream)
print(f"stream: {stream.accepted} accepted, {stream.rejected} rejected, "
      f"{stream.malformed} malformed")

contents = {r.id: CleanDoc(r.id, preprocess(r.text)) for r in records}
locs = {r.id: resolve(r, gazetteer) for r in records}
resolved = sum(1 for loc in locs.values() if loc.resolved)
print(f"geolocation: {resolved}/{len(records)} records resolved")

graph = build_graph(records, contents, locs)
print(f"graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
      f"{len(graph.components)} components, {len(graph.dangling_refs)} dangling refs")

sizes = sorted((len(c) for c in graph.components), reverse=True)
print(f"largest components: {sizes[:8]}")

example = next(r for r in records if locs[r.id].resolved)
print(f"\nexample record {example.id}: {example.text!r}")
print(f"  tokens: {contents[example.id].tokens}")
print(f"  location: ({locs[example.id].lat:.3f}, {locs[example.id].lon:.3f}) "
      f"via {locs[example.id].source.value}")
