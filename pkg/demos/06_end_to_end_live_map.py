"""The whole pipeline feeding a live subscriber.

Replays the planted fixture through every stage, with one user subscribed
to a single topic: colored pin events arrive for that topic, gray ones
for the other, and simulated time then expires the pins.
"""

from importlib import resources
from pathlib import Path

from hazcomm.clock import ManualClock
from hazcomm.corpus import SourceKind, StreamSource, load_dictionary, open_stream
from hazcomm.gateway import Pipeline, PipelineConfig
from hazcomm.geoloc import load_gazetteer
from hazcomm.textprep import CleanDoc, preprocess
from hazcomm.veracity import load_labeled_tsv, train_linear

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"
data = resources.files("hazcomm.data")

dictionary = load_dictionary(str(data.joinpath("hazards_hydro.dict")))
gazetteer = load_gazetteer(str(data.joinpath("gazetteer_minimal.tsv")))

texts, labels = load_labeled_tsv(str(DATA / "fake_news_train.tsv"))
fn_model = train_linear(
    [CleanDoc(str(i), preprocess(t)) for i, t in enumerate(texts)],
    labels, split=0.7, seed=11).model

clock = ManualClock(1_000.0)
config = PipelineConfig(k=2, batch_size=32, min_pts=3)
pipeline = Pipeline(config, gazetteer, clock=clock, fake_news_model=fn_model)

inbox = pipeline.hub.attach_listener("ada")
pipeline.hub.subscribe("ada", [0])
print("user 'ada' subscribed to topic 0\n")

stream = open_stream(
    StreamSource(SourceKind.FILE_REPLAY, path=str(DATA / "e2e_fixture.jsonl")),
    dictionary)
for communities in pipeline.run_stream(stream):
    print(f"batch -> {len(communities)} communities")

print("\nada's event feed:")
while not inbox.empty():
    e = inbox.get_nowait()
    shade = "colored" if e.get("subscribed") else "gray"
    print(f"  {e['type']:11s} topic={e['topic']} pin={e['pin_id']} ({shade})")

print("\n24 hours pass with no updates...")
clock.advance(24 * 3600.0 + 1.0)
removed = pipeline.hub.expire_pins()
print(f"expired pins: {len(removed)}")
while not inbox.empty():
    e = inbox.get_nowait()
    print(f"  {e['type']:11s} pin={e['pin_id']}")

print(f"\nstored tweets: {pipeline.store.count('tweets')}; "
      f"fake record kept in store with verdict: "
      f"{pipeline.store.get('tweets', 'pf1')['veracity']}")
