"""Training the veracity classifier and stripping Fake nodes.

The in-core model is logistic regression over tf-idf. Here it trains on
the shipped toy corpus (fake posts carry marker words), then filters a
small graph: the fake node disappears along with its edges, splitting its
conversation thread.
"""

from pathlib import Path

from hazcomm.corpus import TweetRecord
from hazcomm.geoloc import UNRESOLVED
from hazcomm.socialgraph import build_graph
from hazcomm.textprep import CleanDoc, preprocess
from hazcomm.veracity import classify, filter_graph, load_labeled_tsv, train_linear

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

texts, labels = load_labeled_tsv(str(DATA / "fake_news_train.tsv"))
docs = [CleanDoc(str(i), preprocess(t)) for i, t in enumerate(texts)]
report = train_linear(docs, labels, split=0.7, seed=11)
print(f"trained on {report.train_size} docs; held-out accuracy "
      f"{report.test_accuracy:.3f} on {report.test_size} docs")

posts = {
    "a": "Flood water rising along the river, stay safe",
    "b": "Sharing: flood rescue teams heading downtown",
    "c": "The flood is a hoax, fabricated by the city council",
    "d": "Rain still falling, flood barriers holding",
}
records = []
links = {"b": ("a", None), "c": (None, "b"), "d": (None, "c")}
for i, (rid, text) in enumerate(posts.items()):
    rt, rp = links.get(rid, (None, None))
    records.append(TweetRecord(id=rid, lang="en", created_at=i, text=text,
                               user_id="u", retweet_of=rt, reply_to=rp))
contents = {r.id: CleanDoc(r.id, preprocess(r.text)) for r in records}
locs = {r.id: UNRESOLVED for r in records}
graph = build_graph(records, contents, locs)
print(f"\nbefore: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
      f"{len(graph.components)} component(s)")

for rid, doc in contents.items():
    verdict = classify(doc, report.model)
    print(f"  {rid}: {verdict.label.value:5s} (p_fake={verdict.score:.3f})  {posts[rid]!r}")

cleaned = filter_graph([graph], lambda d: classify(d, report.model))[0]
print(f"\nafter: {len(cleaned.nodes)} nodes, {len(cleaned.edges)} edges, "
      f"{len(cleaned.components)} component(s)")
print("surviving nodes:", ", ".join(cleaned.node_ids))
