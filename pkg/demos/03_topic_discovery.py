"""Online topic modeling on the hydrological fixture corpus.

Fits the streaming LDA in mini-batches, prints the discovered topics with
their top words, infers mixtures for a few posts, and evaluates the model
with perplexity and C_V coherence.
"""

from importlib import resources
from pathlib import Path

from hazcomm.coherence import coherence_cv
from hazcomm.corpus import SourceKind, StreamSource, load_dictionary, open_stream
from hazcomm.textprep import CleanDoc, build_matrix, preprocess
from hazcomm.topics import fit_batch, infer, perplexity, top_words

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

dictionary = load_dictionary(
    str(resources.files("hazcomm.data").joinpath("hazards_hydro.dict")))
stream = open_stream(
    StreamSource(SourceKind.FILE_REPLAY, path=str(DATA / "hydro_fixture.jsonl")),
    dictionary)
records = list(stream)
docs = [d for d in (CleanDoc(r.id, preprocess(r.text)) for r in records) if d.tokens]
print(f"{len(docs)} documents after cleaning")

vocab, _ = build_matrix(docs)
model = fit_batch(docs, k=3, vocab=vocab, passes=5)
print(f"vocabulary {len(vocab)} stems; model updated {model.update_count} times\n")

for j, words in enumerate(top_words(model, 6)):
    line = "  ".join(f"{w} {p:.3f}" for w, p in words)
    print(f"topic {j}: {line}")

print()
for rec in records[:3]:
    ms = infer(model, CleanDoc(rec.id, preprocess(rec.text)))
    mix = ", ".join(f"t{j}={ms.theta[j]:.2f}" for j in range(model.k))
    print(f"{rec.text[:58]!r}\n  mixture: {mix}  members: {sorted(ms.members)}")

perp = perplexity(model, docs)
cv = coherence_cv(model, 10, docs)
print(f"\nperplexity {perp:.2f} (lower is better)  |  C_V coherence {cv:.3f}")
