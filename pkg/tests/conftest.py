from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from hazcomm.corpus import SourceKind, StreamSource, load_dictionary, open_stream
from hazcomm.geoloc import load_gazetteer
from hazcomm.textprep import CleanDoc, preprocess

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def hydro_dict_path() -> str:
    return str(resources.files("hazcomm.data").joinpath("hazards_hydro.dict"))


@pytest.fixture(scope="session")
def hydro_dictionary(hydro_dict_path):
    return load_dictionary(hydro_dict_path)


@pytest.fixture(scope="session")
def gazetteer():
    return load_gazetteer(
        str(resources.files("hazcomm.data").joinpath("gazetteer_minimal.tsv"))
    )


@pytest.fixture(scope="session")
def hydro_records(hydro_dictionary):
    src = StreamSource(SourceKind.FILE_REPLAY, path=str(DATA / "hydro_fixture.jsonl"))
    return list(open_stream(src, hydro_dictionary))


@pytest.fixture(scope="session")
def hydro_docs(hydro_records):
    docs = [CleanDoc(r.id, preprocess(r.text)) for r in hydro_records]
    return [d for d in docs if d.tokens]


@pytest.fixture(scope="session")
def e2e_records(hydro_dictionary):
    src = StreamSource(SourceKind.FILE_REPLAY, path=str(DATA / "e2e_fixture.jsonl"))
    return list(open_stream(src, hydro_dictionary))


@pytest.fixture(scope="session")
def toy_fake_news_model():
    from hazcomm.veracity import load_labeled_tsv, train_linear

    texts, labels = load_labeled_tsv(str(DATA / "fake_news_train.tsv"))
    docs = [CleanDoc(str(i), preprocess(t)) for i, t in enumerate(texts)]
    return train_linear(docs, labels, split=0.7, seed=11)


@pytest.fixture(scope="session")
def hydro_model(hydro_docs):
    """The pinned fixture-evaluation fit: batch refit with restarts."""
    from hazcomm.textprep import build_matrix
    from hazcomm.topics import fit_batch

    vocab, _ = build_matrix(hydro_docs)
    return fit_batch(hydro_docs, 3, vocab, passes=5)
