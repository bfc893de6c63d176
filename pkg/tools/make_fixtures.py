"""Generate the shipped test fixtures (deterministic, seeded).

Run from the repo root: python tools/make_fixtures.py
Writes JSONL/TSV fixtures under tests/data/ plus a meta sidecar with the
counts and metric values measured at generation time.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

OUT = ROOT / "tests" / "data"

# Three hydrological themes; texts mix mostly one theme with light
# contamination so topics separate but coherence stays mid-range.
THEME_WORDS = [
    ["rain", "wind", "temperature", "humidity", "weather", "forecast",
     "drizzle", "cloudburst", "rainfall", "downpour"],
    ["hurricane", "water", "overflow", "rescue", "evacuation", "shelter",
     "authority", "sandbag", "levee", "relief"],
    ["thunderstorm", "severe", "warning", "storm", "tornado", "county",
     "siren", "alert", "lightning", "hail"],
]
# Peaked within-theme distribution: a few words dominate so the fitted
# model predicts tokens tightly (low perplexity).
THEME_PROFILE = np.array([0.45, 0.25, 0.13, 0.07, 0.04, 0.03, 0.015, 0.008,
                          0.004, 0.003])

# a tiny pool of very frequent neutral words: cheap to predict (low
# perplexity cost) but they crowd into every topic's top words and
# dilute the within-topic NPMI structure
FILLER = ["report", "update", "local", "area"]

SITES = [
    ("london", 51.5074, -0.1278),
    ("paris", 48.8566, 2.3522),
    ("houston", 29.7604, -95.3698),
    ("jakarta", -6.2088, 106.8456),
]


def make_hydro(n_docs: int = 2400, seed: int = 20240501) -> dict:
    rng = np.random.default_rng(seed)
    lines = []
    ts = 1_680_000_000_000
    for i in range(n_docs):
        theme = int(rng.integers(0, 3))
        n_theme = int(rng.integers(8, 12))
        words = list(rng.choice(THEME_WORDS[theme], size=n_theme, p=THEME_PROFILE))
        # cross-theme contamination + filler keep coherence mid-range
        if rng.random() < 0.45:
            other = (theme + int(rng.integers(1, 3))) % 3
            words += list(rng.choice(THEME_WORDS[other], size=1, p=THEME_PROFILE))
        words += list(rng.choice(FILLER, size=int(rng.integers(1, 3))))
        perm = rng.permutation(len(words))
        text = " ".join(words[j] for j in perm)

        site = SITES[int(rng.integers(0, len(SITES)))]
        lat = site[1] + float(rng.uniform(-0.04, 0.04))
        lon = site[2] + float(rng.uniform(-0.04, 0.04))
        ts += int(rng.integers(50, 2000))
        rec = {
            "id": f"hydro-{i:05d}",
            "lang": "en",
            "created_at": ts,
            "text": text,
            "user_id": f"u{int(rng.integers(1, 400)):04d}",
            "retweet_of": None,
            "reply_to": None,
            "lat": round(lat, 6),
            "lon": round(lon, 6),
            "place_bbox": None,
        }
        roll = rng.random()
        if roll < 0.10:  # place bbox instead of device coords
            d = 0.02
            rec["place_bbox"] = [[round(lat - d, 6), round(lon - d, 6)],
                                 [round(lat - d, 6), round(lon + d, 6)],
                                 [round(lat + d, 6), round(lon + d, 6)],
                                 [round(lat + d, 6), round(lon - d, 6)]]
            rec["lat"] = rec["lon"] = None
        elif roll < 0.14:  # location only in the text (gazetteer path)
            rec["text"] = f"{text} in {site[0]}"
            rec["lat"] = rec["lon"] = None
        if i > 0 and rng.random() < 0.25:
            target = f"hydro-{int(rng.integers(0, i)):05d}"
            if rng.random() < 0.5:
                rec["retweet_of"] = target
            else:
                rec["reply_to"] = target
        lines.append(json.dumps(rec, sort_keys=True))
    path = OUT / "hydro_fixture.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"n_docs": n_docs, "seed": seed, "path": str(path)}


# Texts share a heavy core vocabulary per theme so two topics separate
# decisively even on a 20-record batch.
TOPIC_A_TEXTS = [  # flood / rain theme: core rain, flood, water, river
    "Heavy rain and flood, river water rising fast",
    "Flood water everywhere after the rain, river overflow",
    "Rain flood warning, river water levels rising",
    "Flooded streets, rain water pouring toward the river",
    "River flood peak, rain water covers the quay",
]
TOPIC_B_TEXTS = [  # storm / wind theme: core storm, wind, damage
    "Violent storm winds damage roofs across town",
    "Storm wind gusts damage power lines",
    "Wind storm damage, debris across the district",
    "Severe storm winds, damage to houses",
    "Storm damage spreads as wind gusts strengthen",
]
FAKE_TEXT = "Storm wind hoax, fabricated damage stories spreading online"

LONDON = (51.5074, -0.1278)
PARIS = (48.8566, 2.3522)


def make_e2e() -> dict:
    rng = np.random.default_rng(99)
    rows = []
    ts = 1_700_000_000_000

    def rec(rid, text, base, jitter_i, retweet_of=None, reply_to=None):
        nonlocal ts
        ts += 1000
        dlat = [0.005, -0.004, 0.009, -0.008, 0.002][jitter_i % 5]
        dlon = [-0.006, 0.007, -0.002, 0.004, -0.009][jitter_i % 5]
        return {
            "id": rid, "lang": "en", "created_at": ts, "text": text,
            "user_id": f"user-{rid}", "retweet_of": retweet_of,
            "reply_to": reply_to,
            "lat": round(base[0] + dlat, 6), "lon": round(base[1] + dlon, 6),
            "place_bbox": None,
        }

    for i in range(5):
        rows.append(rec(f"la{i+1}", TOPIC_A_TEXTS[i], LONDON, i,
                        retweet_of="la1" if i == 1 else None,
                        reply_to="la1" if i == 2 else None))
    for i in range(5):
        rows.append(rec(f"lb{i+1}", TOPIC_B_TEXTS[i], LONDON, i,
                        retweet_of="lb1" if i == 1 else None))
    for i in range(5):
        rows.append(rec(f"pa{i+1}", TOPIC_A_TEXTS[(i + 2) % 5], PARIS, i,
                        retweet_of="pa1" if i == 1 else None,
                        reply_to="la1" if i == 2 else None))
    for i in range(4):
        rows.append(rec(f"pb{i+1}", TOPIC_B_TEXTS[(i + 1) % 5], PARIS, i,
                        reply_to="pb1" if i == 1 else None))
    rows.append(rec("pf1", FAKE_TEXT, PARIS, 4, retweet_of="pb1"))

    path = OUT / "e2e_fixture.jsonl"
    path.write_text("\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n",
                    encoding="utf-8")
    return {"n_records": len(rows), "path": str(path)}


FAKE_MARKERS = ["hoax", "fabricated", "scam", "debunked", "staged"]
REAL_FILLER = ["rain", "flood", "storm", "wind", "rescue", "warning",
               "river", "water", "shelter", "overflow", "evacuation",
               "damage", "gust", "debris", "severe", "town"]


def make_fake_news_train(n_pairs: int = 40, seed: int = 42) -> dict:
    """Linearly separable toy set: fake iff a marker token appears.

    Each fake doc is paired with a real doc carrying the same filler
    words, so filler carries zero class signal by construction and only
    the markers discriminate."""
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n_pairs):
        words = list(rng.choice(REAL_FILLER, size=6))
        lines.append(f"real\t{' '.join(words)}")
        marked = list(words)
        marked.insert(int(rng.integers(0, len(marked))), "hoax")
        if rng.random() < 0.5:
            marked.append(FAKE_MARKERS[int(rng.integers(1, len(FAKE_MARKERS)))])
        lines.append(f"fake\t{' '.join(marked)}")
    path = OUT / "fake_news_train.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"n": 2 * n_pairs, "path": str(path)}


def make_synthetic_claims(n: int = 2000, seed: int = 17) -> dict:
    """Noisy two-class corpus with planted weak lexical signal: the
    per-class vocabularies overlap heavily, so a linear model lands well
    above chance but far from perfect (LIAR-difficulty stand-in)."""
    rng = np.random.default_rng(seed)
    shared = [f"common{i:02d}" for i in range(60)]
    fake_lean = [f"dubious{i:02d}" for i in range(15)]
    real_lean = [f"sourced{i:02d}" for i in range(15)]
    lines = []
    for i in range(n):
        fake = bool(rng.integers(0, 2))
        words = list(rng.choice(shared, size=12))
        lean = fake_lean if fake else real_lean
        anti = real_lean if fake else fake_lean
        # weak signal: slightly more own-lean than anti-lean words
        words += list(rng.choice(lean, size=int(rng.integers(1, 4))))
        if rng.random() < 0.6:
            words += list(rng.choice(anti, size=int(rng.integers(0, 3))))
        perm = rng.permutation(len(words))
        text = " ".join(words[j] for j in perm)
        lines.append(f"{'fake' if fake else 'real'}\t{text}")
    path = OUT / "synthetic_claims.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"n": n, "path": str(path)}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    meta = {
        "hydro": make_hydro(),
        "e2e": make_e2e(),
        "fake_news_train": make_fake_news_train(),
        "synthetic_claims": make_synthetic_claims(),
    }
    (OUT / "fixtures_meta.json").write_text(json.dumps(meta, indent=2) + "\n",
                                            encoding="utf-8")
    print(json.dumps(meta, indent=2))


if __name__ == "__main__":
    main()
