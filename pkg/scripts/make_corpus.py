"""Generate the 60-query themed fixture corpus under fixtures/corpus.

Three themes of 20 queries each, each with its own typical SERP layout:

* general informational: featured snippet, ~5 PAA questions, 8 related searches
* sexual/racist vocabulary: image pack, almost no related searches, no shopping
* local places: local pack, knowledge panel, partners block, 8 related searches

Output is deterministic (fixed seed), so re-running must not change any file.
"""

import json
import random
from html import escape
from pathlib import Path

from serpintent.fetcher import raw_filename

ROOT = Path(__file__).resolve().parents[1] / "fixtures" / "corpus"
FETCHED_AT = "2024-02-01T08:30:00Z"

INFORMATIONAL = [
    "best tax tips", "new car prices", "best college for business", "health insurance for americans",
    "new house tax credit", "best university education", "business tax deadline", "car insurance tips",
    "new health rules for americans", "best house plans", "college tuition tax", "education grants for americans",
    "best car loans", "new business ideas", "small business health plans", "best new cars",
    "college education cost", "tax refund for americans", "best house buying tips", "new university rankings",
]
SEXUAL_RACISM = [
    "black lyrics", "black women", "nude women", "sex lyrics", "black sex", "nude lyrics", "women lyrics",
    "black nude", "sex women", "lyrics black song", "black women lyrics", "nude black", "women sex lyrics",
    "nude sex", "black song lyrics women", "lyrics nude", "sex black women", "women nude lyrics",
    "black lyrics video", "sex lyrics women",
]
LOCAL_PLACE = [
    "beach hotel", "park center", "school near park", "island club", "hotel sale", "beach club",
    "community center", "high school", "island hotel", "park hotel", "club beach island", "school center",
    "hotel beach sale", "central park", "island park", "beach school", "club hotel", "sale center",
    "beach park", "island center",
]

MANUAL_LABELS = ["informational", "navigational", "transactional"]


def _div(cls, inner):
    return f'<div class="{cls}">{inner}</div>'


def _natural(rng, query, n):
    rows = "".join(
        f'<div class="g"><a href="https://site{i}.example.com/"><h3>{escape(query.title())} result {i}</h3></a></div>'
        for i in range(1, n + 1)
    )
    return f'<div id="rso">{rows}</div>'


def _related(query, n):
    links = "".join(f"<a>{escape(query)} {i}</a>" for i in range(1, n + 1))
    return f'<div id="botstuff"><div class="related-searches">{links}</div></div>'


def _page(query, body, related):
    return (
        "<!DOCTYPE html>\n<html><head><title>"
        + escape(query)
        + ' - Search</title></head><body><div id="search">'
        + body
        + "</div>"
        + related
        + "</body></html>\n"
    )


def _paa(n):
    return _div("people-also-ask", _div("paa-heading", "People also ask")
                + "".join(_div("related-question", f"Question {i}?") for i in range(n)))


def informational_page(rng, query):
    parts = []
    if rng.random() < 0.3:
        parts.append(_div("content-nav-bar", "".join(f'<a class="nav-entry">tab {i}</a>' for i in range(4))))
    if rng.random() < 0.85:
        parts.append(_div("featured-snippet", f"<h3><a href=\"https://answers.example.com/\">{escape(query)}</a></h3>"
                          + _div("snippet-text", "A direct answer.")))
    if rng.random() < 0.85:
        paa = rng.choice([3, 4, 5, 6, 7])
        parts.append(_paa(paa))
    if rng.random() < 0.5:
        parts.append(_div("shopping-ads", "".join(_div("product-offer", f"Offer {i}") for i in range(3))))
    parts.append(_natural(rng, query, rng.choice([8, 9, 10])))
    if rng.random() < 0.15:
        parts.append(_div("image-pack", "".join(_div("image-caption", f"image {i}") for i in range(4))))
    return _page(query, "".join(parts), _related(query, rng.choice([6, 8, 8, 8])))


def sexual_racism_page(rng, query):
    parts = []
    if rng.random() < 0.9:
        parts.append(_div("image-pack", "".join(_div("image-caption", f"image {i}") for i in range(4))))
    if rng.random() < 0.2:
        parts.append(_div("video-carousel", "".join(_div("video", f"clip {i}") for i in range(3))))
    if rng.random() < 0.2:
        parts.append(_paa(rng.choice([1, 2])))
    parts.append(_natural(rng, query, rng.choice([6, 8, 10])))
    related = rng.choice([2, 3]) if rng.random() < 0.15 else 0
    return _page(query, "".join(parts), _related(query, related) if related else "")


def local_page(rng, query):
    parts = []
    if rng.random() < 0.4:
        parts.append(_div("map-block", _div("map-title", "Map") + '<a class="map-link" href="https://maps.example.com/">Map</a>'))
    if rng.random() < 0.9:
        parts.append(_div("local-pack", "".join(_div("local-place", f"Place {i}") for i in range(3))))
    if rng.random() < 0.5:
        parts.append(_div("shopping-ads", "".join(_div("product-offer", f"Offer {i}") for i in range(2))))
    if rng.random() < 0.25:
        parts.append(_paa(rng.choice([2, 3, 4])))
    if rng.random() < 0.2:
        parts.append(_div("image-pack", "".join(_div("image-caption", f"image {i}") for i in range(3))))
    parts.append(_natural(rng, query, rng.choice([5, 6, 7, 8])))
    if rng.random() < 0.8:
        parts.append(_div("kp-wholepage", f"<h2>{escape(query.title())}</h2>" + _div("kno-fact", "Address: 1 Main St")))
    if rng.random() < 0.6:
        parts.append(_div("partners-block", "".join(f'<a class="partner">Partner {i}</a>' for i in range(3))))
    related = rng.choice([7, 8, 8, 8, 9])
    return _page(query, "".join(parts), _related(query, related))


def main():
    rng = random.Random(2024)
    raw_dir = ROOT / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)
    for old in raw_dir.glob("*.json"):
        old.unlink()
    lines = []
    for queries, make in ((INFORMATIONAL, informational_page), (SEXUAL_RACISM, sexual_racism_page), (LOCAL_PLACE, local_page)):
        for q in queries:
            payload = {"query": q, "fetched_at": FETCHED_AT, "body": make(rng, q)}
            (raw_dir / raw_filename(q)).write_text(json.dumps(payload, indent=2) + "\n", "utf-8")
            lines.append(f"{q}\t{rng.choice(MANUAL_LABELS)}")
    assert len(set(lines)) == 60
    (ROOT / "dataset.tsv").write_text("\n".join(lines) + "\n", "utf-8")


if __name__ == "__main__":
    main()
