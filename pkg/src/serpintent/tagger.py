"""Keyword-lexicon intent tagging."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from serpintent.characterize import tokenize
from serpintent.errors import EmptyQuery, SchemaError
from serpintent.serp_schema import ClusterIntent, QueryRecord

PRIORITY = tuple(ClusterIntent.by_priority())


@dataclass(frozen=True)
class IntentLexicon:
    keywords: dict[ClusterIntent, frozenset[str]]
    # count repeated keywords once each when False
    multiplicity: bool = True

    def __post_init__(self):
        kw = {i: frozenset(self.keywords.get(i, ())) for i in ClusterIntent}
        object.__setattr__(self, "keywords", kw)
        intents = list(kw)
        for a in range(len(intents)):
            for b in range(a + 1, len(intents)):
                shared = kw[intents[a]] & kw[intents[b]]
                if shared:
                    raise SchemaError(
                        f"keyword(s) {sorted(shared)} appear under both "
                        f"{intents[a].value} and {intents[b].value}"
                    )

    @property
    def priority(self) -> tuple[ClusterIntent, ...]:
        return PRIORITY

    @classmethod
    def from_dict(cls, obj: Mapping[str, Iterable[str]], multiplicity: bool = True) -> "IntentLexicon":
        kw = {}
        for name, words in obj.items():
            try:
                intent = ClusterIntent(name)
            except ValueError:
                raise SchemaError(f"unknown intent {name!r} in lexicon") from None
            kw[intent] = frozenset(w.lower() for w in words)
        return cls(kw, multiplicity)

    @classmethod
    def load(cls, path: Union[str, Path], multiplicity: bool = True) -> "IntentLexicon":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")), multiplicity)


def pick_intent(counts: Mapping[ClusterIntent, int]) -> ClusterIntent:
    """Largest count wins; ties (including all zero) go to the higher-priority intent."""
    return max(PRIORITY, key=lambda i: (counts.get(i, 0), -i.rank))


def tag_query(
    query: str, lexicon: IntentLexicon, stopwords: Iterable[str] = ()
) -> tuple[ClusterIntent, dict[ClusterIntent, int]]:
    if not query or not query.strip():
        raise EmptyQuery("query must be non-empty")
    tokens = tokenize(query, stopwords)
    if not lexicon.multiplicity:
        tokens = list(dict.fromkeys(tokens))
    counts = {
        intent: sum(1 for t in tokens if t in lexicon.keywords[intent]) for intent in PRIORITY
    }
    return pick_intent(counts), counts


@dataclass(frozen=True)
class TaggedQuery:
    query: str
    intent: ClusterIntent
    counts: dict[ClusterIntent, int]


@dataclass
class BatchResult:
    tagged: list[TaggedQuery] = field(default_factory=list)
    # (input index, message) for records that could not be tagged
    errors: list[tuple[int, str]] = field(default_factory=list)


def tag_batch(
    records: Sequence[Union[QueryRecord, str]], lexicon: IntentLexicon, stopwords: Iterable[str] = ()
) -> BatchResult:
    stop = set(stopwords)
    out = BatchResult()
    for i, rec in enumerate(records):
        query = rec.query if isinstance(rec, QueryRecord) else rec
        try:
            intent, counts = tag_query(query, lexicon, stop)
        except EmptyQuery as exc:
            out.errors.append((i, str(exc)))
            continue
        out.tagged.append(TaggedQuery(query, intent, counts))
    return out


def write_tags_csv(tagged: Sequence[TaggedQuery], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "predicted_intent", "info_count", "local_count", "sexrac_count"])
        for t in tagged:
            w.writerow(
                [
                    t.query,
                    t.intent.value,
                    t.counts[ClusterIntent.INFORMATIONAL],
                    t.counts[ClusterIntent.LOCAL_PLACE],
                    t.counts[ClusterIntent.SEXUAL_RACISM],
                ]
            )
