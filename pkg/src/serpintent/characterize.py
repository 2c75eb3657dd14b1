"""Cluster profiles, per-cluster word counts and intent keyword extraction."""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from serpintent.errors import EmptyInput, LengthMismatch, NonBijectiveMapping, UnnamedCluster
from serpintent.features import FeatureKind, FeatureMatrix
from serpintent.serp_schema import ClusterIntent

_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def parse_wordlist(text: str) -> set[str]:
    words = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return words


def load_wordlist(path: Union[str, Path]) -> set[str]:
    return parse_wordlist(Path(path).read_text(encoding="utf-8"))


def default_stopwords() -> set[str]:
    return parse_wordlist(
        resources.files("serpintent").joinpath("data/stopwords.txt").read_text("utf-8")
    )


def default_exclusions() -> set[str]:
    return parse_wordlist(
        resources.files("serpintent").joinpath("data/exclusions.txt").read_text("utf-8")
    )


def tokenize(query: str, stopwords: Iterable[str] = ()) -> list[str]:
    """Lowercase, split on anything that is not a letter or digit, then drop
    one-character tokens, pure numbers and stopwords. Order and repeats are kept."""
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [
        tok
        for tok in _SPLIT.split(query.lower())
        if len(tok) >= 2 and not tok.isdigit() and tok not in stop
    ]


@dataclass(frozen=True)
class ClusterProfile:
    cluster_id: int
    size: int
    binary_pct: dict[str, float]
    numeric_mean: dict[str, float]


def profile_clusters(m: FeatureMatrix, assignments: Sequence[int]) -> list[ClusterProfile]:
    """Per-cluster share of rows with each binary flag set and mean of each count."""
    labels = np.asarray(assignments, dtype=int)
    if len(labels) != len(m.rows):
        raise LengthMismatch(f"{len(labels)} assignments for {len(m.rows)} rows")
    data = m.to_array()
    profiles = []
    for c in sorted(set(labels.tolist())):
        rows = data[labels == c]
        binary, numeric = {}, {}
        for j, f in enumerate(m.spec):
            mean = float(rows[:, j].mean())
            (binary if f.kind is FeatureKind.BINARY else numeric)[f.name] = mean
        profiles.append(ClusterProfile(c, len(rows), binary, numeric))
    return profiles


@dataclass(frozen=True)
class WordFrequency:
    cluster_id: int
    counts: Counter = field(default_factory=Counter)


def word_frequencies(
    queries_by_cluster: Mapping[int, Iterable[str]], stopwords: Iterable[str] = ()
) -> list[WordFrequency]:
    stop = set(stopwords)
    out = []
    for c in sorted(queries_by_cluster):
        counts: Counter = Counter()
        for q in queries_by_cluster[c]:
            counts.update(tokenize(q, stop))
        out.append(WordFrequency(c, counts))
    return out


def group_queries(queries: Sequence[str], assignments: Sequence[int]) -> dict[int, list[str]]:
    if len(queries) != len(assignments):
        raise LengthMismatch(f"{len(assignments)} assignments for {len(queries)} queries")
    grouped: dict[int, list[str]] = {}
    for q, c in zip(queries, assignments):
        grouped.setdefault(int(c), []).append(q)
    return grouped


@dataclass(frozen=True)
class KeywordSet:
    intent: ClusterIntent
    keywords: frozenset[str]
    provenance: dict[str, float]


def extract_keywords(
    freqs: Sequence[WordFrequency],
    naming: Mapping[int, ClusterIntent],
    exclusions: Iterable[str] = (),
    top_n: int = 50,
    min_count: int = 3,
) -> list[KeywordSet]:
    """Pick the most cluster-specific tokens for each named cluster.

    specificity(token, c) = count(token, c) / total count of token over all
    clusters. A token is owned by the eligible cluster with the highest
    (specificity, count), lowest cluster id on ties, so the resulting sets
    are disjoint. Each cluster keeps its ``top_n`` owned tokens ranked by
    (specificity, count, token) descending.
    """
    if top_n < 1 or min_count < 1:
        raise ValueError("top_n and min_count must be >= 1")
    for wf in freqs:
        if wf.cluster_id not in naming:
            raise UnnamedCluster(f"cluster {wf.cluster_id} has no intent mapping")
    excluded = {e.lower() for e in exclusions}
    totals: Counter = Counter()
    for wf in freqs:
        totals.update(wf.counts)

    owner: dict[str, tuple[float, int, int]] = {}
    order = sorted(freqs, key=lambda wf: wf.cluster_id)
    for wf in order:
        for tok, n in wf.counts.items():
            if n < min_count or tok in excluded:
                continue
            spec = n / totals[tok]
            prev = owner.get(tok)
            if prev is None or (spec, n) > (prev[0], prev[1]):
                owner[tok] = (spec, n, wf.cluster_id)

    result = []
    for wf in order:
        owned = [(s, n, tok) for tok, (s, n, c) in owner.items() if c == wf.cluster_id]
        owned.sort(reverse=True)
        chosen = owned[:top_n]
        if not chosen:
            raise EmptyInput(
                f"cluster {wf.cluster_id} yielded no keywords (min_count={min_count})"
            )
        result.append(
            KeywordSet(
                intent=naming[wf.cluster_id],
                keywords=frozenset(tok for _, _, tok in chosen),
                provenance={tok: s for s, _, tok in chosen},
            )
        )
    return result


def name_clusters(
    profiles: Sequence[ClusterProfile], mapping: Mapping[int, Union[ClusterIntent, str]]
) -> dict[int, ClusterIntent]:
    """Validate a human-chosen cluster -> intent mapping (must be a bijection)."""
    named = {int(c): ClusterIntent(i) for c, i in mapping.items()}
    ids = {p.cluster_id for p in profiles}
    if set(named) != ids:
        raise NonBijectiveMapping(
            f"mapping covers clusters {sorted(named)}, profiles have {sorted(ids)}"
        )
    if len(set(named.values())) != len(named) or len(named) != len(ClusterIntent):
        raise NonBijectiveMapping(f"mapping is not one-to-one onto the intents: {mapping}")
    return named


def write_profiles_csv(m: FeatureMatrix, profiles: Sequence[ClusterProfile], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "size", "feature", "kind", "value"])
        for p in profiles:
            for f in m.spec:
                if f.kind is FeatureKind.BINARY:
                    value = p.binary_pct[f.name]
                else:
                    value = p.numeric_mean[f.name]
                w.writerow([p.cluster_id, p.size, f.name, f.kind.value, f"{value:.6f}"])


def write_word_frequencies_csv(freqs: Sequence[WordFrequency], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "token", "count"])
        for wf in freqs:
            for tok, n in sorted(wf.counts.items(), key=lambda kv: (-kv[1], kv[0])):
                w.writerow([wf.cluster_id, tok, n])


def read_word_frequencies_csv(path) -> list[WordFrequency]:
    tables: dict[int, Counter] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            tables.setdefault(int(row["cluster"]), Counter())[row["token"]] += int(row["count"])
    return [WordFrequency(c, tables[c]) for c in sorted(tables)]


def lexicon_to_dict(sets: Sequence[KeywordSet]) -> dict[str, list[str]]:
    by_intent = {ks.intent: ks for ks in sets}
    return {
        intent.value: sorted(by_intent[intent].keywords) if intent in by_intent else []
        for intent in ClusterIntent.by_priority()
    }


def write_lexicon(sets: Sequence[KeywordSet], path) -> None:
    Path(path).write_text(
        json.dumps(lexicon_to_dict(sets), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def top_words(wf: WordFrequency, n: int = 10) -> list[tuple[str, int]]:
    return sorted(wf.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


def read_profiles_csv(path) -> list[ClusterProfile]:
    sizes: dict[int, int] = {}
    binary: dict[int, dict[str, float]] = {}
    numeric: dict[int, dict[str, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            c = int(row["cluster"])
            sizes[c] = int(row["size"])
            target = binary if row["kind"] == FeatureKind.BINARY.value else numeric
            target.setdefault(c, {})[row["feature"]] = float(row["value"])
    return [ClusterProfile(c, sizes[c], binary.get(c, {}), numeric.get(c, {})) for c in sorted(sizes)]
