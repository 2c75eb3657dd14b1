import csv
import json
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from serpintent.errors import EmptyInput, SpecMismatch, TooFewRows
from serpintent.features import (
    FeatureKind,
    FeatureMatrix,
    FeatureSpec,
    FeatureVector,
    build_matrix,
    check_spec,
    correlation_matrix,
    default_spec,
    extract_features,
    load_spec,
    pearson_matrix,
    prune_correlated,
    read_matrix_csv,
    write_matrix_csv,
)
from serpintent.serp_parser import parse_html
from serpintent.serp_schema import ResultBlock, ResultBlockType as T, SerpDocument

from conftest import EXPECTED_DIR, load_html

TS = "2024-01-15T10:00:00Z"

BINARY_NAMES = [
    "knowledge_graph", "calculator", "direct_answer", "map", "local_result",
    "commercial_sponsored", "twitter", "top_stories", "videos", "images",
    "content_navigation_bar", "featured_snippet", "rich_snippets", "similar_entity",
    "partners_block", "other_cards",
]
NUMERIC_NAMES = ["paa_count", "related_searches_count", "natural_results_count"]


def _doc(*blocks, related=()):
    return SerpDocument(
        "q", TS,
        tuple(ResultBlock(t, i + 1, items=tuple(f"i{j}" for j in range(n))) for i, (t, n) in enumerate(blocks)),
        tuple(related),
    )


def _as_dict(vec, spec):
    return dict(zip((f.name for f in spec), vec.values))


def test_default_spec_shape():
    spec = default_spec()
    assert len(spec) == 19
    assert [f.name for f in spec if f.kind is FeatureKind.BINARY] == BINARY_NAMES
    assert [f.name for f in spec if f.kind is FeatureKind.NUMERIC] == NUMERIC_NAMES
    excluded = {T(f.block_type) for f in spec if f.block_type} ^ set(T)
    assert excluded == {T.TRANSLATOR, T.TOP_BUTTON_ADS}
    check_spec(spec)


def test_empty_document_is_all_zero():
    spec = default_spec()
    assert extract_features(_doc(), spec).values == (0.0,) * 19


def test_snippet_paa_related_example():
    spec = default_spec()
    doc = _doc((T.FEATURED_SNIPPET, 0), (T.PEOPLE_ALSO_ASKED, 5), related=[f"r{i}" for i in range(8)])
    got = _as_dict(extract_features(doc, spec), spec)
    expected = dict.fromkeys(got, 0.0)
    expected.update(featured_snippet=1.0, paa_count=5.0, related_searches_count=8.0)
    assert got == expected


def test_presence_not_count():
    spec = default_spec()
    got = _as_dict(extract_features(_doc((T.LOCAL_RESULT, 3), (T.LOCAL_RESULT, 2)), spec), spec)
    assert got["local_result"] == 1.0


def test_counts_sum_over_blocks():
    spec = default_spec()
    doc = _doc((T.PEOPLE_ALSO_ASKED, 2), (T.NATURAL_RESULTS, 4), (T.PEOPLE_ALSO_ASKED, 3), (T.NATURAL_RESULTS, 1))
    got = _as_dict(extract_features(doc, spec), spec)
    assert (got["paa_count"], got["natural_results_count"]) == (5.0, 5.0)


def test_fixture_corpus_matches_checked_in_vectors(manifest, selectors, tmp_path):
    with open(EXPECTED_DIR / "vectors.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    assert header == ["query", *(f.name for f in default_spec())]
    by_query = {q: name for name, q in manifest["queries"].items()}
    assert len(body) == 16
    spec = default_spec()
    docs = []
    for rec in body:
        doc, _ = parse_html(load_html(by_query[rec[0]]), rec[0], selectors, manifest["fetched_at"])
        docs.append(doc)
        assert extract_features(doc, spec).values == tuple(float(v) for v in rec[1:])
    out = tmp_path / "v.csv"
    write_matrix_csv(build_matrix(docs, spec), out)
    assert out.read_bytes() == (EXPECTED_DIR / "vectors.csv").read_bytes()


def test_unknown_block_type_in_spec():
    with pytest.raises(SpecMismatch):
        extract_features(_doc(), [FeatureSpec("hologram", FeatureKind.BINARY, block_type="hologram")])
    with pytest.raises(SpecMismatch):
        check_spec([FeatureSpec("x", FeatureKind.NUMERIC, source="clicks")])
    with pytest.raises(SpecMismatch):
        check_spec([FeatureSpec("a", FeatureKind.BINARY, "map"), FeatureSpec("a", FeatureKind.BINARY, "map")])


def test_load_spec_round_trip(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps([f.to_dict() for f in default_spec()]))
    assert load_spec(path) == default_spec()
    path.write_text(json.dumps([{"name": "a", "kind": "ordinal", "block_type": "map"}]))
    with pytest.raises(SpecMismatch):
        load_spec(path)


def test_build_matrix():
    spec = default_spec()
    docs = [_doc((T.MAP, 0)), _doc(), _doc((T.MAP, 0))]
    m = build_matrix(docs, spec)
    assert [r.values for r in m.rows] == [extract_features(d, spec).values for d in docs]
    assert m.rows[0] == m.rows[2]
    assert m.to_array().shape == (3, 19)
    assert build_matrix(docs[:1], spec).to_array().shape == (1, 19)
    with pytest.raises(EmptyInput):
        build_matrix([], spec)


def _matrix(columns, names=None):
    names = names or [f"f{i}" for i in range(len(columns))]
    spec = tuple(FeatureSpec(n, FeatureKind.NUMERIC, source="related_searches") for n in names)
    rows = tuple(FeatureVector(f"q{i}", tuple(float(c[i]) for c in columns)) for i in range(len(columns[0])))
    return FeatureMatrix(spec, rows)


def test_hand_correlations():
    r = correlation_matrix(_matrix([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [2, 2, 2, 2]]))
    assert r[0, 1] == pytest.approx(-1.0, abs=1e-12)
    assert r[0, 2] == pytest.approx(1.0, abs=1e-12)
    assert r[0, 0] == 1.0 and r[3, 3] == 1.0
    assert (r[3, :3] == 0).all() and (r[:3, 3] == 0).all()


def test_correlation_matches_statistics_module():
    cols = [[1, 2, 3, 5, 8], [0, 1, 0, 1, 1], [4, 1, 0, 2, 9]]
    r = correlation_matrix(_matrix(cols))
    for i in range(3):
        for j in range(3):
            if i != j:
                assert r[i, j] == pytest.approx(statistics.correlation(cols[i], cols[j]), abs=1e-12)


def test_too_few_rows():
    with pytest.raises(TooFewRows):
        correlation_matrix(_matrix([[1], [2]]))


@settings(max_examples=80, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(1, 5)), elements=st.integers(0, 4).map(float)))
def test_correlation_invariants(data):
    r = pearson_matrix(data)
    assert np.array_equal(r, r.T)
    assert (np.diag(r) == 1.0).all()
    assert (np.abs(r) <= 1 + 1e-12).all()


def test_prune_none_correlated():
    m = _matrix([[0, 1, 0, 1, 1], [1, 1, 0, 0, 1], [3, 0, 2, 5, 1]])
    pruned, dropped = prune_correlated(m, 0.9)
    assert dropped == [] and pruned == m


def test_prune_duplicate_column():
    m = _matrix([[0, 1, 2, 3], [5, 1, 1, 0], [0, 1, 2, 3]], ["a", "b", "c"])
    pruned, dropped = prune_correlated(m, 0.9)
    assert dropped == ["c"] and pruned.names == ["a", "b"]


def test_prune_anti_correlated():
    m = _matrix([[0, 1, 0, 1], [1, 0, 1, 0]], ["a", "b"])
    assert prune_correlated(m, 0.9)[1] == ["b"]


def test_prune_three_identical():
    col = [1, 4, 2, 8]
    m = _matrix([col, col, col], ["a", "b", "c"])
    pruned, dropped = prune_correlated(m, 0.9)
    assert pruned.names == ["a"] and dropped == ["b", "c"]


def test_prune_threshold_range():
    m = _matrix([[0, 1], [1, 0]])
    for bad in (0, -0.5, 1.5):
        with pytest.raises(ValueError):
            prune_correlated(m, bad)


@settings(max_examples=80, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(3, 8), st.integers(1, 6)), elements=st.integers(0, 2).map(float)),
    st.sampled_from([0.5, 0.8, 0.9, 1.0]),
)
def test_prune_reaches_fixpoint(data, threshold):
    m = _matrix(data.T.tolist())
    pruned, dropped = prune_correlated(m, threshold)
    r = correlation_matrix(pruned)
    off = np.abs(r - np.eye(len(r)))
    assert (off < threshold).all()
    again, dropped_again = prune_correlated(pruned, threshold)
    assert dropped_again == [] and again == pruned
    assert len(pruned.names) + len(dropped) == data.shape[1]


def test_matrix_csv_round_trip(tmp_path):
    spec = default_spec()
    m = build_matrix([_doc((T.MAP, 0), (T.PEOPLE_ALSO_ASKED, 3)), _doc(related=["a"])], spec)
    path = tmp_path / "m.csv"
    write_matrix_csv(m, path)
    back = read_matrix_csv(path)
    assert back == m
    assert path.read_text().splitlines()[1].startswith("q,0,0,0,1,")
