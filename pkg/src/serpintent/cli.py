"""Command line entry point: ``serpintent <subcommand> [options]``.

Every subcommand reads a JSON config (``--config``) whose relative paths are
resolved against the config file's directory; command-line flags win over
config values. Exit status is 0 on success, 1 on a domain error and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from serpintent import characterize as ch
from serpintent import clustering as cl
from serpintent import evaluate as ev
from serpintent import features as ft
from serpintent.errors import CaptchaDetected, ConfigError, SerpIntentError
from serpintent.fetcher import Fetcher, FetchConfig, FetchStatus, ProxyPool, persist_raw
from serpintent.serp_parser import SelectorConfig, parse_html
from serpintent.serp_schema import ClusterIntent, deserialize_document, serialize_document
from serpintent.tagger import IntentLexicon, tag_batch, write_tags_csv

logger = logging.getLogger("serpintent")

DEFAULTS = {
    "seed": 0,
    "paths": {
        "dataset": "dataset.tsv",
        "raw_dir": "raw",
        "parsed_dir": "out/parsed",
        "output_dir": "out",
    },
    "selectors": None,
    "feature_spec": None,
    "stopwords": None,
    "exclusions": None,
    "standardize": True,
    "kmeans": {"k": 3, "max_iters": 300, "tol": 1e-4, "n_init": 10},
    "elbow": {"k_min": 1, "k_max": 8},
    "prune_threshold": None,
    "keywords": {"top_n": 50, "min_count": 3},
    "cluster_names": None,
    "tagger": {"multiplicity": True},
    "split": {"test_fraction": 0.1},
    "fetch": {"workers": 1},
}


class Settings:
    """Merged view of defaults, config file and command-line overrides."""

    def __init__(self, raw: dict, base: Path):
        self.raw = raw
        self.base = base

    def path(self, value) -> Optional[Path]:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def get(self, *keys, default=None):
        node = self.raw
        for k in keys:
            if not isinstance(node, dict) or k not in node:
                return default
            node = node[k]
        return node

    @property
    def output_dir(self) -> Path:
        return self.path(self.get("paths", "output_dir"))

    def selectors(self) -> SelectorConfig:
        p = self.path(self.get("selectors"))
        return SelectorConfig.load(p) if p else SelectorConfig.default()

    def feature_spec(self) -> list[ft.FeatureSpec]:
        p = self.path(self.get("feature_spec"))
        return ft.load_spec(p) if p else ft.default_spec()

    def stopwords(self) -> set[str]:
        p = self.path(self.get("stopwords"))
        return ch.load_wordlist(p) if p else ch.default_stopwords()

    def exclusions(self) -> set[str]:
        p = self.path(self.get("exclusions"))
        return ch.load_wordlist(p) if p else ch.default_exclusions()

    def kmeans(self) -> cl.KMeansConfig:
        km = self.get("kmeans")
        return cl.KMeansConfig(
            k=int(km["k"]),
            seed=int(self.get("seed")),
            max_iters=int(km["max_iters"]),
            tol=float(km["tol"]),
            n_init=int(km["n_init"]),
        )

    def cluster_names(self) -> dict[int, ClusterIntent]:
        names = self.get("cluster_names")
        if not names:
            raise ConfigError("config has no cluster_names mapping (cluster id -> intent)")
        try:
            return {int(c): ClusterIntent(i) for c, i in names.items()}
        except ValueError as exc:
            raise ConfigError(f"bad cluster_names entry: {exc}") from None


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_settings(args: argparse.Namespace) -> Settings:
    raw = json.loads(json.dumps(DEFAULTS))
    base = Path.cwd()
    if args.config:
        cfg_path = Path(args.config)
        try:
            user = json.loads(cfg_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {cfg_path} is not valid JSON: {exc}") from None
        raw = _merge(raw, user)
        base = cfg_path.resolve().parent
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.k is not None:
        raw["kmeans"]["k"] = args.k
    if args.test_fraction is not None:
        raw["split"]["test_fraction"] = args.test_fraction
    if args.threshold is not None:
        raw["prune_threshold"] = args.threshold
    if args.top_n is not None:
        raw["keywords"]["top_n"] = args.top_n
    if args.min_count is not None:
        raw["keywords"]["min_count"] = args.min_count
    if args.endpoint is not None:
        raw["fetch"]["endpoint_url"] = args.endpoint
    if args.output_dir is not None:
        out = Path(args.output_dir).resolve()
        raw["paths"]["output_dir"] = str(out)
        raw["paths"]["parsed_dir"] = str(out / "parsed")
    if getattr(args, "no_standardize", False):
        raw["standardize"] = False
    return Settings(raw, base)


def _out(settings: Settings, explicit: Optional[str], name: str) -> Path:
    if explicit:
        return Path(explicit)
    d = settings.output_dir
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_assignments(path) -> tuple[list[str], list[int]]:
    queries, labels = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            queries.append(row["query"])
            labels.append(int(row["cluster"]))
    return queries, labels


def _write_assignments(path: Path, queries: Sequence[str], labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "cluster"])
        for q, c in zip(queries, labels):
            w.writerow([q, int(c)])


# -- subcommands -------------------------------------------------------------


def cmd_fetch(args, s: Settings) -> int:
    fetch_cfg = dict(s.get("fetch"))
    workers = int(fetch_cfg.pop("workers", 1))
    proxies = fetch_cfg.pop("proxies", [])
    fetch_cfg.setdefault("output_dir", str(s.path(s.get("paths", "raw_dir"))))
    if "endpoint_url" not in fetch_cfg:
        raise ConfigError("no endpoint configured; pass --endpoint")
    config = FetchConfig.from_dict(fetch_cfg)
    config.output_dir = s.path(config.output_dir)
    queries_path = Path(args.queries) if args.queries else s.path(s.get("paths", "dataset"))
    records = ev.load_dataset(queries_path)
    fetcher = Fetcher(config, ProxyPool.from_env(proxies))
    results = fetcher.fetch_all([r.query for r in records], workers=workers)
    ok = 0
    for res in results:
        if res.status is FetchStatus.OK:
            persist_raw(res, config.output_dir)
            ok += 1
        else:
            logger.warning("%s: %s after %d attempt(s)", res.query, res.status.value, res.attempts)
    print(f"fetched {ok}/{len(results)} queries into {config.output_dir}")
    return 0


def _parse_raw_dir(raw_dir: Path, parsed_dir: Path, selectors: SelectorConfig) -> dict:
    parsed_dir.mkdir(parents=True, exist_ok=True)
    docs = {}
    for path in sorted(raw_dir.glob("*.json")):
        raw = json.loads(path.read_text(encoding="utf-8"))
        try:
            doc, _ = parse_html(raw["body"], raw["query"], selectors, raw["fetched_at"])
        except CaptchaDetected:
            logger.warning("%s is a captcha page; skipped", path.name)
            continue
        (parsed_dir / path.name).write_text(serialize_document(doc) + "\n", encoding="utf-8")
        docs[doc.query] = doc
    return docs


def cmd_parse(args, s: Settings) -> int:
    selectors = s.selectors()
    if args.html:
        if not args.query:
            raise ConfigError("--html needs --query")
        doc, _ = parse_html(
            Path(args.html).read_text(encoding="utf-8"), args.query, selectors, args.fetched_at
        )
        print(serialize_document(doc))
        return 0
    raw_dir = Path(args.raw_dir) if args.raw_dir else s.path(s.get("paths", "raw_dir"))
    parsed_dir = Path(args.parsed_dir) if args.parsed_dir else s.path(s.get("paths", "parsed_dir"))
    docs = _parse_raw_dir(raw_dir, parsed_dir, selectors)
    print(f"parsed {len(docs)} documents into {parsed_dir}")
    return 0


def _load_parsed(parsed_dir: Path) -> list:
    return [
        deserialize_document(p.read_text(encoding="utf-8")) for p in sorted(parsed_dir.glob("*.json"))
    ]


def _correlation_csv(m: ft.FeatureMatrix, path: Path) -> None:
    r = ft.correlation_matrix(m)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *m.names])
        for name, row in zip(m.names, r):
            w.writerow([name, *(f"{v:.6f}" for v in row)])


def _maybe_prune(m: ft.FeatureMatrix, threshold) -> tuple[ft.FeatureMatrix, list[str]]:
    if threshold is None:
        return m, []
    pruned, dropped = ft.prune_correlated(m, float(threshold))
    print(f"correlation pruning at |r| >= {threshold}: dropped {dropped or 'nothing'}")
    return pruned, dropped


def cmd_extract(args, s: Settings) -> int:
    parsed_dir = Path(args.parsed_dir) if args.parsed_dir else s.path(s.get("paths", "parsed_dir"))
    docs = _load_parsed(parsed_dir)
    m = ft.build_matrix(docs, s.feature_spec())
    if len(m.rows) >= 2:
        _correlation_csv(m, _out(s, None, "correlation.csv"))
    m, _ = _maybe_prune(m, s.get("prune_threshold"))
    out = _out(s, args.out, "features.csv")
    ft.write_matrix_csv(m, out)
    print(f"wrote {len(m.rows)} x {len(m.spec)} feature matrix to {out}")
    return 0


def cmd_cluster(args, s: Settings) -> int:
    m = ft.read_matrix_csv(args.features or _out(s, None, "features.csv"), s.feature_spec())
    model = cl.fit_matrix(m.to_array(), s.kmeans(), scale=s.get("standardize"))
    cl.save_model(model, m.names, _out(s, args.model, "model.json"))
    _write_assignments(_out(s, args.assignments, "assignments.csv"), m.queries, model.assignments)
    sizes = np.bincount(model.assignments, minlength=model.k).tolist()
    print(f"k={model.k} wcss={model.wcss:.6f} cluster sizes={sizes}")
    return 0


def cmd_elbow(args, s: Settings) -> int:
    m = ft.read_matrix_csv(args.features or _out(s, None, "features.csv"), s.feature_spec())
    data = m.to_array()
    if s.get("standardize"):
        data, _ = cl.standardize(data)
    k_min = args.k_min if args.k_min is not None else int(s.get("elbow", "k_min"))
    k_max = args.k_max if args.k_max is not None else int(s.get("elbow", "k_max"))
    res = cl.elbow_select(data, k_min, k_max, s.kmeans())
    for k, w in zip(res.k_values, res.wcss_values):
        print(f"k={k} wcss={w:.6f}")
    print(f"selected_k {res.selected_k}")
    if args.out:
        _write_json(
            Path(args.out),
            {"k_values": res.k_values, "wcss_values": res.wcss_values, "selected_k": res.selected_k},
        )
    return 0


def cmd_profile(args, s: Settings) -> int:
    m = ft.read_matrix_csv(args.features or _out(s, None, "features.csv"), s.feature_spec())
    queries, labels = _read_assignments(args.assignments or _out(s, None, "assignments.csv"))
    if queries != m.queries:
        raise ConfigError("assignments do not line up with the feature matrix rows")
    profiles = ch.profile_clusters(m, labels)
    ch.write_profiles_csv(m, profiles, _out(s, args.profiles, "profiles.csv"))
    freqs = ch.word_frequencies(ch.group_queries(queries, labels), s.stopwords())
    ch.write_word_frequencies_csv(freqs, _out(s, args.word_frequencies, "word_frequencies.csv"))
    _print_profiles(profiles, freqs)
    return 0


def _print_profiles(profiles, freqs) -> None:
    top = {wf.cluster_id: ch.top_words(wf, 8) for wf in freqs}
    for p in profiles:
        flags = ", ".join(f"{k}={v:.2f}" for k, v in p.binary_pct.items() if v > 0)
        means = ", ".join(f"{k}={v:.2f}" for k, v in p.numeric_mean.items())
        words = ", ".join(f"{t}({n})" for t, n in top.get(p.cluster_id, []))
        print(f"cluster {p.cluster_id} (n={p.size})")
        print(f"  binary: {flags or '-'}")
        print(f"  numeric: {means}")
        print(f"  top words: {words or '-'}")


def _keywords(s: Settings, profiles, freqs):
    naming = ch.name_clusters(profiles, s.cluster_names())
    return ch.extract_keywords(
        freqs,
        naming,
        s.exclusions(),
        top_n=int(s.get("keywords", "top_n")),
        min_count=int(s.get("keywords", "min_count")),
    )


def cmd_keywords(args, s: Settings) -> int:
    freqs = ch.read_word_frequencies_csv(args.word_frequencies or _out(s, None, "word_frequencies.csv"))
    profiles = ch.read_profiles_csv(args.profiles or _out(s, None, "profiles.csv"))
    sets = _keywords(s, profiles, freqs)
    out = _out(s, args.out, "lexicon.json")
    ch.write_lexicon(sets, out)
    for ks in sets:
        print(f"{ks.intent.value}: {len(ks.keywords)} keywords")
    return 0


def cmd_tag(args, s: Settings) -> int:
    lexicon = IntentLexicon.load(
        args.lexicon or _out(s, None, "lexicon.json"), bool(s.get("tagger", "multiplicity"))
    )
    records = ev.load_dataset(args.queries or s.path(s.get("paths", "dataset")))
    batch = tag_batch(records, lexicon, s.stopwords())
    for idx, msg in batch.errors:
        logger.warning("record %d: %s", idx, msg)
    out = _out(s, args.out, "tags.csv")
    write_tags_csv(batch.tagged, out)
    print(f"tagged {len(batch.tagged)} queries into {out}")
    return 0


def _report(cm: ev.ConfusionMatrix, out: Optional[Path]) -> None:
    metrics = ev.precision_recall(cm)
    print(ev.format_table(cm, metrics))
    if out is not None:
        _write_json(out, ev.metrics_report(cm, metrics))


def cmd_eval(args, s: Settings) -> int:
    if args.matrix:
        cm = ev.load_matrix(args.matrix)
        _report(cm, Path(args.out) if args.out else None)
        return 0
    naming = s.cluster_names()
    queries, labels = _read_assignments(args.assignments or _out(s, None, "assignments.csv"))
    actual_by_query = {q: naming[c] for q, c in zip(queries, labels)}
    actual, predicted = [], []
    with open(args.tags or _out(s, None, "tags.csv"), encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["query"] in actual_by_query:
                actual.append(actual_by_query[row["query"]])
                predicted.append(ClusterIntent(row["predicted_intent"]))
    _report(ev.confusion(actual, predicted), _out(s, args.out, "metrics.json"))
    return 0


def cmd_pipeline(args, s: Settings) -> int:
    out_dir = s.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    stop = s.stopwords()

    docs = _parse_raw_dir(
        s.path(s.get("paths", "raw_dir")), s.path(s.get("paths", "parsed_dir")), s.selectors()
    )
    records = [r for r in ev.load_dataset(s.path(s.get("paths", "dataset"))) if r.query in docs]
    if not records:
        raise ConfigError("no dataset query has a parsed result page")
    train, test = ev.split_train_test(
        records, float(s.get("split", "test_fraction")), int(s.get("seed"))
    )
    print(f"{len(records)} queries with result pages: {len(train)} train / {len(test)} test")

    spec = s.feature_spec()
    m_train = ft.build_matrix([docs[r.query] for r in train], spec)
    _correlation_csv(m_train, out_dir / "correlation.csv")
    m_train, dropped = _maybe_prune(m_train, s.get("prune_threshold"))
    keep = [spec.index(f) for f in m_train.spec]
    ft.write_matrix_csv(m_train, out_dir / "features_train.csv")

    model = cl.fit_matrix(m_train.to_array(), s.kmeans(), scale=s.get("standardize"))
    cl.save_model(model, m_train.names, out_dir / "model.json")
    _write_assignments(out_dir / "assignments_train.csv", m_train.queries, model.assignments)

    profiles = ch.profile_clusters(m_train, model.assignments)
    ch.write_profiles_csv(m_train, profiles, out_dir / "profiles.csv")
    freqs = ch.word_frequencies(ch.group_queries(m_train.queries, model.assignments), stop)
    ch.write_word_frequencies_csv(freqs, out_dir / "word_frequencies.csv")
    _print_profiles(profiles, freqs)

    sets = _keywords(s, profiles, freqs)
    ch.write_lexicon(sets, out_dir / "lexicon.json")
    naming = ch.name_clusters(profiles, s.cluster_names())

    if not test:
        print("empty test split; skipping tagging and evaluation")
        return 0
    m_test = ft.build_matrix([docs[r.query] for r in test], spec).select_columns(keep)
    ft.write_matrix_csv(m_test, out_dir / "features_test.csv")
    test_clusters = model.predict(model.standardization.apply(m_test.to_array()))
    _write_assignments(out_dir / "assignments_test.csv", m_test.queries, test_clusters)

    lexicon = IntentLexicon({ks.intent: ks.keywords for ks in sets}, bool(s.get("tagger", "multiplicity")))
    batch = tag_batch(test, lexicon, stop)
    write_tags_csv(batch.tagged, out_dir / "tags.csv")

    actual = [naming[int(c)] for c in test_clusters]
    predicted = [t.intent for t in batch.tagged]
    _report(ev.confusion(actual, predicted), out_dir / "metrics.json")
    return 0


HANDLERS = {
    "fetch": cmd_fetch,
    "parse": cmd_parse,
    "extract": cmd_extract,
    "cluster": cmd_cluster,
    "elbow": cmd_elbow,
    "profile": cmd_profile,
    "keywords": cmd_keywords,
    "tag": cmd_tag,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, help="seed for clustering restarts and the train/test split")
    common.add_argument("--k", type=int, help="number of clusters")
    common.add_argument("--test-fraction", type=float)
    common.add_argument("--threshold", type=float, help="drop features correlated at |r| >= this")
    common.add_argument("--top-n", type=int, help="keywords kept per intent")
    common.add_argument("--min-count", type=int, help="minimum token count for a keyword")
    common.add_argument("--endpoint", help="search endpoint URL for fetch")
    common.add_argument("--output-dir", help="override paths.output_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="serpintent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("fetch", parents=[common], help="request queries and store raw pages")
    p.add_argument("--queries", help="TSV dataset of queries")

    p = sub.add_parser("parse", parents=[common], help="parse raw pages into canonical JSON")
    p.add_argument("--raw-dir")
    p.add_argument("--parsed-dir")
    p.add_argument("--html", help="parse a single HTML file and print its JSON")
    p.add_argument("--query", help="query for --html")
    p.add_argument("--fetched-at", default="1970-01-01T00:00:00Z")

    p = sub.add_parser("extract", parents=[common], help="build the feature matrix")
    p.add_argument("--parsed-dir")
    p.add_argument("--out")

    p = sub.add_parser("cluster", parents=[common], help="fit KMeans")
    p.add_argument("--features")
    p.add_argument("--model")
    p.add_argument("--assignments")
    p.add_argument("--no-standardize", action="store_true")

    p = sub.add_parser("elbow", parents=[common], help="choose K with the elbow rule")
    p.add_argument("--features")
    p.add_argument("--k-min", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--out")
    p.add_argument("--no-standardize", action="store_true")

    p = sub.add_parser("profile", parents=[common], help="cluster feature profiles and word counts")
    p.add_argument("--features")
    p.add_argument("--assignments")
    p.add_argument("--profiles")
    p.add_argument("--word-frequencies")

    p = sub.add_parser("keywords", parents=[common], help="derive the intent lexicon")
    p.add_argument("--word-frequencies")
    p.add_argument("--profiles")
    p.add_argument("--out")

    p = sub.add_parser("tag", parents=[common], help="tag queries with the lexicon")
    p.add_argument("--lexicon")
    p.add_argument("--queries")
    p.add_argument("--out")

    p = sub.add_parser("eval", parents=[common], help="clustering vs lexicon precision/recall")
    p.add_argument("--matrix", help="confusion matrix JSON to score directly")
    p.add_argument("--assignments")
    p.add_argument("--tags")
    p.add_argument("--out")

    p = sub.add_parser("pipeline", parents=[common], help="parse -> ... -> eval on fetched pages")
    p.add_argument("--no-standardize", action="store_true")
    return parser


def run_subcommand(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        settings = load_settings(args)
        return HANDLERS[args.command](args, settings)
    except (SerpIntentError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
