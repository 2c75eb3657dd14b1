"""Rewrite fixtures/expected/*.json and vectors.csv from fixtures/html.

Review the diff by hand before committing: the goldens are only as good as
that inspection.
"""

import json
from pathlib import Path

from serpintent.errors import CaptchaDetected
from serpintent.features import build_matrix, default_spec, write_matrix_csv
from serpintent.serp_parser import SelectorConfig, parse_html
from serpintent.serp_schema import serialize_document

ROOT = Path(__file__).resolve().parents[1] / "fixtures"


def main():
    manifest = json.loads((ROOT / "html" / "manifest.json").read_text("utf-8"))
    config = SelectorConfig.default()
    docs = []
    for name, query in sorted(manifest["queries"].items()):
        html = (ROOT / "html" / f"{name}.html").read_text("utf-8")
        try:
            doc, _ = parse_html(html, query, config, manifest["fetched_at"])
        except CaptchaDetected:
            continue
        (ROOT / "expected" / f"{name}.json").write_text(serialize_document(doc) + "\n", "utf-8")
        docs.append(doc)
    write_matrix_csv(build_matrix(docs, default_spec()), ROOT / "expected" / "vectors.csv")


if __name__ == "__main__":
    main()
