import json
from pathlib import Path

import pytest

from serpintent.serp_parser import SelectorConfig

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
HTML_DIR = FIXTURES / "html"
EXPECTED_DIR = FIXTURES / "expected"
CORPUS_DIR = FIXTURES / "corpus"


@pytest.fixture(scope="session")
def selectors():
    return SelectorConfig.default()


@pytest.fixture(scope="session")
def manifest():
    return json.loads((HTML_DIR / "manifest.json").read_text("utf-8"))


def load_html(name: str) -> str:
    return (HTML_DIR / f"{name}.html").read_text("utf-8")


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
