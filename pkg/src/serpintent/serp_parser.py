"""Turn raw result-page HTML into a :class:`SerpDocument`.

Selectors are data, not code: a :class:`SelectorConfig` maps each result
block type to CSS selectors, and the shipped default targets the fixture
corpus under ``fixtures/html``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from bs4 import BeautifulSoup, Tag

from serpintent.errors import CaptchaDetected, ConfigError, EmptyQuery
from serpintent.serp_schema import ResultBlock, ResultBlockType, SerpDocument


@dataclass(frozen=True)
class BlockSelectors:
    container_selector: str = ""
    title_selector: Optional[str] = None
    snippet_selector: Optional[str] = None
    url_selector: Optional[str] = None
    item_selector: Optional[str] = None


@dataclass(frozen=True)
class SelectorConfig:
    blocks: dict[ResultBlockType, BlockSelectors]
    captcha_markers: tuple[str, ...]
    related_searches_selector: str = ""

    def __post_init__(self):
        missing = [t.value for t in ResultBlockType if t not in self.blocks]
        if missing:
            raise ConfigError(f"selector config lacks entries for: {', '.join(missing)}")
        if not self.captcha_markers or not all(m for m in self.captcha_markers):
            raise ConfigError("captcha_markers must be a non-empty list of non-empty strings")

    @classmethod
    def from_dict(cls, obj: dict) -> "SelectorConfig":
        try:
            raw_blocks = obj["blocks"]
            markers = obj["captcha_markers"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"selector config missing key {exc}") from None
        blocks = {}
        for name, entry in raw_blocks.items():
            try:
                block_type = ResultBlockType(name)
            except ValueError:
                raise ConfigError(f"selector config names unknown block type {name!r}") from None
            allowed = set(BlockSelectors.__dataclass_fields__)
            unknown = set(entry) - allowed
            if unknown:
                raise ConfigError(f"{name}: unknown selector keys {sorted(unknown)}")
            blocks[block_type] = BlockSelectors(**entry)
        return cls(
            blocks=blocks,
            captcha_markers=tuple(markers),
            related_searches_selector=obj.get("related_searches_selector", ""),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SelectorConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "SelectorConfig":
        text = resources.files("serpintent").joinpath("data/selectors.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))


@dataclass
class ParseReport:
    blocks_found: dict[ResultBlockType, int] = field(
        default_factory=lambda: {t: 0 for t in ResultBlockType}
    )
    warnings: list[str] = field(default_factory=list)


def detect_captcha(html: str, config: SelectorConfig) -> bool:
    """True iff any configured captcha marker occurs in ``html`` (case-insensitive)."""
    lowered = html.lower()
    return any(marker.lower() in lowered for marker in config.captcha_markers)


def _text(el: Optional[Tag]) -> Optional[str]:
    if el is None:
        return None
    text = " ".join(el.get_text(" ", strip=True).split())
    return text or None


def _url(el: Optional[Tag]) -> Optional[str]:
    if el is None:
        return None
    for attr in ("href", "src", "data-url"):
        value = el.get(attr)
        if value:
            return value.strip()
    return _text(el)


def _first(container: Tag, selector: Optional[str]) -> Optional[Tag]:
    if not selector:
        return None
    return container.select_one(selector)


def _make_block(block_type, container: Tag, sel: BlockSelectors, position: int) -> ResultBlock:
    items = []
    if sel.item_selector:
        for el in container.select(sel.item_selector):
            text = _text(el)
            if text:
                items.append(text)
    return ResultBlock(
        block_type=block_type,
        position=position,
        title=_text(_first(container, sel.title_selector)),
        snippet=_text(_first(container, sel.snippet_selector)),
        url=_url(_first(container, sel.url_selector)),
        items=tuple(items),
    )


def parse_html(
    html: str,
    query: str,
    config: SelectorConfig,
    fetched_at: str,
) -> tuple[SerpDocument, ParseReport]:
    """Extract typed result blocks from one results page.

    Blocks are numbered 1..n in document order of their container element;
    when two block types claim the same element, the enum order decides.
    A selector that matches nothing only adds a warning.
    """
    if not query or not query.strip():
        raise EmptyQuery("query must be non-empty")
    if detect_captcha(html, config):
        raise CaptchaDetected(f"captcha page returned for {query!r}")

    # html5lib recovers from broken markup the way browsers do
    soup = BeautifulSoup(html, "html5lib")
    order = {id(el): i for i, el in enumerate(soup.find_all(True))}
    report = ParseReport()

    found = []
    for type_index, block_type in enumerate(ResultBlockType):
        sel = config.blocks[block_type]
        if not sel.container_selector:
            continue
        matches = soup.select(sel.container_selector)
        if not matches:
            report.warnings.append(f"no match for {block_type.value}")
            continue
        report.blocks_found[block_type] = len(matches)
        for el in matches:
            found.append((order[id(el)], type_index, block_type, el))

    found.sort(key=lambda t: (t[0], t[1]))
    blocks = [
        _make_block(block_type, el, config.blocks[block_type], pos)
        for pos, (_, _, block_type, el) in enumerate(found, start=1)
    ]

    related = []
    if config.related_searches_selector:
        for el in soup.select(config.related_searches_selector):
            text = _text(el)
            if text:
                related.append(text)

    doc = SerpDocument(
        query=query.strip(),
        fetched_at=fetched_at,
        blocks=tuple(blocks),
        related_searches=tuple(related),
        parse_warnings=tuple(report.warnings),
    )
    return doc, report
