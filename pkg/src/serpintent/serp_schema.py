"""Data model for parsed search result pages and query records.

Every downstream stage exchanges ``SerpDocument`` values through the JSON
form produced by :func:`serialize_document`, so the field names and their
order here are a frozen contract.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Optional

from serpintent.errors import JsonError, SchemaError


class ResultBlockType(enum.Enum):
    KNOWLEDGE_GRAPH = "knowledge_graph"
    CALCULATOR = "calculator"
    DIRECT_ANSWER = "direct_answer"
    MAP = "map"
    LOCAL_RESULT = "local_result"
    COMMERCIAL_SPONSORED = "commercial_sponsored"
    TWITTER = "twitter"
    TOP_STORIES = "top_stories"
    VIDEOS = "videos"
    IMAGES = "images"
    CONTENT_NAVIGATION_BAR = "content_navigation_bar"
    FEATURED_SNIPPET = "featured_snippet"
    RICH_SNIPPETS = "rich_snippets"
    PEOPLE_ALSO_ASKED = "people_also_asked"
    SIMILAR_ENTITY = "similar_entity"
    TRANSLATOR = "translator"
    TOP_BUTTON_ADS = "top_button_ads"
    NATURAL_RESULTS = "natural_results"
    PARTNERS_BLOCK = "partners_block"
    OTHER_CARDS = "other_cards"

    @classmethod
    def parse(cls, name: str) -> "ResultBlockType":
        """Look up a block type by its serialized name; unknown names are rejected."""
        try:
            return cls(name)
        except ValueError:
            raise SchemaError(f"unknown block type {name!r}") from None


class ManualIntent(enum.Enum):
    INFORMATIONAL = "informational"
    NAVIGATIONAL = "navigational"
    TRANSACTIONAL = "transactional"


class ClusterIntent(enum.Enum):
    """Intents discovered by clustering.

    Comparison follows tie-breaking priority: ``INFORMATIONAL`` is the
    greatest and ``SEXUAL_RACISM`` the least.
    """

    INFORMATIONAL = "informational"
    LOCAL_PLACE = "local_place"
    SEXUAL_RACISM = "sexual_racism"

    @property
    def rank(self) -> int:
        # 0 is the highest priority
        return _INTENT_RANK[self]

    def __lt__(self, other):
        if not isinstance(other, ClusterIntent):
            return NotImplemented
        return self.rank > other.rank

    def __le__(self, other):
        if not isinstance(other, ClusterIntent):
            return NotImplemented
        return self.rank >= other.rank

    def __gt__(self, other):
        if not isinstance(other, ClusterIntent):
            return NotImplemented
        return self.rank < other.rank

    def __ge__(self, other):
        if not isinstance(other, ClusterIntent):
            return NotImplemented
        return self.rank <= other.rank

    @classmethod
    def by_priority(cls) -> list["ClusterIntent"]:
        return sorted(cls, key=lambda i: i.rank)


_INTENT_RANK = {
    ClusterIntent.INFORMATIONAL: 0,
    ClusterIntent.LOCAL_PLACE: 1,
    ClusterIntent.SEXUAL_RACISM: 2,
}


@dataclass(frozen=True)
class ResultBlock:
    block_type: ResultBlockType
    position: int
    title: Optional[str] = None
    snippet: Optional[str] = None
    url: Optional[str] = None
    items: tuple[str, ...] = ()

    def __post_init__(self):
        if isinstance(self.position, bool) or not isinstance(self.position, int):
            raise SchemaError(f"position must be an integer, got {self.position!r}")
        if self.position < 1:
            raise SchemaError(f"position must be >= 1, got {self.position}")
        object.__setattr__(self, "items", tuple(self.items))


@dataclass(frozen=True)
class SerpDocument:
    query: str
    fetched_at: str
    blocks: tuple[ResultBlock, ...] = ()
    related_searches: tuple[str, ...] = ()
    parse_warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.query, str) or not self.query.strip():
            raise SchemaError("query must be non-empty")
        _check_timestamp(self.fetched_at)
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "related_searches", tuple(self.related_searches))
        object.__setattr__(self, "parse_warnings", tuple(self.parse_warnings))
        for prev, cur in zip(self.blocks, self.blocks[1:]):
            if cur.position < prev.position:
                raise SchemaError(
                    f"blocks out of order: position {cur.position} after {prev.position}"
                )

    def blocks_of(self, block_type: ResultBlockType) -> list[ResultBlock]:
        return [b for b in self.blocks if b.block_type is block_type]


@dataclass(frozen=True)
class QueryRecord:
    query: str
    manual_label: Optional[ManualIntent] = None

    def __post_init__(self):
        if not self.query.strip():
            raise SchemaError("query must be non-empty")


def utc_now() -> str:
    """Current time as an RFC 3339 UTC string with second precision."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _check_timestamp(value: Any) -> None:
    if not isinstance(value, str):
        raise SchemaError(f"fetched_at must be a string, got {value!r}")
    text = value[:-1] + "+00:00" if value.endswith(("Z", "z")) else value
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        raise SchemaError(f"fetched_at is not an RFC 3339 timestamp: {value!r}") from None
    if parsed.tzinfo is None:
        raise SchemaError(f"fetched_at lacks a UTC offset: {value!r}")


def document_to_dict(doc: SerpDocument) -> dict:
    return {
        "query": doc.query,
        "fetched_at": doc.fetched_at,
        "blocks": [
            {
                "block_type": b.block_type.value,
                "position": b.position,
                "title": b.title,
                "snippet": b.snippet,
                "url": b.url,
                "items": list(b.items),
            }
            for b in doc.blocks
        ],
        "related_searches": list(doc.related_searches),
        "parse_warnings": list(doc.parse_warnings),
    }


def serialize_document(doc: SerpDocument) -> str:
    """Render ``doc`` as canonical JSON (fixed key order, 2-space indent, UTF-8 kept)."""
    return json.dumps(document_to_dict(doc), indent=2, ensure_ascii=False)


_DOC_KEYS = ("query", "fetched_at", "blocks", "related_searches", "parse_warnings")
_BLOCK_KEYS = ("block_type", "position", "title", "snippet", "url", "items")


def _require_keys(obj: Any, keys: tuple[str, ...], what: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be an object")
    missing = [k for k in keys if k not in obj]
    if missing:
        raise SchemaError(f"{what} is missing field(s): {', '.join(missing)}")
    extra = sorted(set(obj) - set(keys))
    if extra:
        raise SchemaError(f"{what} has unknown field(s): {', '.join(extra)}")


def _str_list(value: Any, what: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"{what} must be a list of strings")
    return tuple(value)


def _opt_str(value: Any, what: str) -> Optional[str]:
    if value is not None and not isinstance(value, str):
        raise SchemaError(f"{what} must be a string or null")
    return value


def document_from_dict(obj: Any) -> SerpDocument:
    _require_keys(obj, _DOC_KEYS, "document")
    if not isinstance(obj["query"], str):
        raise SchemaError("query must be a string")
    if not isinstance(obj["blocks"], list):
        raise SchemaError("blocks must be a list")
    blocks = []
    for i, raw in enumerate(obj["blocks"]):
        what = f"blocks[{i}]"
        _require_keys(raw, _BLOCK_KEYS, what)
        if not isinstance(raw["block_type"], str):
            raise SchemaError(f"{what}.block_type must be a string")
        blocks.append(
            ResultBlock(
                block_type=ResultBlockType.parse(raw["block_type"]),
                position=raw["position"],
                title=_opt_str(raw["title"], f"{what}.title"),
                snippet=_opt_str(raw["snippet"], f"{what}.snippet"),
                url=_opt_str(raw["url"], f"{what}.url"),
                items=_str_list(raw["items"], f"{what}.items"),
            )
        )
    return SerpDocument(
        query=obj["query"],
        fetched_at=obj["fetched_at"],
        blocks=tuple(blocks),
        related_searches=_str_list(obj["related_searches"], "related_searches"),
        parse_warnings=_str_list(obj["parse_warnings"], "parse_warnings"),
    )


def deserialize_document(text: str) -> SerpDocument:
    """Parse canonical JSON back into a validated :class:`SerpDocument`.

    Raises :class:`JsonError` for malformed text and :class:`SchemaError`
    for anything that violates the document contract.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JsonError(str(exc)) from exc
    return document_from_dict(obj)
