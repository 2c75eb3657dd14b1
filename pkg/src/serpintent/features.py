"""SERP feature vectors: presence flags and counts per result type."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from serpintent.errors import EmptyInput, LengthMismatch, SpecMismatch, TooFewRows
from serpintent.serp_schema import ResultBlockType, SerpDocument

RELATED_SEARCHES = "related_searches"


class FeatureKind(enum.Enum):
    BINARY = "binary"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class FeatureSpec:
    """One feature column.

    ``block_type`` names the result type the feature is read from; ``source``
    is used instead for document-level data (only ``"related_searches"`` is
    understood). Binary features are presence flags, numeric ones count items.
    """

    name: str
    kind: FeatureKind
    block_type: Optional[str] = None
    source: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind.value}
        if self.block_type is not None:
            out["block_type"] = self.block_type
        if self.source is not None:
            out["source"] = self.source
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureSpec":
        try:
            kind = FeatureKind(obj["kind"])
        except (KeyError, ValueError):
            raise SpecMismatch(f"feature {obj.get('name')!r} has no valid kind") from None
        return cls(obj["name"], kind, obj.get("block_type"), obj.get("source"))


def check_spec(spec: Sequence[FeatureSpec]) -> None:
    names = [f.name for f in spec]
    if len(set(names)) != len(names):
        raise SpecMismatch("feature names must be unique")
    for f in spec:
        if f.block_type is not None:
            try:
                ResultBlockType(f.block_type)
            except ValueError:
                raise SpecMismatch(
                    f"feature {f.name!r} names unknown block type {f.block_type!r}"
                ) from None
        elif f.source != RELATED_SEARCHES:
            raise SpecMismatch(f"feature {f.name!r} has no usable block_type or source")


def load_spec(path: Union[str, Path]) -> list[FeatureSpec]:
    with open(path, encoding="utf-8") as fh:
        spec = [FeatureSpec.from_dict(o) for o in json.load(fh)]
    check_spec(spec)
    return spec


def default_spec() -> list[FeatureSpec]:
    text = resources.files("serpintent").joinpath("data/features.json").read_text("utf-8")
    return [FeatureSpec.from_dict(o) for o in json.loads(text)]


@dataclass(frozen=True)
class FeatureVector:
    query: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class FeatureMatrix:
    spec: tuple[FeatureSpec, ...]
    rows: tuple[FeatureVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "spec", tuple(self.spec))
        object.__setattr__(self, "rows", tuple(self.rows))
        for row in self.rows:
            if len(row.values) != len(self.spec):
                raise LengthMismatch(
                    f"row for {row.query!r} has {len(row.values)} values, spec has {len(self.spec)}"
                )

    @property
    def queries(self) -> list[str]:
        return [r.query for r in self.rows]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.spec]

    def to_array(self) -> np.ndarray:
        return np.array([r.values for r in self.rows], dtype=float).reshape(
            len(self.rows), len(self.spec)
        )

    def select_columns(self, keep: Sequence[int]) -> "FeatureMatrix":
        keep = list(keep)
        return FeatureMatrix(
            spec=tuple(self.spec[i] for i in keep),
            rows=tuple(
                FeatureVector(r.query, tuple(r.values[i] for i in keep)) for r in self.rows
            ),
        )

    def select_rows(self, indices: Sequence[int]) -> "FeatureMatrix":
        return FeatureMatrix(self.spec, tuple(self.rows[i] for i in indices))


def extract_features(doc: SerpDocument, spec: Sequence[FeatureSpec]) -> FeatureVector:
    check_spec(spec)
    values = []
    for f in spec:
        if f.block_type is not None:
            blocks = doc.blocks_of(ResultBlockType(f.block_type))
            if f.kind is FeatureKind.BINARY:
                values.append(1.0 if blocks else 0.0)
            else:
                values.append(float(sum(len(b.items) for b in blocks)))
        else:
            n = len(doc.related_searches)
            values.append((1.0 if n else 0.0) if f.kind is FeatureKind.BINARY else float(n))
    return FeatureVector(doc.query, tuple(values))


def build_matrix(docs: Sequence[SerpDocument], spec: Sequence[FeatureSpec]) -> FeatureMatrix:
    if not docs:
        raise EmptyInput("no documents to build a feature matrix from")
    return FeatureMatrix(tuple(spec), tuple(extract_features(d, spec) for d in docs))


def pearson_matrix(data: np.ndarray) -> np.ndarray:
    """Column-wise Pearson r; a constant column correlates 0 with everything but itself."""
    data = np.asarray(data, dtype=float)
    if data.shape[0] < 2:
        raise TooFewRows("correlation needs at least 2 rows")
    centered = data - data.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    norms = np.sqrt(ss)
    constant = ss == 0
    safe = np.where(constant, 1.0, norms)
    r = (centered.T @ centered) / np.outer(safe, safe)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def correlation_matrix(m: FeatureMatrix) -> np.ndarray:
    return pearson_matrix(m.to_array())


def prune_correlated(m: FeatureMatrix, threshold: float = 0.9) -> tuple[FeatureMatrix, list[str]]:
    """Drop the later feature of every pair with ``|r| >= threshold``, scanning pairs in spec order."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    r = correlation_matrix(m)
    n = len(m.spec)
    dropped: set[int] = set()
    for i in range(n):
        if i in dropped:
            continue
        for j in range(i + 1, n):
            if j not in dropped and abs(r[i, j]) >= threshold:
                dropped.add(j)
    keep = [i for i in range(n) if i not in dropped]
    return m.select_columns(keep), [m.spec[i].name for i in sorted(dropped)]


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_matrix_csv(m: FeatureMatrix, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", *m.names])
        for row in m.rows:
            w.writerow([row.query, *(_fmt(v) for v in row.values)])


def read_matrix_csv(
    path: Union[str, Path], spec: Optional[Sequence[FeatureSpec]] = None
) -> FeatureMatrix:
    """Read a matrix CSV; column kinds come from ``spec`` (default spec when omitted),
    and columns it does not know are read as numeric."""
    known = {f.name: f for f in (spec if spec is not None else default_spec())}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise EmptyInput(f"{path}: missing header")
        cols = [known.get(n, FeatureSpec(n, FeatureKind.NUMERIC, source=f"column:{n}")) for n in header[1:]]
        rows = [FeatureVector(rec[0], tuple(float(v) for v in rec[1:])) for rec in reader if rec]
    return FeatureMatrix(tuple(cols), tuple(rows))
