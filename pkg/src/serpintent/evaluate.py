"""Dataset loading, train/test split and clustering-vs-lexicon agreement metrics."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from serpintent.errors import BadLabel, LengthMismatch, SchemaError
from serpintent.serp_schema import ClusterIntent, ManualIntent, QueryRecord

logger = logging.getLogger(__name__)

LABELS = tuple(ClusterIntent.by_priority())


def load_dataset(path: Union[str, Path]) -> list[QueryRecord]:
    """Read ``query<TAB>label`` lines; the label may be blank."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            query, _, label = line.partition("\t")
            label = label.strip().lower()
            if label:
                try:
                    manual = ManualIntent(label)
                except ValueError:
                    raise BadLabel(line_no, label) from None
            else:
                manual = None
            try:
                records.append(QueryRecord(query.strip(), manual))
            except SchemaError as exc:
                raise SchemaError(f"line {line_no}: {exc}") from None
    return records


def split_train_test(records: Sequence, test_fraction: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle, then the first ceil(n * test_fraction) records form the test set."""
    if not 0 <= test_fraction <= 1:
        raise ValueError(f"test_fraction must be in [0, 1], got {test_fraction}")
    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    # round first so 30000 * 0.1 does not become 3001
    n_test = math.ceil(round(len(records) * test_fraction, 9))
    test = [records[i] for i in order[:n_test]]
    train = [records[i] for i in order[n_test:]]
    return train, test


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are actual (clustering) intents, columns predicted (lexicon) intents."""

    labels: tuple[ClusterIntent, ...]
    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.labels)
        if len(self.cells) != n or any(len(r) != n for r in self.cells):
            raise LengthMismatch(f"confusion matrix must be {n}x{n}")
        if any(c < 0 for r in self.cells for c in r):
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(map(sum, self.cells))

    def to_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int64)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], labels=LABELS) -> "ConfusionMatrix":
        return cls(tuple(labels), tuple(tuple(int(c) for c in r) for r in rows))


def confusion(actual: Sequence[ClusterIntent], predicted: Sequence[ClusterIntent]) -> ConfusionMatrix:
    if len(actual) != len(predicted):
        raise LengthMismatch(f"{len(actual)} actual vs {len(predicted)} predicted labels")
    index = {l: i for i, l in enumerate(LABELS)}
    cells = [[0] * len(LABELS) for _ in LABELS]
    for a, p in zip(actual, predicted):
        cells[index[a]][index[p]] += 1
    return ConfusionMatrix.from_rows(cells)


@dataclass(frozen=True)
class ClassMetrics:
    precision: dict[ClusterIntent, float]
    recall: dict[ClusterIntent, float]
    support: dict[ClusterIntent, int]


def precision_recall(cm: ConfusionMatrix) -> ClassMetrics:
    """Per-class precision (diag / column sum) and recall (diag / row sum).

    An empty column or row yields 0 and a logged warning.
    """
    a = cm.to_array()
    precision, recall, support = {}, {}, {}
    for i, label in enumerate(cm.labels):
        tp = int(a[i, i])
        col, row = int(a[:, i].sum()), int(a[i, :].sum())
        if col == 0:
            logger.warning("no predictions for %s; precision set to 0", label.value)
        if row == 0:
            logger.warning("no actual %s records; recall set to 0", label.value)
        precision[label] = tp / col if col else 0.0
        recall[label] = tp / row if row else 0.0
        support[label] = row
    return ClassMetrics(precision, recall, support)


def metrics_report(cm: ConfusionMatrix, metrics: ClassMetrics) -> dict:
    return {
        "labels": [l.value for l in cm.labels],
        "matrix": [list(r) for r in cm.cells],
        "per_class": {
            l.value: {
                "precision": round(metrics.precision[l], 3),
                "recall": round(metrics.recall[l], 3),
                "support": metrics.support[l],
            }
            for l in cm.labels
        },
    }


def format_table(cm: ConfusionMatrix, metrics: ClassMetrics) -> str:
    names = [l.value for l in cm.labels]
    width = max(len(n) for n in names) + 2
    head = "actual \\ predicted".ljust(width + 4) + "".join(n.rjust(width) for n in names)
    lines = [head + "precision".rjust(11) + "recall".rjust(9)]
    for label, row in zip(cm.labels, cm.cells):
        lines.append(
            label.value.ljust(width + 4)
            + "".join(str(c).rjust(width) for c in row)
            + f"{metrics.precision[label]:11.3f}{metrics.recall[label]:9.3f}"
        )
    return "\n".join(lines)


def load_matrix(path: Union[str, Path]) -> ConfusionMatrix:
    """Read a confusion matrix JSON: ``{"labels": [...], "matrix": [[...], ...]}``.

    ``labels`` is optional and defaults to the priority order.
    """
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    labels = tuple(ClusterIntent(l) for l in obj.get("labels", [l.value for l in LABELS]))
    if set(labels) != set(LABELS):
        raise SchemaError(f"matrix labels must be a permutation of {[l.value for l in LABELS]}")
    cm = ConfusionMatrix.from_rows(obj["matrix"], labels)
    # reorder into the canonical label order
    idx = [labels.index(l) for l in LABELS]
    return ConfusionMatrix.from_rows([[cm.cells[i][j] for j in idx] for i in idx])
