"""KMeans with k-means++ seeding, best-of-n restarts and elbow selection of K."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from serpintent.errors import EmptyInput, TooFewRows


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 3
    seed: int = 0
    max_iters: int = 300
    tol: float = 1e-4
    n_init: int = 10

    def __post_init__(self):
        if self.k < 1 or self.max_iters < 1 or self.n_init < 1 or self.tol < 0:
            raise ValueError(f"invalid KMeansConfig: {self}")


@dataclass(frozen=True)
class Standardization:
    mean: tuple[float, ...]
    std: tuple[float, ...]

    def apply(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        mean = np.asarray(self.mean)
        std = np.asarray(self.std)
        out = np.zeros_like(data)
        live = std > 0
        out[:, live] = (data[:, live] - mean[live]) / std[live]
        return out

    @classmethod
    def identity(cls, d: int) -> "Standardization":
        # std 1 and mean 0 leave the data untouched
        return cls((0.0,) * d, (1.0,) * d)


@dataclass
class KMeansModel:
    centroids: np.ndarray
    assignments: np.ndarray
    wcss: float
    iterations_run: int
    standardization: Optional[Standardization] = None
    seed: Optional[int] = None
    # wcss after every assignment step of the winning run
    wcss_trace: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def predict(self, data: np.ndarray) -> np.ndarray:
        """Nearest-centroid labels for already-standardized ``data``."""
        labels, _ = _assign(np.asarray(data, dtype=float), self.centroids)
        return labels


@dataclass(frozen=True)
class ElbowResult:
    k_values: list[int]
    wcss_values: list[float]
    selected_k: int
    distances: list[float]


def standardize(data) -> tuple[np.ndarray, Standardization]:
    """z-score every column with the population standard deviation.

    Zero-variance columns come out as all zeros.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EmptyInput("standardize needs at least one row")
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    # a constant column can still get a rounding-sized std; force it to 0
    std = np.where(np.ptp(data, axis=0) > 0, std, 0.0)
    params = Standardization(tuple(mean.tolist()), tuple(std.tolist()))
    return params.apply(data), params


def _sq_dists(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = data[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _assign(data: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = _sq_dists(data, centroids)
    labels = np.argmin(d2, axis=1)  # ties go to the lowest index
    return labels, d2[np.arange(len(data)), labels]


def _wcss(point_d2: np.ndarray) -> float:
    # sequential sum keeps the reduction order fixed
    return float(np.add.reduce(point_d2, dtype=float))


def compute_wcss(data, centroids, assignments) -> float:
    data = np.asarray(data, dtype=float)
    diff = data - np.asarray(centroids)[np.asarray(assignments)]
    return _wcss(np.einsum("ij,ij->i", diff, diff))


def kmeans_plus_plus(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(data)
    centroids = [data[rng.integers(n)]]
    closest = _sq_dists(data, np.array(centroids))[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centroids.append(data[idx])
        closest = np.minimum(closest, _sq_dists(data, data[idx][None, :])[:, 0])
    return np.array(centroids, dtype=float)


def _repair_empty(data, centroids, labels, point_d2) -> np.ndarray:
    """Move each empty cluster's centroid onto the point farthest from its own centroid."""
    counts = np.bincount(labels, minlength=len(centroids))
    empty = np.flatnonzero(counts == 0)
    if len(empty) == 0:
        return centroids
    centroids = centroids.copy()
    d2 = point_d2.copy()
    for c in empty:
        far = int(np.argmax(d2))
        centroids[c] = data[far]
        d2[far] = -1.0
    return centroids


def _lloyd(data: np.ndarray, centroids: np.ndarray, max_iters: int, tol: float):
    trace = []
    labels, point_d2 = _assign(data, centroids)
    trace.append(_wcss(point_d2))
    it = 0
    for it in range(1, max_iters + 1):
        k = len(centroids)
        new = np.zeros_like(centroids)
        counts = np.bincount(labels, minlength=k)
        np.add.at(new, labels, data)
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        new[~nonempty] = centroids[~nonempty]
        new = _repair_empty(data, new, labels, point_d2)
        shift = float(np.sqrt(((new - centroids) ** 2).sum()))
        centroids = new
        labels, point_d2 = _assign(data, centroids)
        trace.append(_wcss(point_d2))
        if shift < tol:
            break
    return centroids, labels, trace, it


def kmeans_fit(data, config: KMeansConfig) -> KMeansModel:
    """Best-of-``n_init`` KMeans; restart ``i`` is seeded with ``config.seed + i``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be a 2-D array")
    if len(data) < config.k:
        raise TooFewRows(f"{len(data)} rows cannot form {config.k} clusters")
    best = None
    for i in range(config.n_init):
        rng = np.random.default_rng(config.seed + i)
        init = kmeans_plus_plus(data, config.k, rng)
        centroids, labels, trace, iters = _lloyd(data, init, config.max_iters, config.tol)
        if best is None or trace[-1] < best.wcss:
            best = KMeansModel(
                centroids=centroids,
                assignments=labels,
                wcss=trace[-1],
                iterations_run=iters,
                seed=config.seed,
                wcss_trace=trace,
            )
    return best


def fit_matrix(data, config: KMeansConfig, scale: bool = True) -> KMeansModel:
    """Standardize (optionally) then fit; the transform is stored on the model."""
    data = np.asarray(data, dtype=float)
    if scale:
        z, params = standardize(data)
    else:
        z, params = data, Standardization.identity(data.shape[1])
    return replace(kmeans_fit(z, config), standardization=params)


def _chord_distances(ks: Sequence[int], wcss: Sequence[float]) -> list[float]:
    x0, y0, x1, y1 = ks[0], wcss[0], ks[-1], wcss[-1]
    dx, dy = x1 - x0, y1 - y0
    norm = float(np.hypot(dx, dy))
    return [abs(dy * (x - x0) - dx * (y - y0)) / norm for x, y in zip(ks, wcss)]


def elbow_select(data, k_min: int, k_max: int, template: KMeansConfig = KMeansConfig()) -> ElbowResult:
    """Fit every K in ``[k_min, k_max]`` and pick the one farthest from the end-point chord.

    Ties resolve to the smaller K.
    """
    data = np.asarray(data, dtype=float)
    if not 1 <= k_min < k_max <= len(data):
        raise ValueError(f"need 1 <= k_min < k_max <= rows, got {k_min}, {k_max}, {len(data)}")
    ks = list(range(k_min, k_max + 1))
    wcss = [kmeans_fit(data, replace(template, k=k)).wcss for k in ks]
    dist = _chord_distances(ks, wcss)
    best = max(range(len(ks)), key=lambda i: (dist[i], -i))
    return ElbowResult(ks, wcss, ks[best], dist)


def save_model(model: KMeansModel, spec_names: Sequence[str], path: Union[str, Path]) -> None:
    std = model.standardization or Standardization.identity(model.centroids.shape[1])
    payload = {
        "spec_names": list(spec_names),
        "standardization": {"mean": list(std.mean), "std": list(std.std)},
        "centroids": model.centroids.tolist(),
        "k": model.k,
        "seed": model.seed,
        "wcss": model.wcss,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: Union[str, Path]) -> tuple[KMeansModel, list[str]]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    std = obj["standardization"]
    model = KMeansModel(
        centroids=np.array(obj["centroids"], dtype=float),
        assignments=np.array([], dtype=int),
        wcss=float(obj["wcss"]),
        iterations_run=0,
        standardization=Standardization(tuple(std["mean"]), tuple(std["std"])),
        seed=obj.get("seed"),
    )
    return model, list(obj["spec_names"])
