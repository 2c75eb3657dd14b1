"""Write fixtures/blobs.csv: three 2-D Gaussian blobs, 30 points each, sigma 0.5."""

from pathlib import Path

import numpy as np

CENTERS = np.array([[0.0, 0.0], [12.0, 0.0], [6.0, 10.4]])


def make_blobs(seed: int = 7, n: int = 30, sigma: float = 0.5) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.vstack([c + sigma * rng.standard_normal((n, 2)) for c in CENTERS])


def main():
    pts = make_blobs()
    out = Path(__file__).resolve().parents[1] / "fixtures" / "blobs.csv"
    lines = ["query,x,y"] + [f"p{i:02d},{float(x)!r},{float(y)!r}" for i, (x, y) in enumerate(pts)]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
