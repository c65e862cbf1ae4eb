"""Dataset files and synthetic threshold data.

Integer datasets are CSV with header ``x,y``. The writer prefixes a
``# universe_size=N`` comment so a round trip preserves ``N``; readers accept
files without it and fall back to the largest ``x`` (or an explicit ``N``).
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np

from .core import LabeledPoint, RandomStream, SortedDataset
from .genbounds import SourceDistribution

log = logging.getLogger(__name__)


def write_dataset(S: SortedDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# universe_size={S.universe_size}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for p in S.points:
            w.writerow([p.x, p.y])


def read_dataset(path, universe_size: int | None = None) -> SortedDataset:
    declared = None
    rows = []
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "universe_size":
                    declared = int(value)
                continue
            lines.append(line)
    reader = csv.DictReader(io.StringIO("".join(lines)))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y"]:
        raise ValueError(f"{path}: expected header 'x,y', got {reader.fieldnames}")
    for lineno, row in enumerate(reader, start=2):
        try:
            rows.append(LabeledPoint(int(row["x"]), int(row["y"])))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad row {row}: {exc}") from None
    N = universe_size or declared or max((p.x for p in rows), default=1)
    canonical = sorted(rows)
    if canonical != rows:
        log.warning("%s: examples not in canonical order; sorting on load", path)
    return SortedDataset(tuple(canonical), N)


def write_table(dist: SourceDistribution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "p"])
        for x in range(dist.universe_size):
            for y in (0, 1):
                w.writerow([x + 1, y, f"{dist.table[x, y]:.17g}"])


def read_table(path) -> SourceDistribution:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    N = max(int(r["x"]) for r in rows)
    table = np.zeros((N, 2))
    for r in rows:
        table[int(r["x"]) - 1, int(r["y"])] = float(r["p"])
    return SourceDistribution(N, table, {"kind": "table", "source": str(path)})


def write_convex(X: np.ndarray, y: np.ndarray, path) -> None:
    X = np.atleast_2d(X)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(X.shape[1])] + ["y"])
        for row, label in zip(X, y):
            w.writerow([f"{v:.17g}" for v in row] + [f"{label:.17g}"])


def read_convex(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 1
        if d < 1 or header != [f"x{j + 1}" for j in range(d)] + ["y"]:
            raise ValueError(f"{path}: expected header x1,...,xd,y; got {','.join(header)}")
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    if data.size == 0:
        return np.zeros((0, d)), np.zeros(0)
    return data[:, :d], data[:, d]


def synth_threshold_data(N: int, a: int, eta: float, n: int, rng: RandomStream) -> tuple[SortedDataset, SourceDistribution]:
    """Sample ``n`` examples with ``x`` uniform on ``[N]`` and label ``x >= a`` flipped w.p. ``eta``.

    Returns the canonical dataset and the exact distribution it came from.
    """
    if N < 1 or n < 0:
        raise ValueError("need N >= 1 and n >= 0")
    dist = SourceDistribution.threshold(N, a, eta)
    return dist.sample(n, rng), dist


def ensure_parent(path) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True)
    return p
