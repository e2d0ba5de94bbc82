"""Output writers: CSV tables, confusion grids, PGM weight tiles and figures."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
    return path


class CsvStream:
    """CSV file that is flushed after every row, so partial runs leave usable output."""

    def __init__(self, path, header: Sequence[str]):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(header)
        self._fh.flush()

    def write(self, row: Sequence):
        self._w.writerow(row)
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def confusion_text(cm: np.ndarray) -> str:
    """Plain-text grid: header row of predicted classes, one row per true class."""
    cm = np.asarray(cm)
    width = max(5, len(str(int(cm.max()))) + 1 if cm.size else 5)
    head = "true\\pred".ljust(10) + "".join(str(c).rjust(width) for c in range(cm.shape[1]))
    lines = [head]
    for i, row in enumerate(cm):
        lines.append(str(i).ljust(10) + "".join(str(int(v)).rjust(width) for v in row))
    return "\n".join(lines) + "\n"


def weight_grid(w: np.ndarray, shape: tuple[int, int] | None = None, w_max: float | None = None) -> np.ndarray:
    """Arrange each neuron's incoming weights as a tile in a square uint8 mosaic.

    Tiles are square when n_input is a perfect square, else one column each.
    """
    n_in, n_exc = w.shape
    if shape is None:
        r = math.isqrt(n_in)
        shape = (r, r) if r * r == n_in else (n_in, 1)
    h, wd = shape
    if h * wd != n_in:
        raise ValueError(f"tile shape {shape} does not cover {n_in} inputs")
    side = math.ceil(math.sqrt(n_exc))
    top = w_max if w_max is not None else (float(w.max()) or 1.0)
    tiles = np.clip(np.asarray(w, dtype=np.float64) / top, 0.0, 1.0)
    grid = np.zeros((side * h, side * wd), dtype=np.uint8)
    for j in range(n_exc):
        r, c = divmod(j, side)
        grid[r * h:(r + 1) * h, c * wd:(c + 1) * wd] = np.rint(tiles[:, j].reshape(h, wd) * 255).astype(np.uint8)
    return grid


def write_pgm(path, image: np.ndarray) -> Path:
    """Binary (P5) greyscale PGM, maxval 255."""
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    path = Path(path)
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only maxval 255 is supported")
    return np.frombuffer(parts[4], dtype=np.uint8, count=w * h).reshape(h, w)


# --- figures ---------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed metadata so repeated runs write identical files
    plt.rcParams["svg.hashsalt"] = "stdpsim"
    return plt


_SAVE_KW = {"metadata": {"Software": None}}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, **_SAVE_KW)
    _pyplot().close(fig)
    return path


def plot_training_curve(curves: dict[str, Sequence[tuple[int, float]]], path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, pts in curves.items():
        if pts:
            x, y = zip(*pts)
            ax.plot(x, y, marker="o", ms=3, label=name)
    ax.set_xlabel("training samples")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_confusion(cm: np.ndarray, path) -> Path:
    plt = _pyplot()
    cm = np.asarray(cm, dtype=np.float64)
    rows = cm.sum(axis=1, keepdims=True)
    frac = np.divide(cm, rows, out=np.zeros_like(cm), where=rows > 0)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(frac, cmap="viridis", vmin=0, vmax=1)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_xticks(range(cm.shape[1]))
    ax.set_yticks(range(cm.shape[0]))
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    return _save(fig, path)


def plot_weight_grid(grid: np.ndarray, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(grid, cmap="hot_r", vmin=0, vmax=255, interpolation="nearest")
    ax.set_axis_off()
    fig.tight_layout()
    return _save(fig, path)


def plot_quantization(rows, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    wl = [r.wordlength for r in rows]
    ax.plot(wl, [r.accuracy for r in rows], marker="o")
    ax.set_xscale("log", base=2)
    ax.set_xticks(wl)
    ax.set_xticklabels([str(v) for v in wl])
    ax.set_xlabel("wordlength (bits)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_dse(records, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [r.n_exc for r in records if r.accuracy is not None]
    ys = [r.accuracy for r in records if r.accuracy is not None]
    ax.plot(xs, ys, marker="o", label="evaluated")
    saved = [r for r in records if r.saved]
    if saved:
        ax.scatter([r.n_exc for r in saved], [r.accuracy for r in saved], color="red", zorder=3, label="saved")
    ax.set_xlabel("excitatory neurons")
    ax.set_ylabel("accuracy")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
