"""Horizontal and vertical space-time plots of residual clips."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import ParameterError
from .video_model import LUMA_709


@dataclass(frozen=True, eq=False)
class SpaceTimePlot:
    """``data`` is (space, time): one row per column x (horizontal) or row y (vertical)."""

    axis: str
    data: np.ndarray
    reduction: str

    @property
    def frame_count(self):
        return self.data.shape[1]


def _luma(clip):
    data = clip.data.astype(np.float64)
    if clip.channels == 3:
        return np.tensordot(data, LUMA_709, axes=(1, 0))
    return data[:, 0]


def spacetime_project(clip, axis, reduction="abs_mean", roi=None):
    """
    Collapse a clip over one spatial axis.

    ``horizontal`` averages over rows, leaving x against t; ``vertical``
    averages over columns, leaving y against t. ``roi`` is an optional
    (x0, y0, x1, y1) half-open crop.
    """
    if axis not in ("horizontal", "vertical"):
        raise ParameterError(f"axis must be horizontal or vertical, got {axis!r}")
    if reduction not in ("signed_mean", "abs_mean"):
        raise ParameterError(f"reduction must be signed_mean or abs_mean, got {reduction!r}")
    y = _luma(clip)
    if roi is not None:
        x0, y0, x1, y1 = (int(v) for v in roi)
        if not (0 <= x0 < x1 <= clip.width and 0 <= y0 < y1 <= clip.height):
            raise ParameterError(f"roi {roi} lies outside the {clip.width}x{clip.height} frame")
        y = y[:, y0:y1, x0:x1]
    if reduction == "abs_mean":
        y = np.abs(y)
    reduced = y.mean(axis=1) if axis == "horizontal" else y.mean(axis=2)
    return SpaceTimePlot(axis, reduced.T.copy(), reduction)


def diverging_rgb(values):
    """Map values to RGB uint8: negative blue, zero mid-gray, positive red."""
    v = np.asarray(values, dtype=np.float64)
    peak = float(np.abs(v).max()) if v.size else 0.0
    u = v / peak if peak > 0 else np.zeros_like(v)
    pos = np.clip(u, 0, 1)
    neg = np.clip(-u, 0, 1)
    r = 0.5 + 0.5 * pos - 0.5 * neg
    g = 0.5 - 0.5 * pos - 0.5 * neg
    b = 0.5 - 0.5 * pos + 0.5 * neg
    rgb = np.stack([r, g, b], axis=-1)
    return np.rint(rgb * 255.0).astype(np.uint8)


def render_plot(plot, path):
    """Write ``path`` as a PNG heatmap and a sibling ``.csv`` of raw values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rgb = diverging_rgb(plot.data)
    cv2.imwrite(str(path.with_suffix(".png")), np.ascontiguousarray(rgb[:, :, ::-1]))
    write_plot_csv(plot, path.with_suffix(".csv"))


def write_plot_csv(plot, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"t{t}" for t in range(plot.frame_count)])
        for row in plot.data:
            w.writerow([format(float(v), ".17g") for v in row])


def read_plot_csv(path, axis, reduction):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    return SpaceTimePlot(axis, data.reshape(len(rows) - 1, len(rows[0])), reduction)
