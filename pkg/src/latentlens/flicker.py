"""
Removal of global lighting sway.

A per-frame median intensity curve is built from the clip itself; each
pixel's time series then has its component along that curve projected
out. Pixel means are preserved.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, EmptyInputError
from .video_model import LUMA_709


@dataclass(frozen=True, eq=False)
class GlobalCurve:
    values: np.ndarray
    centered: bool
    norm: float

    def __len__(self):
        return len(self.values)


def global_median_curve(clip):
    """Per-frame median over all pixels (luma for RGB), mean-centered."""
    if clip.frame_count < 1:
        raise EmptyInputError("cannot build a curve from an empty clip")
    data = clip.data.astype(np.float64)
    if clip.channels == 3:
        data = np.tensordot(data, LUMA_709, axes=(1, 0))
    else:
        data = data[:, 0]
    med = np.median(data.reshape(clip.frame_count, -1), axis=1)
    g = med - med.mean()
    return GlobalCurve(g, True, float(np.sqrt(np.dot(g, g))))


def project_out(clip, curve):
    """
    Remove from every pixel series its projection on the centered curve.

    Series are centered before projecting and their means restored after.
    A zero-norm curve leaves the clip untouched and records a warning in
    the provenance.
    """
    if len(curve) != clip.frame_count:
        raise ContractError(f"curve length {len(curve)} differs from clip length {clip.frame_count}")
    g = np.asarray(curve.values, dtype=np.float64)
    g = g - g.mean()
    gg = float(np.dot(g, g))
    if gg <= 0.0 or not np.isfinite(gg):
        return clip.derive(clip.data, step={"op": "project_out", "warning": "zero-norm curve, nothing projected"})
    data = clip.data.astype(np.float64)
    mean = data.mean(axis=0)
    centered = data - mean
    coeff = np.tensordot(g, centered, axes=(0, 0)) / gg
    out = centered - g[:, None, None, None] * coeff[None] + mean
    return clip.derive(out, step={"op": "project_out", "curve_norm": float(np.sqrt(gg))})


def write_curve_csv(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", "median_value"])
        for i, v in enumerate(curve.values):
            w.writerow([i, format(float(v), ".17g")])
