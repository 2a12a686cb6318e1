"""
Scene-parameter estimation from filtered residual clips.

Everything here is threshold-relative: thresholds are multiples of a noise
floor measured on the same clip, or fractions of a frame maximum, so
rescaling a residual leaves every decision unchanged.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError, PreconditionError, RangeError
from .spacetime import spacetime_project

ACTIVITIES = ("absent", "static_presence", "walking", "oscillatory")


class NoiseFloorWarning(UserWarning):
    """The interval used for the noise floor seems to contain signal."""


@dataclass(frozen=True)
class DetectionSpec:
    presence_k: float = 4.0
    extent_fraction: float = 0.2
    min_event_frames: int = 5
    walk_speed_threshold: float = 0.3
    oscillation_min_cycles: int = 2
    oscillation_min_amplitude: float = 1.5
    smooth_window: int = 1

    def __post_init__(self):
        for name in ("presence_k", "min_event_frames", "walk_speed_threshold",
                     "oscillation_min_cycles", "oscillation_min_amplitude", "smooth_window"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.extent_fraction < 1.0:
            raise ParameterError(f"extent_fraction must lie in (0, 1), got {self.extent_fraction}")
        if self.smooth_window % 2 == 0:
            raise ParameterError("smooth_window must be odd")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown detection fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Location:
    centroid: tuple[float, float]
    box: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    degenerate: bool = False

    @property
    def width(self):
        return self.box[2] - self.box[0] + 1

    @property
    def height(self):
        return self.box[3] - self.box[1] + 1


@dataclass
class DetectionReport:
    present: list
    energy: list
    centroids: list
    extents: list
    boxes: list
    body_width: float | None
    body_height: float | None
    clothing_color: object
    activity: str
    provenance: dict

    def to_dict(self):
        frames = []
        for t in range(len(self.present)):
            frames.append({
                "t": t,
                "present": bool(self.present[t]),
                "energy": self.energy[t],
                "centroid": self.centroids[t],
                "extent": self.extents[t],
                "box": self.boxes[t],
            })
        return {
            "frames": frames,
            "body_width": self.body_width,
            "body_height": self.body_height,
            "clothing_color": self.clothing_color,
            "activity": self.activity,
            "provenance": self.provenance,
        }

    def to_json(self):
        return dumps_report(self.to_dict())


def _round6(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite value in report")
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round6(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round6(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round6(obj.item())
    return obj


def dumps_report(d):
    """Deterministic JSON: sorted keys, floats at 6 significant digits."""
    return json.dumps(_round6(d), sort_keys=True, indent=1) + "\n"


# --- noise floor --------------------------------------------------------------


def _mad_sigma(x):
    x = np.asarray(x, dtype=np.float64).ravel()
    return 1.4826 * float(np.median(np.abs(x - np.median(x))))


def noise_floor(residual, empty_interval):
    """
    Robust noise standard deviation, 1.4826 * MAD, over all samples in the
    half-open frame range ``empty_interval``.

    Warns with ``NoiseFloorWarning`` when the pooled estimate exceeds twice
    the first-quartile per-frame estimate, a sign that the interval is not
    actually empty.
    """
    t0, t1 = (int(v) for v in empty_interval)
    if not 0 <= t0 < t1 <= residual.frame_count:
        raise RangeError(f"noise interval [{t0}, {t1}) outside clip of {residual.frame_count} frames")
    if t1 - t0 < 3:
        raise ParameterError("noise interval must span at least 3 frames")
    block = residual.data[t0:t1]
    sigma = _mad_sigma(block)
    per_frame = np.array([_mad_sigma(fr) for fr in block])
    q1 = float(np.percentile(per_frame, 25))
    if sigma > 2.0 * q1:
        warnings.warn(
            f"noise floor {sigma:.3g} is more than twice the quartile frame estimate {q1:.3g}; "
            "the interval may contain the subject",
            NoiseFloorWarning,
            stacklevel=2,
        )
    return sigma


# --- presence -------------------------------------------------------------------


def frame_energy(residual):
    """Spatial RMS of every frame, channels combined as a vector magnitude."""
    d = residual.data.astype(np.float64)
    return np.sqrt(np.mean(np.sum(d * d, axis=1), axis=(1, 2)))


def _runs(mask):
    """Half-open ``(start, stop)`` pairs of the True runs in a 1-D mask."""
    m = np.concatenate([[0], np.asarray(mask, dtype=np.int8), [0]])
    edges = np.flatnonzero(np.diff(m))
    return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


def _voted_runs(excess, level, min_frames):
    cand = excess > level
    padded = np.concatenate([[False, False], cand, [False, False]]).astype(int)
    votes = np.convolve(padded, np.ones(5, dtype=int), mode="valid")
    return [(s, e) for s, e in _runs(votes >= 3) if e - s >= min_frames]


def _refine_run(excess, s, e):
    """Move a run's edges to where ``excess`` crosses half its median over the run."""
    n = len(excess)
    half = 0.5 * float(np.median(excess[s:e]))
    lo, hi = s, e
    while lo > 0 and excess[lo - 1] >= half:
        lo -= 1
    while lo < hi and excess[lo] < half:
        lo += 1
    while hi < n and excess[hi] >= half:
        hi += 1
    while hi > lo and excess[hi - 1] < half:
        hi -= 1
    return lo, hi


def presence_track(residual, spec, sigma):
    """
    Per-frame presence flags and energies (in units of ``sigma``).

    The statistic is the frame RMS with the expected noise power removed;
    a frame is a candidate when it exceeds ``presence_k * sigma``. Candidates
    are cleaned by a 5-frame majority vote, runs shorter than
    ``min_event_frames`` are dropped, and each surviving run's edges are
    moved to where the statistic crosses half of the run's median level.
    Centered box filtering makes that crossing coincide with the true onset.

    Refined edges depend on which frames a run holds, so on their own they
    could drop frames that a stricter threshold keeps. The result is
    therefore the union of the refined runs at every threshold at least as
    strict as ``presence_k``, which makes it monotone in ``presence_k``.
    Runs nest across thresholds, so each distinct run is refined once.
    """
    energy = frame_energy(residual)
    n = len(energy)
    if sigma <= 0:
        present = energy > 0
        peak = float(energy.max())
        return present, (energy / peak if peak > 0 else np.zeros(n))
    sigma_eff = float(sigma)
    excess = np.sqrt(np.maximum(energy ** 2 - residual.channels * sigma_eff ** 2, 0.0))
    base = spec.presence_k * sigma_eff
    levels = np.concatenate([[base], np.unique(excess[excess > base])])
    present = np.zeros(n, dtype=bool)
    seen = set()
    for level in levels:
        runs = _voted_runs(excess, level, spec.min_event_frames)
        if not runs:
            break
        for run in runs:
            if run not in seen:
                seen.add(run)
                lo, hi = _refine_run(excess, *run)
                present[lo:hi] = True
    return present, energy / sigma_eff


# --- localization ------------------------------------------------------------------


def _magnitude(data):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 3:
        return np.sqrt(np.sum(data * data, axis=0)) if data.shape[0] > 1 else np.abs(data[0])
    return np.abs(data)


def _run_through(profile, idx, level):
    lo = hi = idx
    while lo > 0 and profile[lo - 1] >= level:
        lo -= 1
    while hi < len(profile) - 1 and profile[hi + 1] >= level:
        hi += 1
    return lo, hi


def locate(frame, spec):
    """
    Centroid and extent box of the dominant impact in one frame.

    Each channel's median is first subtracted so a uniform offset (left,
    for instance, by removing a global lighting curve that the subject
    itself shifted) does not move the estimate. Pixels whose magnitude
    reaches ``extent_fraction`` of the frame maximum are thresholded and the connected region holding the maximum is kept.
    The centroid (x = column, y = row) is the magnitude-weighted mean over
    that region. The box spans the above-threshold run along the row and
    the column through the centroid; for a convex blob this is its tight
    bounding box, without the outward bias that isolated noisy edge pixels
    would give.
    """
    data = np.asarray(frame.data if hasattr(frame, "data") else frame, dtype=np.float64)
    if data.ndim == 3:
        data = data - np.median(data.reshape(data.shape[0], -1), axis=1)[:, None, None]
    else:
        data = data - np.median(data)
    mag = _magnitude(data)
    h, w = mag.shape
    peak = float(mag.max())
    if peak <= 0 or float(mag.min()) == peak:
        return Location(((w - 1) / 2.0, (h - 1) / 2.0), (0, 0, w - 1, h - 1), True)
    level = spec.extent_fraction * peak
    mask = mag >= level
    labels, _ = ndimage.label(mask)
    py, px = np.unravel_index(int(np.argmax(mag)), mag.shape)
    region = labels == labels[py, px]
    ys, xs = np.nonzero(region)
    wts = mag[ys, xs]
    total = float(wts.sum())
    cx = float(np.dot(wts, xs) / total)
    cy = float(np.dot(wts, ys) / total)
    ix, iy = int(round(cx)), int(round(cy))
    if not region[iy, ix]:
        ix, iy = int(px), int(py)
    x0, x1 = _run_through(np.where(region[iy], mag[iy], 0.0), ix, level)
    y0, y1 = _run_through(np.where(region[:, ix], mag[:, ix], 0.0), iy, level)
    x0, x1 = min(x0, math.floor(cx)), max(x1, math.ceil(cx))
    y0, y1 = min(y0, math.floor(cy)), max(y1, math.ceil(cy))
    return Location((cx, cy), (int(x0), int(y0), int(x1), int(y1)))


# --- color -----------------------------------------------------------------------


def color_estimate(residual, present, boxes):
    """
    Mean signed residual per channel inside the extent boxes of present
    frames, divided by the channel with the largest magnitude.

    Returns the string ``"gray"`` for single-channel clips.
    """
    present = np.asarray(present, dtype=bool)
    if not present.any():
        raise PreconditionError("color estimation needs at least one present frame")
    if residual.channels == 1:
        return "gray"
    sums = np.zeros(residual.channels)
    count = 0
    for t in np.nonzero(present)[0]:
        x0, y0, x1, y1 = boxes[t]
        patch = residual.data[t, :, y0:y1 + 1, x0:x1 + 1].astype(np.float64)
        sums += patch.sum(axis=(1, 2))
        count += patch.shape[1] * patch.shape[2]
    mean = sums / count
    dom = mean[int(np.argmax(np.abs(mean)))]
    if dom == 0:
        return [0.0] * residual.channels
    return [float(v) for v in mean / dom]


# --- activity --------------------------------------------------------------------


def ridge_positions(plot, frames=None):
    """
    Sub-pixel ridge position for each column of an abs_mean plot.

    The position is the baseline-subtracted weighted mean over the
    contiguous samples above half the ridge height around the maximum.
    """
    data = np.asarray(plot.data, dtype=np.float64)
    cols = range(data.shape[1]) if frames is None else frames
    out = []
    for t in cols:
        col = data[:, t]
        base = float(np.median(col))
        top = int(np.argmax(col))
        height = col[top] - base
        if height <= 0:
            out.append(float(top))
            continue
        half = base + 0.5 * height
        lo = top
        while lo > 0 and col[lo - 1] >= half:
            lo -= 1
        hi = top
        while hi < len(col) - 1 and col[hi + 1] >= half:
            hi += 1
        w = col[lo:hi + 1] - base
        out.append(float(np.dot(w, np.arange(lo, hi + 1)) / w.sum()))
    return np.array(out)


def _mean_crossings(x, band):
    """Crossings of the mean, counted with a +/- band of hysteresis."""
    m = float(np.mean(x))
    state = 0
    crossings = 0
    for v in x:
        if v > m + band:
            s = 1
        elif v < m - band:
            s = -1
        else:
            continue
        if state and s != state:
            crossings += 1
        state = s
    return crossings


def classify_activity(horizontal, vertical, present, spec):
    """
    Coarse activity label from the horizontal abs_mean space-time plot.

    ``walking``: least-squares ridge speed above
    ``walk_speed_threshold`` and a consistent net displacement over a
    quarter of the frame width. ``oscillatory``: at least
    ``2 * oscillation_min_cycles`` mean crossings of at least
    ``oscillation_min_amplitude`` pixels without that displacement.
    ``vertical`` is accepted for symmetry with the plot pair; only the
    horizontal plot drives the decision.
    """
    present = np.asarray(present, dtype=bool)
    frames = np.nonzero(present)[0]
    if len(frames) == 0:
        return "absent"
    pos = ridge_positions(horizontal, frames)
    if len(pos) < 2:
        return "static_presence"
    width = horizontal.data.shape[0]
    steps, slopes, lengths = [], [], []
    for s, e in _runs(present):
        if e - s < 2:
            continue
        seg = ridge_positions(horizontal, range(s, e))
        steps.extend(np.diff(seg).tolist())
        # a fitted slope, unlike single steps, survives a ridge that moves in jumps on a coarse grid
        slopes.append(np.polyfit(np.arange(s, e, dtype=np.float64), seg, 1)[0])
        lengths.append(e - s)
    steps = np.array(steps) if steps else np.zeros(1)
    speed = float(abs(np.average(slopes, weights=lengths))) if slopes else 0.0
    k = max(1, min(5, len(pos) // 4))
    net = float(np.median(pos[-k:]) - np.median(pos[:k]))
    # stalled steps on a coarse grid are neutral; only steps against the net motion count
    consistent = np.mean(np.sign(steps) == -np.sign(net)) <= 0.4 if net != 0 else False
    if speed > spec.walk_speed_threshold and abs(net) > 0.25 * width and consistent:
        return "walking"
    if abs(net) <= 0.25 * width and _mean_crossings(pos, spec.oscillation_min_amplitude) >= 2 * spec.oscillation_min_cycles:
        return "oscillatory"
    return "static_presence"


# --- orchestration ----------------------------------------------------------------


def detect(residual, spec, empty_interval, sigma=None):
    """
    Full per-clip estimate from a filtered residual clip.

    ``sigma`` defaults to the noise floor of ``empty_interval``.
    """
    if sigma is None:
        sigma = noise_floor(residual, empty_interval)
    present, energy = presence_track(residual, spec, sigma)
    n = residual.frame_count
    centroids, extents, boxes = [None] * n, [None] * n, [None] * n
    for t in np.nonzero(present)[0]:
        loc = locate(residual.data[t], spec)
        centroids[t] = [loc.centroid[0], loc.centroid[1]]
        extents[t] = [loc.width, loc.height]
        boxes[t] = list(loc.box)
    if present.any():
        ws = [e[0] for e in extents if e is not None]
        hs = [e[1] for e in extents if e is not None]
        body_w, body_h = float(np.median(ws)), float(np.median(hs))
        color = color_estimate(residual, present, boxes)
    else:
        body_w = body_h = None
        color = None
    hplot = spacetime_project(residual, "horizontal", "abs_mean")
    vplot = spacetime_project(residual, "vertical", "abs_mean")
    activity = classify_activity(hplot, vplot, present, spec)
    return DetectionReport(
        present=[bool(p) for p in present],
        energy=[float(e) for e in energy],
        centroids=centroids,
        extents=extents,
        boxes=boxes,
        body_width=body_w,
        body_height=body_h,
        clothing_color=color,
        activity=activity,
        provenance={"spec": spec.to_dict(), "empty_interval": [int(v) for v in empty_interval]},
    )
