"""
Frame and clip containers, gray conversion and frame-sequence I/O.

Frames are stored channel-planar, shape ``(channels, height, width)``. A clip
keeps its frames in one ``(frames, channels, height, width)`` array so that
geometry is homogeneous by construction.

Source clips (camera intensities in [0, 1]) are held as float32. Residual
clips (differences, log values, filtered evidence) are held as float64 so
that downstream estimators stay exactly scale-covariant.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    EmptyInputError,
    FormatError,
    GeometryError,
    ParameterError,
    RangeError,
)

SOURCE = "source"
RESIDUAL = "residual"

LUMA_709 = np.array([0.2126, 0.7152, 0.0722])

DIFF1_MAGIC = b"DIFF1\0"
_DIFF1_HEADER = struct.Struct("<6sIIIIBf")

_FRAME_RE = re.compile(r"^frame_(\d+)\.(png|ppm|pgm)$", re.IGNORECASE)


def _storage_dtype(signedness):
    return np.float32 if signedness == SOURCE else np.float64


def _check_signedness(signedness):
    if signedness not in (SOURCE, RESIDUAL):
        raise ParameterError(f"signedness must be 'source' or 'residual', got {signedness!r}")


@dataclass(frozen=True, eq=False)
class Frame:
    """One video frame, ``data`` shaped (channels, height, width)."""

    data: np.ndarray
    signedness: str = SOURCE

    def __post_init__(self):
        _check_signedness(self.signedness)
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3:
            raise GeometryError(f"frame data must be (channels, height, width), got shape {data.shape}")
        c, h, w = data.shape
        if c not in (1, 3):
            raise GeometryError(f"frames must have 1 or 3 channels, got {c}")
        if h < 1 or w < 1:
            raise GeometryError(f"frame must be at least 1x1, got {w}x{h}")
        data = np.array(data, dtype=_storage_dtype(self.signedness))
        if self.signedness == SOURCE and data.size and not (data.min() >= 0.0 and data.max() <= 1.0):
            raise RangeError("source frame values must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class Clip:
    """
    An ordered run of frames sharing geometry and signedness.

    ``data`` is shaped (frames, channels, height, width). ``domain`` records
    whether values are linear intensities or natural-log intensities, and
    ``provenance`` is a tuple of dicts appended by each processing step.
    """

    data: np.ndarray
    fps: float
    signedness: str = SOURCE
    domain: str = "linear"
    provenance: tuple = field(default=())

    def __post_init__(self):
        _check_signedness(self.signedness)
        if self.domain not in ("linear", "log"):
            raise ParameterError(f"domain must be 'linear' or 'log', got {self.domain!r}")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise ParameterError(f"fps must be positive, got {self.fps}")
        data = np.asarray(self.data)
        if data.ndim == 3:
            data = data[:, None]
        if data.ndim != 4:
            raise GeometryError(f"clip data must be (frames, channels, height, width), got shape {data.shape}")
        t, c, h, w = data.shape
        if t < 1:
            raise EmptyInputError("a clip needs at least one frame")
        if c not in (1, 3):
            raise GeometryError(f"clips must have 1 or 3 channels, got {c}")
        if h < 1 or w < 1:
            raise GeometryError(f"frames must be at least 1x1, got {w}x{h}")
        data = np.array(data, dtype=_storage_dtype(self.signedness))
        if self.signedness == SOURCE and not (data.min() >= 0.0 and data.max() <= 1.0):
            raise RangeError("source clip values must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @classmethod
    def from_frames(cls, frames, fps, provenance=()):
        frames = list(frames)
        if not frames:
            raise EmptyInputError("a clip needs at least one frame")
        first = frames[0]
        for i, fr in enumerate(frames):
            if fr.data.shape != first.data.shape:
                raise GeometryError(
                    f"frame {i} has geometry {fr.data.shape}, expected {first.data.shape}"
                )
            if fr.signedness != first.signedness:
                raise GeometryError(f"frame {i} signedness differs from frame 0")
        return cls(np.stack([fr.data for fr in frames]), fps, first.signedness, provenance=provenance)

    @property
    def frame_count(self):
        return self.data.shape[0]

    @property
    def channels(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[2]

    @property
    def width(self):
        return self.data.shape[3]

    @property
    def shape(self):
        return self.data.shape

    def frame(self, t):
        return Frame(self.data[t], self.signedness)

    @property
    def frames(self):
        return [self.frame(t) for t in range(self.frame_count)]

    def meta(self, source_path=None, ground_truth=None):
        return ClipMeta(
            source_path=None if source_path is None else str(source_path),
            fps=self.fps,
            width=self.width,
            height=self.height,
            channels=self.channels,
            frame_count=self.frame_count,
            ground_truth=ground_truth,
        )

    def derive(self, data, *, signedness=None, domain=None, step=None, fps=None):
        """New clip from ``data`` inheriting metadata, optionally logging a step."""
        prov = self.provenance + ((step,) if step is not None else ())
        return Clip(
            data,
            self.fps if fps is None else fps,
            self.signedness if signedness is None else signedness,
            self.domain if domain is None else domain,
            prov,
        )


@dataclass(frozen=True)
class ClipMeta:
    source_path: str | None
    fps: float
    width: int
    height: int
    channels: int
    frame_count: int
    ground_truth: str | None = None


def to_gray(frame):
    """Rec. 709 luma of an RGB frame; gray frames pass through unchanged."""
    if frame.channels == 1:
        return frame
    y = np.tensordot(LUMA_709, frame.data.astype(np.float64), axes=(0, 0))
    if frame.signedness == SOURCE:
        y = np.clip(y, 0.0, 1.0)
    return Frame(y[None], frame.signedness)


def clip_to_gray(clip):
    if clip.channels == 1:
        return clip
    y = np.tensordot(clip.data.astype(np.float64), LUMA_709, axes=(1, 0))[:, None]
    if clip.signedness == SOURCE:
        y = np.clip(y, 0.0, 1.0)
    return clip.derive(y, step={"op": "to_gray", "weights": "rec709"})


# --- I/O -------------------------------------------------------------------


def load_clip(path):
    """
    Read a DIFF1 container or a numbered frame directory with ``meta.json``.

    Integer images are normalized by their full-scale value (255 or 65535).
    """
    path = Path(path)
    if path.is_dir():
        return _load_sequence(path)
    if not path.exists():
        raise FormatError(f"no such clip: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(len(DIFF1_MAGIC))
    if magic != DIFF1_MAGIC:
        raise FormatError(f"{path} is neither a frame directory nor a DIFF1 container")
    return _load_diff1(path)


def _load_diff1(path):
    raw = Path(path).read_bytes()
    if len(raw) < _DIFF1_HEADER.size:
        raise FormatError(f"{path}: truncated DIFF1 header")
    magic, w, h, c, f, sign, fps = _DIFF1_HEADER.unpack_from(raw)
    if f == 0:
        raise EmptyInputError(f"{path}: container holds zero frames")
    if sign not in (0, 1):
        raise FormatError(f"{path}: bad signedness byte {sign}")
    count = f * c * h * w
    payload = np.frombuffer(raw, dtype="<f4", count=count, offset=_DIFF1_HEADER.size) if (
        len(raw) - _DIFF1_HEADER.size == 4 * count
    ) else None
    if payload is None:
        raise FormatError(f"{path}: payload size does not match header ({w}x{h}x{c}x{f})")
    signedness = RESIDUAL if sign else SOURCE
    data = payload.reshape(f, c, h, w)
    return Clip(data, float(fps), signedness, provenance=({"op": "load", "format": "diff1"},))


def _load_sequence(directory):
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise FormatError(f"{directory}: missing meta.json sidecar")
    try:
        meta = json.loads(meta_path.read_text())
        fps = float(meta["fps"])
        channels = int(meta["channels"])
        expected = int(meta["frame_count"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{meta_path}: unreadable sidecar ({exc})") from exc
    files = []
    for p in directory.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            files.append((int(m.group(1)), p))
    files.sort()
    if not files:
        raise EmptyInputError(f"{directory}: no frame_NNNNNN images")
    if len(files) != expected:
        raise FormatError(f"{directory}: meta.json says {expected} frames, found {len(files)}")
    frames = []
    shape = None
    for idx, p in files:
        img = cv2.imread(str(p), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise FormatError(f"cannot decode {p}")
        if img.dtype == np.uint8:
            scale = 255.0
        elif img.dtype == np.uint16:
            scale = 65535.0
        else:
            raise FormatError(f"{p}: unsupported sample type {img.dtype}")
        if img.ndim == 2:
            planes = img[None]
        elif img.shape[2] == 3:
            planes = img[:, :, ::-1].transpose(2, 0, 1)
        elif img.shape[2] == 4:
            planes = img[:, :, 2::-1].transpose(2, 0, 1)
        else:
            raise FormatError(f"{p}: unsupported channel layout {img.shape}")
        if planes.shape[0] != channels:
            if channels == 1 and planes.shape[0] == 3 and np.all(planes == planes[:1]):
                planes = planes[:1]
            else:
                raise FormatError(f"{p}: has {planes.shape[0]} channels, meta.json says {channels}")
        if shape is None:
            shape = planes.shape
        elif planes.shape != shape:
            raise GeometryError(
                f"frame {idx} ({p.name}) is {planes.shape[2]}x{planes.shape[1]}, "
                f"expected {shape[2]}x{shape[1]}"
            )
        frames.append(planes.astype(np.float64) / scale)
    data = np.stack(frames)
    return Clip(data, fps, SOURCE, provenance=({"op": "load", "format": "png-seq"},))


def save_clip(clip, path, format="diff1", ext="png"):
    """
    Write ``clip`` as a DIFF1 container or an 8-bit frame sequence.

    Frame sequences only accept source clips; residuals must be normalized
    into [0, 1] first.
    """
    path = Path(path)
    if format == "diff1":
        _save_diff1(clip, path)
    elif format == "png-seq":
        _save_sequence(clip, path, ext)
    else:
        raise ParameterError(f"unknown clip format {format!r}")


def _save_diff1(clip, path):
    t, c, h, w = clip.shape
    header = _DIFF1_HEADER.pack(
        DIFF1_MAGIC, w, h, c, t, 1 if clip.signedness == RESIDUAL else 0, clip.fps
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(clip.data, dtype="<f4").tobytes())


def _save_sequence(clip, directory, ext):
    if clip.signedness != SOURCE:
        raise RangeError("residual clips must be normalized to a source clip before png-seq export")
    ext = ext.lower()
    if ext not in ("png", "ppm", "pgm"):
        raise ParameterError(f"unsupported frame extension {ext!r}")
    if ext == "pgm" and clip.channels != 1:
        raise ParameterError("pgm frames must be single-channel")
    if ext == "ppm" and clip.channels != 3:
        raise ParameterError("ppm frames must be RGB")
    directory.mkdir(parents=True, exist_ok=True)
    q = np.rint(clip.data.astype(np.float64) * 255.0).astype(np.uint8)
    for t in range(clip.frame_count):
        planes = q[t]
        img = planes[0] if clip.channels == 1 else planes[::-1].transpose(1, 2, 0)
        cv2.imwrite(str(directory / f"frame_{t:06d}.{ext}"), np.ascontiguousarray(img))
    meta = {"fps": clip.fps, "channels": clip.channels, "frame_count": clip.frame_count}
    (directory / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
