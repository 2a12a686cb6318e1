"""
Reference baselines and difference clips.

Two baselines are supported: the mean of an operator-chosen empty interval
(``sub_interval``) and the mean of the whole clip (``whole_video``).
Either can be taken over linear intensities or over log intensities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError, PreconditionError, RangeError
from .video_model import RESIDUAL, SOURCE, Clip, Frame

DEFAULT_LOG_EPSILON = 1.0 / 255.0


@dataclass(frozen=True)
class ReferenceSpec:
    mode: str = "whole_video"
    interval: tuple[int, int] | None = None
    space: str = "linear"

    def __post_init__(self):
        if self.mode not in ("sub_interval", "whole_video"):
            raise ParameterError(f"reference mode must be sub_interval or whole_video, got {self.mode!r}")
        if self.space not in ("linear", "log"):
            raise ParameterError(f"reference space must be linear or log, got {self.space!r}")
        if self.mode == "sub_interval":
            if self.interval is None:
                raise ParameterError("sub_interval reference requires an interval [t0, t1)")
            t0, t1 = (int(v) for v in self.interval)
            if not 0 <= t0 < t1:
                raise RangeError(f"reference interval [{t0}, {t1}) is empty or negative")
            object.__setattr__(self, "interval", (t0, t1))
        elif self.interval is not None:
            raise ParameterError("whole_video reference takes no interval")

    def frame_range(self, frame_count):
        if self.mode == "whole_video":
            return 0, frame_count
        t0, t1 = self.interval
        if t1 > frame_count:
            raise RangeError(f"reference interval [{t0}, {t1}) exceeds clip length {frame_count}")
        return t0, t1

    def to_dict(self):
        return {
            "mode": self.mode,
            "interval": None if self.interval is None else list(self.interval),
            "space": self.space,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"mode", "interval", "space"}
        if unknown:
            raise ParameterError(f"unknown reference fields: {sorted(unknown)}")
        interval = d.get("interval")
        return cls(d.get("mode", "whole_video"), None if interval is None else tuple(interval), d.get("space", "linear"))


@dataclass(frozen=True, eq=False)
class ReferenceFrame:
    frame: Frame
    spec: ReferenceSpec


def log_space(clip, epsilon=DEFAULT_LOG_EPSILON):
    """Map every value v of a source clip to ln(v + epsilon)."""
    if not epsilon > 0:
        raise ParameterError(f"log epsilon must be positive, got {epsilon}")
    if clip.signedness != SOURCE or clip.domain != "linear":
        raise PreconditionError("log_space expects a linear source clip")
    data = np.log(clip.data.astype(np.float64) + epsilon)
    return clip.derive(
        data, signedness=RESIDUAL, domain="log", step={"op": "log_space", "epsilon": float(epsilon)}
    )


def build_reference(clip, spec):
    """Per-pixel mean over the frames selected by ``spec``."""
    if spec.space != clip.domain:
        raise PreconditionError(
            f"reference space {spec.space!r} does not match clip domain {clip.domain!r}"
        )
    t0, t1 = spec.frame_range(clip.frame_count)
    # f64 accumulation, sum then divide
    total = np.sum(clip.data[t0:t1], axis=0, dtype=np.float64)
    mean = total / (t1 - t0)
    signedness = SOURCE if spec.space == "linear" and clip.signedness == SOURCE else RESIDUAL
    return ReferenceFrame(Frame(mean, signedness), spec)


def subtract_reference(clip, ref):
    """Residual clip: every frame minus the reference frame."""
    if clip.data.shape[1:] != ref.frame.data.shape:
        raise ContractError(
            f"reference geometry {ref.frame.data.shape} does not match clip {clip.data.shape[1:]}"
        )
    if clip.domain != ref.spec.space:
        raise ContractError(f"clip domain {clip.domain!r} differs from reference space {ref.spec.space!r}")
    diff = clip.data.astype(np.float64) - ref.frame.data.astype(np.float64)
    return clip.derive(
        diff, signedness=RESIDUAL, step={"op": "subtract_reference", "reference": ref.spec.to_dict()}
    )


def residual(clip, spec, epsilon=DEFAULT_LOG_EPSILON):
    """Log-convert if ``spec.space`` asks for it, then subtract the reference."""
    if spec.space == "log" and clip.domain == "linear":
        clip = log_space(clip, epsilon)
    return subtract_reference(clip, build_reference(clip, spec))
