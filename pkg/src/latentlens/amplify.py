"""
Amplification of residual clips.

Two procedures are provided:

* ``dif_amplify``: 2D Gaussian smoothing of every frame, a centered uniform
  moving average in time, then sign-split contrast normalization against a
  single clip-wide maximum.
* ``wallcam_amplify``: block-mean down-sampling followed by an affine
  rescale ``gain * v + base_level`` clamped to [0, 1].

All filters work on float64 and never modify their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ParameterError, PreconditionError
from .video_model import RESIDUAL, SOURCE, Clip, Frame


@dataclass(frozen=True)
class DifAmplifySpec:
    gaussian_sigma: float = 3.0
    temporal_window: int = 25
    sign: str = "positive"

    def __post_init__(self):
        if not self.gaussian_sigma > 0:
            raise ParameterError(f"gaussian_sigma must be positive, got {self.gaussian_sigma}")
        if int(self.temporal_window) != self.temporal_window or self.temporal_window < 1 or self.temporal_window % 2 == 0:
            raise ParameterError(f"temporal_window must be an odd integer >= 1, got {self.temporal_window}")
        if self.sign not in ("positive", "negative"):
            raise ParameterError(f"sign must be positive or negative, got {self.sign!r}")

    def to_dict(self):
        return {"gaussian_sigma": float(self.gaussian_sigma), "temporal_window": int(self.temporal_window), "sign": self.sign}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"gaussian_sigma", "temporal_window", "sign"}
        if unknown:
            raise ParameterError(f"unknown dif amplify fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class WallcamAmplifySpec:
    downsample_factor: int = 4
    gain: float = 50.0
    base_level: float = 0.5

    def __post_init__(self):
        if int(self.downsample_factor) != self.downsample_factor or self.downsample_factor < 1:
            raise ParameterError(f"downsample_factor must be an integer >= 1, got {self.downsample_factor}")
        if not 0.0 <= self.base_level <= 1.0:
            raise ParameterError(f"base_level must lie in [0, 1], got {self.base_level}")
        if not math.isfinite(self.gain):
            raise ParameterError("gain must be finite")

    def to_dict(self):
        return {"downsample_factor": int(self.downsample_factor), "gain": float(self.gain), "base_level": float(self.base_level)}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"downsample_factor", "gain", "base_level"}
        if unknown:
            raise ParameterError(f"unknown wallcam amplify fields: {sorted(unknown)}")
        return cls(**d)


# --- spatial Gaussian -----------------------------------------------------


def gaussian_kernel(sigma):
    """Sampled 1D Gaussian with radius ceil(3 sigma), normalized to sum 1."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _mirror_pad(a, radius, axis):
    if a.shape[axis] == 1:
        mode = "edge"
    else:
        mode = "reflect"
    pad = [(0, 0)] * a.ndim
    pad[axis] = (radius, radius)
    return np.pad(a, pad, mode=mode)


def _convolve_axis(a, kernel, axis):
    radius = len(kernel) // 2
    padded = _mirror_pad(a, radius, axis)
    n = a.shape[axis]
    out = np.zeros(a.shape, dtype=np.float64)
    # taps accumulated in fixed order for bit-reproducibility
    for j, kj in enumerate(kernel):
        out += kj * np.take(padded, np.arange(j, j + n), axis=axis)
    return out


def _gaussian_array(a, sigma):
    """Separable Gaussian over the last two axes of ``a``."""
    k = gaussian_kernel(sigma)
    a = np.asarray(a, dtype=np.float64)
    return _convolve_axis(_convolve_axis(a, k, a.ndim - 1), k, a.ndim - 2)


def gaussian_filter(frame, sigma):
    """Separable Gaussian blur of every channel with mirror boundaries."""
    out = _gaussian_array(frame.data, sigma)
    if frame.signedness == SOURCE:
        out = np.clip(out, 0.0, 1.0)
    return Frame(out, frame.signedness)


def gaussian_filter_clip(clip, sigma):
    out = _gaussian_array(clip.data, sigma)
    if clip.signedness == SOURCE:
        out = np.clip(out, 0.0, 1.0)
    return clip.derive(out, step={"op": "gaussian_filter", "sigma": float(sigma)})


# --- temporal box ----------------------------------------------------------


def temporal_uniform_filter(clip, window):
    """
    Centered moving average over ``window`` frames for every pixel.

    Near the clip ends the window shrinks to the frames that exist, so the
    output is always an average of real samples.
    """
    if int(window) != window or window < 1 or window % 2 == 0:
        raise ParameterError(f"temporal window must be an odd integer >= 1, got {window}")
    window = int(window)
    n = clip.frame_count
    if window > n:
        raise ParameterError(f"temporal window {window} exceeds clip length {n}")
    half = window // 2
    data = clip.data.astype(np.float64)
    csum = np.concatenate([np.zeros((1,) + data.shape[1:]), np.cumsum(data, axis=0)])
    t = np.arange(n)
    lo = np.maximum(t - half, 0)
    hi = np.minimum(t + half + 1, n)
    counts = (hi - lo).astype(np.float64).reshape(-1, 1, 1, 1)
    out = (csum[hi] - csum[lo]) / counts
    if window == 1:
        out = data
    return clip.derive(out, step={"op": "temporal_uniform_filter", "window": window})


# --- DIF procedure -----------------------------------------------------------


def dif_filter(residual, sigma, window):
    """Spatial Gaussian then temporal box; the pre-normalization DIF stage."""
    if residual.signedness != RESIDUAL:
        raise PreconditionError("dif filtering expects a residual clip")
    return temporal_uniform_filter(gaussian_filter_clip(residual, sigma), window)


def sign_split_normalize(filtered, sign):
    """
    Keep one sign of ``filtered``, take magnitudes, divide by the clip max.

    The divisor is shared by all frames so their brightness stays comparable.
    """
    if sign not in ("positive", "negative"):
        raise ParameterError(f"sign must be positive or negative, got {sign!r}")
    data = filtered.data.astype(np.float64)
    kept = np.maximum(data, 0.0) if sign == "positive" else np.maximum(-data, 0.0)
    peak = float(kept.max())
    out = kept / peak if peak > 0 else kept
    return filtered.derive(
        np.clip(out, 0.0, 1.0),
        signedness=SOURCE,
        step={"op": "sign_split_normalize", "sign": sign, "peak": peak},
    )


def dif_amplify(residual, spec):
    filtered = dif_filter(residual, spec.gaussian_sigma, spec.temporal_window)
    return sign_split_normalize(filtered, spec.sign)


# --- Wallcamera-style procedure -------------------------------------------------


def downsample_mean(frame, factor):
    """Replace every factor x factor block by its mean."""
    factor = _check_factor(factor)
    c, h, w = frame.data.shape
    if h % factor or w % factor:
        raise GeometryError(f"{w}x{h} frame is not divisible by down-sampling factor {factor}")
    out = _block_mean(frame.data[None], factor)[0]
    return Frame(out, frame.signedness)


def _check_factor(factor):
    if int(factor) != factor or factor < 1:
        raise ParameterError(f"down-sampling factor must be an integer >= 1, got {factor}")
    return int(factor)


def _block_mean(a, f):
    t, c, h, w = a.shape
    a = np.asarray(a, dtype=np.float64)
    if f == 1:
        return a.copy()
    return a.reshape(t, c, h // f, f, w // f, f).mean(axis=(3, 5))


def crop_to_multiple(clip, factor):
    """Drop the rightmost columns and bottom rows that do not fill a block."""
    factor = _check_factor(factor)
    h = clip.height - clip.height % factor
    w = clip.width - clip.width % factor
    if h == 0 or w == 0:
        raise GeometryError(f"{clip.width}x{clip.height} clip is smaller than factor {factor}")
    if (h, w) == (clip.height, clip.width):
        return clip
    return clip.derive(
        clip.data[:, :, :h, :w],
        step={"op": "crop", "dropped_right": clip.width - w, "dropped_bottom": clip.height - h},
    )


def downsample_clip(clip, factor):
    factor = _check_factor(factor)
    if clip.height % factor or clip.width % factor:
        raise GeometryError(
            f"{clip.width}x{clip.height} clip is not divisible by down-sampling factor {factor}"
        )
    return clip.derive(_block_mean(clip.data, factor), step={"op": "downsample_mean", "factor": factor})


def wallcam_amplify(residual, spec):
    """Down-sample, rescale by ``gain``, lift by ``base_level``, clamp."""
    if residual.signedness != RESIDUAL:
        raise PreconditionError("wallcam amplification expects a residual clip")
    small = downsample_clip(crop_to_multiple(residual, spec.downsample_factor), spec.downsample_factor)
    out = np.clip(spec.gain * small.data + spec.base_level, 0.0, 1.0)
    return small.derive(
        out,
        signedness=SOURCE,
        step={"op": "rescale", "gain": float(spec.gain), "base_level": float(spec.base_level)},
    )
