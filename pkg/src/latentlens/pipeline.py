"""
End-to-end pipelines driven by a JSON config, plus ground-truth evaluation.

A config selects one of two procedures wholesale:

``dif``
    linear residual against the mean of a known-empty interval, Gaussian
    and temporal box filtering, sign-split normalization.
``wallcam``
    log intensities, whole-clip mean subtraction, optional lighting-sway
    projection, block down-sampling, ``gain * v + base`` rescale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .amplify import (
    DifAmplifySpec,
    WallcamAmplifySpec,
    crop_to_multiple,
    dif_filter,
    downsample_clip,
    sign_split_normalize,
    temporal_uniform_filter,
    wallcam_amplify,
)
from .detect import DetectionSpec, detect, noise_floor
from .errors import ParameterError
from .flicker import global_median_curve, project_out
from .reference import DEFAULT_LOG_EPSILON, ReferenceSpec, build_reference, log_space, subtract_reference
from .synth import GroundTruth

_CONFIG_KEYS = {
    "input", "pipeline", "reference", "amplify", "flicker_correction", "roi",
    "detection", "empty_interval", "truth", "log_epsilon",
}


class ConfigError(ParameterError):
    """The pipeline configuration is inconsistent."""


@dataclass(frozen=True)
class PipelineConfig:
    input: str
    pipeline: str = "dif"
    reference: ReferenceSpec | None = None
    amplify: DifAmplifySpec | WallcamAmplifySpec | None = None
    flicker_correction: bool = False
    roi: tuple | None = None
    detection: DetectionSpec = field(default_factory=DetectionSpec)
    empty_interval: tuple | None = None
    truth: str | None = None
    log_epsilon: float = DEFAULT_LOG_EPSILON

    def __post_init__(self):
        if self.pipeline == "dif":
            ref = self.reference
            if ref is None or ref.mode != "sub_interval":
                raise ConfigError("dif pipeline needs a sub_interval reference with an explicit interval")
            if ref.space != "linear":
                raise ConfigError("dif pipeline works on linear values; reference.space must be 'linear'")
            if self.amplify is None:
                object.__setattr__(self, "amplify", DifAmplifySpec())
            elif not isinstance(self.amplify, DifAmplifySpec):
                raise ConfigError("dif pipeline takes gaussian_sigma/temporal_window/sign, not gain/base_level")
            if self.flicker_correction:
                raise ConfigError("flicker correction belongs to the wallcam pipeline")
            if self.empty_interval is None:
                object.__setattr__(self, "empty_interval", tuple(ref.interval))
        elif self.pipeline == "wallcam":
            ref = self.reference or ReferenceSpec("whole_video", None, "log")
            if ref.mode != "whole_video" or ref.space != "log":
                raise ConfigError("wallcam pipeline uses a whole_video reference in log space")
            object.__setattr__(self, "reference", ref)
            if self.amplify is None:
                object.__setattr__(self, "amplify", WallcamAmplifySpec())
            elif not isinstance(self.amplify, WallcamAmplifySpec):
                raise ConfigError("wallcam pipeline takes downsample_factor/gain/base_level, not sign")
        else:
            raise ConfigError(f"pipeline must be 'dif' or 'wallcam', got {self.pipeline!r}")
        if self.roi is not None:
            if len(self.roi) != 4:
                raise ConfigError("roi must be [x0, y0, x1, y1]")
            object.__setattr__(self, "roi", tuple(int(v) for v in self.roi))
        if self.empty_interval is not None:
            if len(self.empty_interval) != 2:
                raise ConfigError("empty_interval must be [t0, t1]")
            object.__setattr__(self, "empty_interval", tuple(int(v) for v in self.empty_interval))
        if not self.log_epsilon > 0:
            raise ConfigError("log_epsilon must be positive")

    @classmethod
    def from_dict(cls, d, base_dir=None):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "input" not in d:
            raise ConfigError("config field 'input' is required")
        pipeline = d.get("pipeline", "dif")
        try:
            ref = ReferenceSpec.from_dict(d["reference"]) if d.get("reference") is not None else None
            amp = d.get("amplify")
            if amp is not None:
                amp = (DifAmplifySpec if pipeline == "dif" else WallcamAmplifySpec).from_dict(amp)
            det = DetectionSpec.from_dict(d.get("detection") or {})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            input=_resolve(d["input"], base_dir),
            pipeline=pipeline,
            reference=ref,
            amplify=amp,
            flicker_correction=bool(d.get("flicker_correction", False)),
            roi=d.get("roi"),
            detection=det,
            empty_interval=d.get("empty_interval"),
            truth=None if d.get("truth") is None else _resolve(d["truth"], base_dir),
            log_epsilon=float(d.get("log_epsilon", DEFAULT_LOG_EPSILON)),
        )

    def to_dict(self):
        return {
            "input": self.input,
            "pipeline": self.pipeline,
            "reference": self.reference.to_dict(),
            "amplify": self.amplify.to_dict(),
            "flicker_correction": self.flicker_correction,
            "roi": None if self.roi is None else list(self.roi),
            "detection": self.detection.to_dict(),
            "empty_interval": None if self.empty_interval is None else list(self.empty_interval),
            "truth": self.truth,
            "log_epsilon": self.log_epsilon,
        }


def _resolve(p, base_dir):
    p = Path(p)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return str(p.resolve())


def load_config(path):
    """
    Read a pipeline config. A provenance file written by a previous run is
    accepted too; its embedded config is returned with the command name.
    """
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    command = None
    if isinstance(d, dict) and "command" in d and "config" in d:
        command, d = d["command"], d["config"]
    return command, d, path.parent


@dataclass
class PipelineResult:
    residual: object      # raw residual in the pipeline's domain
    analysis: object      # filtered, pre-normalization residual
    amplified: object     # visualization-ready source clip
    curve: object = None
    factor: int = 1


def crop_roi(clip, roi):
    if roi is None:
        return clip
    x0, y0, x1, y1 = roi
    if not (0 <= x0 < x1 <= clip.width and 0 <= y0 < y1 <= clip.height):
        raise ConfigError(f"roi {list(roi)} lies outside the {clip.width}x{clip.height} frame")
    return clip.derive(clip.data[:, :, y0:y1, x0:x1], step={"op": "roi", "roi": list(roi)})


def run_pipeline(clip, cfg):
    clip = crop_roi(clip, cfg.roi)
    if cfg.pipeline == "dif":
        res = subtract_reference(clip, build_reference(clip, cfg.reference))
        spec = cfg.amplify
        analysis = dif_filter(res, spec.gaussian_sigma, spec.temporal_window)
        amplified = sign_split_normalize(analysis, spec.sign)
        return PipelineResult(res, analysis, amplified)
    logc = log_space(clip, cfg.log_epsilon)
    res = subtract_reference(logc, build_reference(logc, cfg.reference))
    curve = None
    if cfg.flicker_correction:
        curve = global_median_curve(res)
        res = project_out(res, curve)
    f = cfg.amplify.downsample_factor
    analysis = downsample_clip(crop_to_multiple(res, f), f)
    amplified = wallcam_amplify(res, cfg.amplify)
    return PipelineResult(res, analysis, amplified, curve, f)


def detection_clip(result, cfg):
    w = cfg.detection.smooth_window
    if w > 1:
        return temporal_uniform_filter(result.analysis, w)
    return result.analysis


def require_empty_interval(cfg):
    if cfg.empty_interval is None:
        raise ConfigError("this command needs 'empty_interval' (frames known to be subject-free)")
    return cfg.empty_interval


def analysis_detection_spec(cfg, factor):
    """Detection thresholds given in input pixels, rescaled to the down-sampled grid."""
    spec = cfg.detection
    if factor == 1:
        return spec
    return replace(spec, walk_speed_threshold=spec.walk_speed_threshold / factor,
                   oscillation_min_amplitude=spec.oscillation_min_amplitude / factor)


def run_detection(result, cfg):
    interval = require_empty_interval(cfg)
    return detect(detection_clip(result, cfg), analysis_detection_spec(cfg, result.factor), interval)


# --- evaluation --------------------------------------------------------------------


def _to_analysis_coords(x, y, cfg, factor):
    if cfg.roi is not None:
        x, y = x - cfg.roi[0], y - cfg.roi[1]
    return (x + 0.5) / factor - 0.5, (y + 0.5) / factor - 0.5


def evaluate(report, truth, cfg, factor=1):
    """Compare a detection report with synthetic ground truth."""
    if isinstance(truth, dict):
        truth = GroundTruth.from_dict(truth)
    pred = np.array(report.present, dtype=bool)
    true = truth.present_mask()
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    union = int(np.sum(pred | true))
    metrics = {
        "presence_precision": tp / (tp + fp) if tp + fp else (1.0 if not true.any() else 0.0),
        "presence_recall": tp / (tp + fn) if tp + fn else 1.0,
        "presence_iou": tp / union if union else 1.0,
        "true_positive_frames": tp,
        "false_positive_frames": fp,
        "false_negative_frames": fn,
        "activity": report.activity,
        "activity_truth": truth.activity,
        "activity_correct": report.activity == truth.activity,
    }
    if true.any() and pred.any():
        tt = np.nonzero(true)[0]
        pp = np.nonzero(pred)[0]
        metrics["onset_error_frames"] = int(pp[0] - tt[0])
        metrics["offset_error_frames"] = int(pp[-1] - tt[-1])
    both = np.nonzero(pred & true)[0]
    if len(both):
        errs = []
        for t in both:
            gx, gy = _to_analysis_coords(*truth.centers[t], cfg, factor)
            cx, cy = report.centroids[t]
            errs.append((cx - gx) ** 2 + (cy - gy) ** 2)
        metrics["centroid_rmse_px"] = float(np.sqrt(np.mean(errs)))
        tw, th = truth.extents[both[0]]
        metrics["extent_width_rel_error"] = abs(report.body_width - tw / factor) / (tw / factor)
        metrics["extent_height_rel_error"] = abs(report.body_height - th / factor) / (th / factor)
    return metrics


# --- comparison metrics ---------------------------------------------------------------


def peak_snr(clip, interval, frames):
    """Median over ``frames`` of the per-frame max |value|, in noise-floor units."""
    sigma = noise_floor(clip, interval)
    if sigma <= 0 or len(frames) == 0:
        return 0.0, sigma
    peaks = np.abs(clip.data[list(frames)]).reshape(len(frames), -1).max(axis=1)
    return float(np.median(peaks) / sigma), sigma


def snr_metrics(result, cfg, report):
    interval = require_empty_interval(cfg)
    frames = np.nonzero(report.present)[0]
    if len(frames) == 0:
        t0, t1 = interval
        frames = np.array([t for t in range(result.analysis.frame_count) if not t0 <= t < t1])
    raw = crop_to_multiple(result.residual, result.factor) if result.factor > 1 else result.residual
    snr_in, sigma_in = peak_snr(raw, interval, frames)
    snr_out, sigma_out = peak_snr(detection_clip(result, cfg), interval, frames)
    return {
        "snr_in": snr_in,
        "snr_out": snr_out,
        "snr_gain": snr_out / snr_in if snr_in > 0 else 0.0,
        "noise_floor": sigma_out,
        "raw_noise_floor": sigma_in,
    }


def provenance(command, config_dict, steps=(), extra=None):
    d = {
        "command": command,
        "config": config_dict,
        "steps": list(steps),
        "version": __version__,
    }
    if extra:
        d.update(extra)
    return d
