"""
Synthetic wall-facing scenes with known ground truth.

A frame is built as::

    clamp((base + present * amplitude * tint_c * G(x, y)) * (1 + eps * sin(2 pi f t / fps + phi)) + noise)

where ``G`` is a unit-peak anisotropic Gaussian centered on the subject
position for frame ``t``. Noise for frame ``t`` is drawn from a Philox
stream keyed by ``(seed, t)``, so each sample is a pure function of
(seed, frame, channel, y, x) and frames can be produced in any order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .video_model import SOURCE, Clip, save_clip

# width of a unit-peak Gaussian at 20 % of its peak, in sigmas
LEVEL20_WIDTH = 2.0 * math.sqrt(2.0 * math.log(5.0))

ACTIVITY_FOR_TRAJECTORY = {
    "static": "static_presence",
    "linear": "walking",
    "sinusoidal": "oscillatory",
}


@dataclass(frozen=True)
class FlickerSpec:
    epsilon: float = 0.01
    freq_hz: float = 60.0
    phase_rad: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 0.1:
            raise ParameterError(f"flicker epsilon must lie in [0, 0.1], got {self.epsilon}")
        if not self.freq_hz >= 0:
            raise ParameterError(f"flicker frequency must be non-negative, got {self.freq_hz}")


@dataclass(frozen=True)
class SubjectSpec:
    """
    The hidden subject's impact on the wall.

    ``present`` is the half-open frame range during which the subject
    exists. ``trajectory`` is one of

    * ``{"kind": "static", "center": [x, y]}``
    * ``{"kind": "linear", "start": [x0, y0], "end": [x1, y1]}`` (traversed
      uniformly over the present frames)
    * ``{"kind": "sinusoidal", "center": [x, y], "axis": "x", "amp_px": a, "cycles": n}``
    """

    amplitude: float = 0.001
    tint: tuple = (1.0, 1.0, 1.0)
    sigma_x: float = 8.0
    sigma_y: float = 12.0
    present: tuple = (100, 200)
    trajectory: dict = field(default_factory=lambda: {"kind": "static", "center": [32.0, 32.0]})

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ParameterError("subject footprint sigmas must be positive")
        if len(self.tint) != 3:
            raise ParameterError("tint must have three channel weights")
        t0, t1 = self.present
        if not 0 <= t0 < t1:
            raise ParameterError(f"subject present interval [{t0}, {t1}) is empty")
        kind = self.trajectory.get("kind")
        if kind not in ACTIVITY_FOR_TRAJECTORY:
            raise ParameterError(f"unknown trajectory kind {kind!r}")
        object.__setattr__(self, "tint", tuple(float(v) for v in self.tint))
        object.__setattr__(self, "present", (int(t0), int(t1)))

    def center(self, t):
        tr = self.trajectory
        t0, t1 = self.present
        kind = tr["kind"]
        if kind == "static":
            return float(tr["center"][0]), float(tr["center"][1])
        if kind == "linear":
            span = max(t1 - 1 - t0, 1)
            a = (t - t0) / span
            (x0, y0), (x1, y1) = tr["start"], tr["end"]
            return x0 + a * (x1 - x0), y0 + a * (y1 - y0)
        cx, cy = tr["center"]
        d = tr["amp_px"] * math.sin(2.0 * math.pi * tr["cycles"] * (t - t0) / (t1 - t0))
        if tr.get("axis", "x") == "x":
            return cx + d, float(cy)
        return float(cx), cy + d

    @property
    def velocity(self):
        """Pixels per frame along x for linear trajectories, else 0."""
        if self.trajectory["kind"] != "linear":
            return 0.0
        t0, t1 = self.present
        return (self.trajectory["end"][0] - self.trajectory["start"][0]) / max(t1 - 1 - t0, 1)


@dataclass(frozen=True)
class SceneSpec:
    name: str = "scene"
    width: int = 64
    height: int = 64
    frames: int = 300
    fps: float = 30.0
    channels: int = 1
    base: dict = field(default_factory=lambda: {"kind": "flat", "level": 0.5})
    noise_sigma: float = 0.002
    flicker: FlickerSpec | None = None
    seed: int = 0
    subject: SubjectSpec | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frames < 1:
            raise ParameterError("scene geometry and frame count must be positive")
        if not self.fps > 0:
            raise ParameterError(f"fps must be positive, got {self.fps}")
        if self.channels not in (1, 3):
            raise ParameterError(f"channels must be 1 or 3, got {self.channels}")
        if not self.noise_sigma >= 0:
            raise ParameterError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        kind = self.base.get("kind")
        if kind == "flat":
            levels = [self.base["level"]]
        elif kind == "gradient":
            levels = [self.base["lo"], self.base["hi"]]
        else:
            raise ParameterError(f"unknown base kind {kind!r}")
        if not all(0.0 <= v <= 1.0 for v in levels):
            raise ParameterError("base levels must lie in [0, 1]")
        eps = self.flicker.epsilon if self.flicker else 0.0
        amp = abs(self.subject.amplitude) if self.subject else 0.0
        if max(levels) * (1 + eps) + amp * (1 + eps) > 1.0 or min(levels) * (1 - eps) - amp * (1 + eps) < 0.0:
            raise ParameterError("base, subject and flicker together leave [0, 1]")
        if self.subject is not None:
            self._check_subject(self.subject)

    def _check_subject(self, s):
        t0, t1 = s.present
        if t1 > self.frames:
            raise ParameterError(f"subject interval [{t0}, {t1}) exceeds {self.frames} frames")
        for t in (t0, t1 - 1, (t0 + t1) // 2):
            x, y = s.center(t)
            if not (s.sigma_x <= x <= self.width - 1 - s.sigma_x and s.sigma_y <= y <= self.height - 1 - s.sigma_y):
                raise ParameterError(f"subject center ({x:.2f}, {y:.2f}) at frame {t} is within one sigma of the edge")
        if s.trajectory["kind"] == "sinusoidal":
            cx, cy = s.trajectory["center"]
            a = abs(s.trajectory["amp_px"])
            lim = (cx - a >= s.sigma_x and cx + a <= self.width - 1 - s.sigma_x) if s.trajectory.get("axis", "x") == "x" else (
                cy - a >= s.sigma_y and cy + a <= self.height - 1 - s.sigma_y)
            if not lim:
                raise ParameterError("sinusoidal sway reaches within one sigma of the edge")

    def to_dict(self):
        d = asdict(self)
        d["flicker"] = None if self.flicker is None else asdict(self.flicker)
        if self.subject is not None:
            d["subject"]["tint"] = list(self.subject.tint)
            d["subject"]["present"] = list(self.subject.present)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - allowed
        if unknown:
            raise ParameterError(f"unknown scene fields: {sorted(unknown)}")
        if d.get("flicker") is not None:
            d["flicker"] = FlickerSpec(**d["flicker"])
        if d.get("subject") is not None:
            s = dict(d["subject"])
            bad = set(s) - set(SubjectSpec.__dataclass_fields__)
            if bad:
                raise ParameterError(f"unknown subject fields: {sorted(bad)}")
            for k in ("tint", "present"):
                if k in s:
                    s[k] = tuple(s[k])
            d["subject"] = SubjectSpec(**s)
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    present: list
    centers: list
    extents: list
    tint: list | None
    amplitude: float
    trajectory: str
    activity: str
    velocity: float
    flicker: dict | None
    seed: int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def present_mask(self):
        return np.array(self.present, dtype=bool)


def aliased_frequency(freq_hz, fps):
    """Apparent frequency of a ``freq_hz`` sinusoid sampled at ``fps``."""
    f = math.fmod(freq_hz, fps)
    return min(f, fps - f)


def base_image(spec):
    b = spec.base
    if b["kind"] == "flat":
        img = np.full((spec.height, spec.width), float(b["level"]))
    else:
        ramp = np.linspace(b["lo"], b["hi"], spec.width) if spec.width > 1 else np.array([b["lo"]])
        img = np.broadcast_to(ramp, (spec.height, spec.width)).astype(np.float64)
    return img


def impact_field(spec, t):
    """Unit-peak subject footprint times amplitude for frame ``t``, shape (C, H, W)."""
    s = spec.subject
    out = np.zeros((spec.channels, spec.height, spec.width))
    if s is None or not s.present[0] <= t < s.present[1]:
        return out
    cx, cy = s.center(t)
    x = np.arange(spec.width, dtype=np.float64)
    y = np.arange(spec.height, dtype=np.float64)
    g = np.exp(-0.5 * ((y[:, None] - cy) / s.sigma_y) ** 2 - 0.5 * ((x[None, :] - cx) / s.sigma_x) ** 2)
    tint = s.tint if spec.channels == 3 else (1.0,)
    for c, w in enumerate(tint):
        out[c] = s.amplitude * w * g
    return out


def frame_noise(spec, t):
    if spec.noise_sigma == 0:
        return np.zeros((spec.channels, spec.height, spec.width))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, t])))
    return spec.noise_sigma * rng.standard_normal((spec.channels, spec.height, spec.width))


def flicker_gain(spec, t):
    f = spec.flicker
    if f is None:
        return 1.0
    return 1.0 + f.epsilon * math.sin(2.0 * math.pi * f.freq_hz * t / spec.fps + f.phase_rad)


def render_frame(spec, t):
    base = base_image(spec)[None]
    clean = (base + impact_field(spec, t)) * flicker_gain(spec, t)
    return np.clip(clean + frame_noise(spec, t), 0.0, 1.0).astype(np.float32)


def ground_truth(spec):
    s = spec.subject
    n = spec.frames
    present = [bool(s is not None and s.present[0] <= t < s.present[1]) for t in range(n)]
    centers, extents = [], []
    for t in range(n):
        if present[t]:
            cx, cy = s.center(t)
            centers.append([cx, cy])
            extents.append([LEVEL20_WIDTH * s.sigma_x, LEVEL20_WIDTH * s.sigma_y])
        else:
            centers.append(None)
            extents.append(None)
    kind = "absent" if s is None else s.trajectory["kind"]
    return GroundTruth(
        present=present,
        centers=centers,
        extents=extents,
        tint=None if s is None else list(s.tint),
        amplitude=0.0 if s is None else float(s.amplitude),
        trajectory=kind,
        activity="absent" if s is None else ACTIVITY_FOR_TRAJECTORY[kind],
        velocity=0.0 if s is None else float(s.velocity),
        flicker=None if spec.flicker is None else asdict(spec.flicker),
        seed=spec.seed,
    )


def generate(spec):
    """Render the clip described by ``spec`` and its ground truth."""
    data = np.stack([render_frame(spec, t) for t in range(spec.frames)])
    clip = Clip(data, spec.fps, SOURCE, provenance=({"op": "synth", "name": spec.name, "seed": spec.seed},))
    return clip, ground_truth(spec)


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def corpus(spec_grid, out_dir):
    """
    Write every scene as ``<name>.diff1`` plus ``<name>.truth.json`` and a
    ``manifest.json`` listing them. Returns the manifest dict.
    """
    spec_grid = list(spec_grid)
    names = [s.name for s in spec_grid]
    if len(set(names)) != len(names):
        raise ParameterError("scene names in a corpus must be distinct")
    out_dir = Path(out_dir)
    entries = []
    if spec_grid:
        out_dir.mkdir(parents=True, exist_ok=True)
    for spec in spec_grid:
        clip, truth = generate(spec)
        clip_name = f"{spec.name}.diff1"
        truth_name = f"{spec.name}.truth.json"
        save_clip(clip, out_dir / clip_name, "diff1")
        _dump(truth.to_dict(), out_dir / truth_name)
        entries.append({
            "name": spec.name,
            "clip": clip_name,
            "truth": truth_name,
            "seed": spec.seed,
            "label": truth.activity,
            "spec": spec.to_dict(),
        })
    manifest = {"format": "latentlens-corpus-1", "cases": entries}
    if spec_grid:
        _dump(manifest, out_dir / "manifest.json")
    return manifest


def specs_from_manifest(manifest):
    return [SceneSpec.from_dict(e["spec"]) for e in manifest["cases"]]


def regenerate(manifest_path, out_dir):
    manifest = json.loads(Path(manifest_path).read_text())
    return corpus(specs_from_manifest(manifest), out_dir)


# --- presets -----------------------------------------------------------------


def preset(name, seed=0):
    """Named demo scenes on the standard 64x64, 300-frame, 30 fps grid."""
    base = SceneSpec(name=name, seed=seed)
    if name == "empty-room":
        return base
    if name == "static-demo":
        return replace(base, subject=SubjectSpec(trajectory={"kind": "static", "center": [24.0, 30.0]}))
    if name == "walk-demo":
        return replace(base, subject=SubjectSpec(
            amplitude=0.004, present=(100, 200),
            trajectory={"kind": "linear", "start": [12.0, 32.0], "end": [51.6, 32.0]}))
    if name == "sway-demo":
        return replace(base, subject=SubjectSpec(
            amplitude=0.004, present=(90, 290),
            trajectory={"kind": "sinusoidal", "center": [32.0, 32.0], "axis": "x", "amp_px": 8.0, "cycles": 4}))
    if name == "flicker-demo":
        return replace(base, flicker=FlickerSpec(epsilon=0.01, freq_hz=60.5, phase_rad=0.0))
    if name == "color-demo":
        return replace(base, channels=3, subject=SubjectSpec(tint=(1.0, 0.0, 0.0), trajectory={"kind": "static", "center": [32.0, 32.0]}))
    raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")


PRESETS = ("empty-room", "static-demo", "walk-demo", "sway-demo", "flicker-demo", "color-demo")
