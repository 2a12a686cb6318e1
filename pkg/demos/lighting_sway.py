"""
Removing mains flicker
======================

Lights on AC power pulse at twice the mains frequency. A camera at 30 fps
samples that pulsing far too slowly and sees a slow, clip-wide beat in
brightness. Here the beat moves every pixel at once by nearly as much as
the hidden subject moves its brightest one.

The wallcam route works in log intensity, where a lighting change
multiplies every pixel equally and so becomes a common additive curve. We
estimate that curve from the median of each frame and project it out.

Run with ``python demos/lighting_sway.py [out_dir]``.
"""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from latentlens import amplify, detect, flicker, reference, synth
from latentlens.synth import FlickerSpec, SubjectSpec
from latentlens.video_model import save_clip

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "lighting_sway"
out.mkdir(parents=True, exist_ok=True)

# %%
# 60.5 Hz pulsing seen at 30 fps aliases down to a 0.5 Hz beat.
print(f"apparent beat: {synth.aliased_frequency(60.5, 30.0)} Hz")
subject = SubjectSpec(amplitude=0.006, trajectory={"kind": "linear", "start": [12.0, 32.0], "end": [51.6, 32.0]})
spec = replace(synth.SceneSpec(seed=5), subject=subject, flicker=FlickerSpec(0.01, 60.5, 0.3))
clip, truth = synth.generate(spec)

# %%
# Log space, then subtract the whole-clip mean.
res = reference.residual(clip, reference.ReferenceSpec("whole_video", None, "log"))
curve = flicker.global_median_curve(res)
clean = flicker.project_out(res, curve)
flicker.write_curve_csv(curve, out / "curve.csv")

# %%
# How much of the beat is left in the clip-wide mean brightness?
def beat_power(c):
    x = c.data.mean(axis=(1, 2, 3))
    spec_ = np.abs(np.fft.rfft(x - x.mean())) ** 2
    freqs = np.fft.rfftfreq(len(x), 1 / 30.0)
    return spec_[np.argmin(np.abs(freqs - 0.5))]

print(f"beat power kept after projection: {beat_power(clean) / beat_power(res):.2%}")

# %%
# Gain 50 around mid-gray. Without the projection the beat saturates
# every frame; with it the subject is the only thing left.
for name, r in (("raw", res), ("corrected", clean)):
    shown = amplify.wallcam_amplify(r, amplify.WallcamAmplifySpec(2, 50.0, 0.5))
    save_clip(shown, out / name, "png-seq")
    spread = shown.data.max(axis=(1, 2, 3)) - shown.data.min(axis=(1, 2, 3))
    print(f"{name:>9}: frame brightness range {spread.mean():.3f}, clip-wide swing {np.ptp(shown.data.mean(axis=(1, 2, 3))):.3f}")

# %%
# The detector sees the subject in the corrected residual. A walker works
# better here than someone standing still: the whole-clip mean would absorb
# a third of a static subject and print its negative onto the empty frames.
# The projection also takes away the part of the walker's own brightness
# that happens to move in step with the beat, so the margin is thinner than
# on a flicker-free clip.
small = amplify.downsample_clip(clean, 4)
# Pixel thresholds are set for the full-size grid, so divide them by 4 too.
dspec = detect.DetectionSpec(walk_speed_threshold=0.3 / 4, oscillation_min_amplitude=1.5 / 4)
report = detect.detect(amplify.temporal_uniform_filter(small, 25), dspec, (0, 80))
print(f"present frames: {sum(report.present)} (truth {sum(truth.present)}), activity {report.activity}")
