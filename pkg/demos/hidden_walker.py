"""
Finding a walker from the wall alone
====================================

A person walks past a blank wall, out of the camera's view. The light they
reflect brightens a mid-gray wall by 0.004, under one percent, and sensor
noise of half that size scatters it across every single frame. This script renders such a clip, pulls
the residual out against a stretch of empty frames, smooths it in space
and time, and asks the detector what happened.

Run with ``python demos/hidden_walker.py [out_dir]``.
"""

import sys
from pathlib import Path

import numpy as np

from latentlens import amplify, detect, reference, spacetime, synth
from latentlens.video_model import save_clip

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "hidden_walker"

# %%
# A 64x64 wall, 300 frames at 30 fps. The walker enters at frame 100 and
# crosses from x=12 to x=51.6 at 0.4 px per frame.
spec = synth.preset("walk-demo", seed=3)
clip, truth = synth.generate(spec)
print(f"subject amplitude {truth.amplitude}, sensor noise {spec.noise_sigma}")

# One frame on its own shows nothing but noise.
one = clip.data[150, 0].astype(np.float64) - 0.5
print(f"frame 150: max |deviation| {np.abs(one).max():.4f}, noise std {one.std():.4f}")

# %%
# Subtract the mean of frames 0-79, which we know are empty.
ref = reference.ReferenceSpec("sub_interval", (0, 80))
res = reference.residual(clip, ref)

# A Gaussian blur with sigma 3 px and a 25-frame moving average pull the
# faint blob up out of the noise.
filtered = amplify.dif_filter(res, 3.0, 25)
shown = amplify.sign_split_normalize(filtered, "positive")
save_clip(shown, out / "amplified", "png-seq")

# %%
# The horizontal space-time plot stacks one column per frame. A walker
# leaves a slanted ridge whose slope is the walking speed.
plot = spacetime.spacetime_project(filtered, "horizontal", "abs_mean")
spacetime.render_plot(plot, out / "horizontal.png")

# %%
# Detection: presence per frame, where the subject is, and what they did.
report = detect.detect(filtered, detect.DetectionSpec(), (0, 80))
on = np.nonzero(report.present)[0]
print(f"present in frames {on[0]}-{on[-1]} (truth {spec.subject.present[0]}-{spec.subject.present[1] - 1})")
print(f"activity: {report.activity}")
print(f"body size: {report.body_width:.1f} x {report.body_height:.1f} px")
for t in (120, 150, 180):
    cx, cy = report.centroids[t]
    tx, ty = truth.centers[t]
    print(f"  frame {t}: found ({cx:5.1f}, {cy:5.1f})  truth ({tx:5.1f}, {ty:5.1f})")
(out / "report.json").write_text(report.to_json())
print(f"wrote {out}")
