"""
How faint can the subject be?
=============================

Presence is judged frame by frame against a noise floor measured on
known-empty frames. The statistic is the RMS over the whole frame, so a
blob covering a small patch of wall has to outweigh the noise of every
other pixel before a frame counts. Longer temporal windows average away
more noise and push that limit down. This sweep shows by how much.

Run with ``python demos/how_faint.py``.
"""

from dataclasses import replace

import numpy as np

from latentlens import amplify, detect, reference, synth
from latentlens.synth import SubjectSpec

amplitudes = [0.0001, 0.0002, 0.0005, 0.001, 0.002]
windows = [1, 5, 25]
ref = reference.ReferenceSpec("sub_interval", (0, 80))

print("amplitude/noise " + "".join(f"  window {w:>2}" for w in windows))
for amp in amplitudes:
    spec = replace(synth.SceneSpec(seed=11), subject=SubjectSpec(amplitude=amp))
    clip, truth = synth.generate(spec)
    res = reference.residual(clip, ref)
    row = []
    for w in windows:
        filtered = amplify.dif_filter(res, 3.0, w)
        report = detect.detect(filtered, detect.DetectionSpec(), (0, 80))
        pred = np.array(report.present)
        iou = np.sum(pred & truth.present_mask()) / max(np.sum(pred | truth.present_mask()), 1)
        row.append(f"{iou:10.2f}")
    print(f"{amp / spec.noise_sigma:15.2f} " + "".join(row))
print("(entries are presence IoU against the true frames)")
