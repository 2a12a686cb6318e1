"""
Acceptance criteria 1-11 at their stated tolerances.

Each test records a one-line summary; conftest prints a PASS/FAIL line per
criterion at the end of the session.
"""

import json
import math
import shutil
import time
from dataclasses import replace

import numpy as np
import pytest

from latentlens import amplify, cli, detect, flicker, reference, spacetime, synth
from latentlens.synth import SceneSpec, SubjectSpec
from latentlens.video_model import RESIDUAL, SOURCE, Clip, Frame

import _scenes as sc
from _oracles import fft_power_at, naive_gaussian_2d
from _acceptance_log import record


# --- corpora -------------------------------------------------------------------------


def presence_corpus():
    """Seeds 0-19: even seeds hold a static subject in frames 100-199, odd seeds are empty."""
    specs = []
    for seed in range(20):
        if seed % 2 == 0:
            rng = np.random.default_rng(1000 + seed)
            x, y = rng.uniform(18, 46), rng.uniform(20, 44)
            s = sc.static_scene(round(x, 2), round(y, 2), seed=seed)
            specs.append(replace(s, name=f"present-{seed:02d}"))
        else:
            specs.append(replace(sc.STANDARD, seed=seed, name=f"empty-{seed:02d}"))
    return specs


@pytest.fixture(scope="module")
def presence_reports():
    """Generation, filtering and detection of the whole corpus, with its wall time."""
    start = time.perf_counter()
    out = []
    for spec in presence_corpus():
        rep, truth, _ = sc.dif_detect(spec)
        out.append((spec, rep, truth))
    return out, time.perf_counter() - start


# --- 1 ---------------------------------------------------------------------------------


def test_criterion_01_gaussian_oracle():
    rng = np.random.default_rng(1)
    frames = [rng.random((16, 16)) for _ in range(20)]
    expected = {s: [naive_gaussian_2d(f, s) for f in frames] for s in (0.5, 1.0, 2.0, 4.0)}
    start = time.perf_counter()
    err = 0.0
    for s, outs in expected.items():
        for f, ref in zip(frames, outs):
            got = amplify.gaussian_filter(Frame(f[None], RESIDUAL), s).data[0]
            err = max(err, float(np.max(np.abs(got - ref))))
    elapsed = time.perf_counter() - start
    ok = err <= 1e-6 and elapsed < 1.0
    record(1, ok, f"max abs err {err:.2e}, {elapsed:.3f}s")
    assert err <= 1e-6
    assert elapsed < 1.0


# --- 2 ---------------------------------------------------------------------------------


def test_criterion_02_whole_video_mean_zero():
    rng = np.random.default_rng(2)
    clip = Clip(rng.random((1000, 1, 64, 64), dtype=np.float32), 30.0, SOURCE)
    start = time.perf_counter()
    res = reference.residual(clip, reference.ReferenceSpec("whole_video", None, "linear"))
    elapsed = time.perf_counter() - start
    worst = float(np.max(np.abs(res.data.mean(axis=0))))
    ok = worst <= 1e-5 and elapsed < 5.0
    record(2, ok, f"max |temporal mean| {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-5
    assert elapsed < 5.0


# --- 3 ---------------------------------------------------------------------------------


def test_criterion_03_snr_amplification():
    # signal from a noiseless twin through the same filter, noise from the noisy clip's empty interval
    start = time.perf_counter()
    spec = sc.static_scene(32, 32, seed=3)
    res = sc.dif_residual(synth.generate(spec)[0])
    clean = sc.dif_residual(synth.generate(replace(spec, noise_sigma=0.0))[0])
    t0, t1 = sc.EMPTY_INTERVAL
    half = sc.WINDOW // 2
    plateau = slice(100 + half, 200 - half)

    def snr(noisy, noiseless):
        peak = float(np.max(noiseless.data[plateau, 0, 32, 32]))
        rms = float(np.sqrt(np.mean(noisy.data[t0:t1] ** 2)))
        return peak / rms

    snr_in = snr(res, clean)
    snrs = {w: snr(amplify.dif_filter(res, sc.SIGMA, w), amplify.dif_filter(clean, sc.SIGMA, w))
            for w in (1, 9, 25)}
    amp = amplify.dif_amplify(res, amplify.DifAmplifySpec(3.0, 25, "positive"))
    snr_amp = float(np.mean(amp.data[plateau, 0, 32, 32])) / float(np.sqrt(np.mean(amp.data[t0:t1] ** 2)))
    elapsed = time.perf_counter() - start
    monotone = snrs[1] < snrs[9] < snrs[25]
    ok = abs(snr_in - 0.5) < 0.05 and snrs[25] >= 2.0 and snr_amp >= 2.0 and monotone and elapsed < 10
    record(3, ok, f"SNR in {snr_in:.3f} -> w1 {snrs[1]:.2f}, w9 {snrs[9]:.2f}, w25 {snrs[25]:.2f} "
                  f"(normalized output {snr_amp:.2f}), {elapsed:.2f}s")
    assert abs(snr_in - 0.5) < 0.05
    assert snrs[25] >= 2.0 and snr_amp >= 2.0
    assert monotone
    assert elapsed < 10.0


# --- 4 ---------------------------------------------------------------------------------


def _wallcam_residual(clip, correct):
    res = reference.residual(clip, reference.ReferenceSpec("whole_video", None, "log"))
    if correct:
        res = flicker.project_out(res, flicker.global_median_curve(res))
    return res


def test_criterion_04_flicker_cancellation():
    start = time.perf_counter()
    reductions = []
    for freq in (60.5, 59.7):
        alias = synth.aliased_frequency(freq, 30.0)
        for phase in (0.0, 1.0, math.pi / 2, 2.5, math.pi):
            clip, _ = synth.generate(sc.flicker_scene(phase, freq, seed=4))
            before = _wallcam_residual(clip, False).data.mean(axis=(1, 2, 3))
            after = _wallcam_residual(clip, True).data.mean(axis=(1, 2, 3))
            p0, p1 = fft_power_at(before, alias, 30.0), fft_power_at(after, alias, 30.0)
            reductions.append(1.0 - p1 / p0)

    # centroid track: frames whose temporal window lies wholly inside the presence interval
    dspec = detect.DetectionSpec()
    rms, worst = [], []
    # standard blob at several places plus slow walks; faster motion whose spectrum
    # nears the flicker alias is partly projected away (see test_flicker characterization)
    subjects = [
        SubjectSpec(trajectory={"kind": "static", "center": [28.0, 30.0]}),
        SubjectSpec(trajectory={"kind": "static", "center": [38.5, 35.25]}),
        sc.walk_scene(14.0, 50.0, 0.4).subject,
        sc.walk_scene(48.0, 16.0, 0.4).subject,
    ]
    half = sc.WINDOW // 2
    for i, sub in enumerate(subjects):
        plain, truth = synth.generate(replace(sc.STANDARD, seed=5 + i, subject=sub))
        flick, _ = synth.generate(sc.flicker_scene(0.7 + i, 60.5, subject=sub, seed=5 + i))
        frames = np.nonzero(truth.present_mask())[0][half:-half]
        tracks = []
        for clip, correct in ((plain, False), (flick, True)):
            filt = amplify.dif_filter(_wallcam_residual(clip, correct), sc.SIGMA, sc.WINDOW)
            tracks.append(np.array([detect.locate(filt.data[t], dspec).centroid for t in frames]))
        d = np.linalg.norm(tracks[0] - tracks[1], axis=1)
        rms.append(float(np.sqrt(np.mean(d ** 2))))
        worst.append(float(d.max()))
    elapsed = time.perf_counter() - start
    ok = min(reductions) >= 0.9 and max(rms) < 0.5 and elapsed < 10
    record(4, ok, f"min power reduction {min(reductions):.4f}, centroid track RMS shift {max(rms):.3f}px "
                  f"(largest single frame {max(worst):.3f}px), {elapsed:.2f}s")
    assert min(reductions) >= 0.9
    assert max(rms) < 0.5
    assert elapsed < 10.0


# --- 5 ---------------------------------------------------------------------------------


def test_criterion_05_presence(presence_reports):
    reports, elapsed = presence_reports
    tp = fp = fn = 0
    worst_edge = 0
    for spec, rep, truth in reports:
        pred = np.array(rep.present)
        true = truth.present_mask()
        tp += int(np.sum(pred & true))
        fp += int(np.sum(pred & ~true))
        fn += int(np.sum(~pred & true))
        if true.any():
            runs = detect._runs(pred)
            assert len(runs) == 1, f"{spec.name}: presence split into {runs}"
            s, e = runs[0]
            worst_edge = max(worst_edge, abs(s - 100), abs(e - 200))
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    ok = precision >= 0.95 and recall >= 0.95 and worst_edge <= 3 and elapsed < 60
    record(5, ok, f"precision {precision:.3f}, recall {recall:.3f}, worst boundary error {worst_edge} frames, "
                  f"{elapsed:.1f}s")
    assert precision >= 0.95 and recall >= 0.95
    assert worst_edge <= 3
    assert elapsed < 60.0


# --- 6 ---------------------------------------------------------------------------------


def _noiseless_track(sub):
    spec = replace(sc.STANDARD, noise_sigma=0.0, subject=sub)
    clip, truth = synth.generate(spec)
    res = sc.dif_residual(clip)
    frames = np.nonzero(truth.present_mask())[0]
    dspec = detect.DetectionSpec()
    got = np.array([detect.locate(res.data[t], dspec).centroid for t in frames])
    want = np.array([truth.centers[t] for t in frames])
    return got, want


def test_criterion_06_localization():
    subjects = [
        SubjectSpec(trajectory={"kind": "static", "center": [30.3, 33.7]}),
        SubjectSpec(trajectory={"kind": "static", "center": [20.0, 25.5]}),
        sc.walk_scene(12.25, 50.75, 0.7).subject,
        sc.sway_scene().subject,
    ]
    errs = []
    for sub in subjects:
        got, want = _noiseless_track(sub)
        errs.append(np.sum((got - want) ** 2, axis=1))
    rmse_clean = float(np.sqrt(np.mean(np.concatenate(errs))))

    base = SubjectSpec(trajectory={"kind": "static", "center": [30.0, 31.0]})
    c0, _ = _noiseless_track(base)
    equi = 0.0
    for dx, dy in ((3.0, -2.0), (1.5, 0.25), (-4.75, 2.5), (0.3, 0.7)):
        moved = replace(base, trajectory={"kind": "static", "center": [30.0 + dx, 31.0 + dy]})
        c1, _ = _noiseless_track(moved)
        equi = max(equi, float(np.max(np.abs(c1 - c0 - np.array([dx, dy])))))

    sq, wrel, hrel = [], [], []
    for seed, (x, y) in enumerate(((32, 32), (24, 28), (40, 36), (28.5, 38.25), (36.7, 26.2))):
        rep, truth, _ = sc.dif_detect(sc.static_scene(x, y, seed=60 + seed))
        for t in np.nonzero(np.array(rep.present) & truth.present_mask())[0]:
            sq.append(np.sum((np.array(rep.centroids[t]) - truth.centers[t]) ** 2))
        tw, th = truth.extents[100]
        wrel.append(abs(rep.body_width - tw) / tw)
        hrel.append(abs(rep.body_height - th) / th)
    rmse_grid = float(np.sqrt(np.mean(sq)))
    ok = rmse_clean <= 0.1 and equi <= 0.1 and rmse_grid <= 2.0 and max(wrel) <= 0.15 and max(hrel) <= 0.15
    record(6, ok, f"noiseless RMSE {rmse_clean:.4f}px, equivariance err {equi:.4f}px, grid RMSE {rmse_grid:.3f}px, "
                  f"extent err w {max(wrel):.3f} h {max(hrel):.3f}")
    assert rmse_clean <= 0.1
    assert equi <= 0.1
    assert rmse_grid <= 2.0
    assert max(wrel) <= 0.15 and max(hrel) <= 0.15


# --- 7 ---------------------------------------------------------------------------------


def test_criterion_07_color():
    worst = 0.0
    got = {}
    for i, tint in enumerate(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (1.0, 1.0, 1.0))):
        spec = replace(sc.static_scene(32, 32, seed=70 + i, tint=tint), channels=3)
        rep, _, _ = sc.dif_detect(spec)
        est = np.array(rep.clothing_color)
        got[tint] = est
        worst = max(worst, float(np.max(np.abs(est - np.array(tint)))))
    ok = worst <= 0.1
    record(7, ok, "max channel error {:.4f}; ".format(worst)
           + ", ".join(f"{k}->{np.round(v, 3).tolist()}" for k, v in got.items()))
    assert worst <= 0.1


# --- 8 ---------------------------------------------------------------------------------


def activity_corpus():
    specs = []
    speeds = np.linspace(0.4, 1.2, 10)
    for i, v in enumerate(speeds):
        x0, x1 = (10.0, 52.0) if i % 2 == 0 else (53.0, 11.0)
        specs.append(replace(sc.walk_scene(x0, x1, float(v), seed=80 + i, y=24.0 + 2 * i), name=f"walk-{i}"))
    for i in range(10):
        specs.append(replace(sc.sway_scene(seed=90 + i, amp_px=(6.0, 8.0, 10.0)[i % 3], cycles=(3, 4, 5)[i % 3],
                                           center=(30.0 + i % 4, 28.0 + i)), name=f"sway-{i}"))
    for i in range(10):
        specs.append(replace(sc.static_scene(20 + 2.5 * i, 40 - 1.5 * i, seed=100 + i), name=f"static-{i}"))
    return specs


def test_criterion_08_activity(presence_reports):
    correct = 0
    wrong = []
    for spec in activity_corpus():
        rep, truth, _ = sc.dif_detect(spec)
        if rep.activity == truth.activity:
            correct += 1
        else:
            wrong.append(f"seed {spec.seed}: {truth.activity}->{rep.activity}")
    empty_labels = [rep.activity for spec, rep, truth in presence_reports[0] if spec.subject is None]
    false_acts = sum(a != "absent" for a in empty_labels)
    ok = correct >= 27 and false_acts == 0
    record(8, ok, f"{correct}/30 correct, {false_acts} false activities on {len(empty_labels)} empty clips"
                  + (f" (misses: {'; '.join(wrong)})" if wrong else ""))
    assert correct >= 27
    assert len(empty_labels) == 10 and false_acts == 0


# --- 9 ---------------------------------------------------------------------------------


def test_criterion_09_ridge_slope():
    rel = {}
    for i, v in enumerate((0.4, 0.8, 1.2)):
        spec = sc.walk_scene(8.5, 54.5, v, seed=110 + i)
        filt, truth = sc.dif_analysis(spec)
        plot = spacetime.spacetime_project(filt, "horizontal", "abs_mean")
        frames = np.nonzero(truth.present_mask())[0]
        half = sc.WINDOW // 2
        inner = frames[half:len(frames) - half]
        pos = detect.ridge_positions(plot, inner)
        slope = np.polyfit(inner.astype(float), pos, 1)[0]
        rel[v] = abs(slope - truth.velocity) / truth.velocity
    ok = max(rel.values()) <= 0.10
    record(9, ok, "relative slope error " + ", ".join(f"v={v}: {e:.4f}" for v, e in rel.items()))
    assert max(rel.values()) <= 0.10


# --- 10 --------------------------------------------------------------------------------


def _tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_criterion_10_replay(tmp_path):
    mismatches = []
    synth_dir = tmp_path / "synth"
    assert cli.main(["synth", "--preset", "walk-demo", "--out", str(synth_dir)]) == 0
    assert cli.main(["synth", "--config", str(synth_dir / "provenance.json"), "--out", str(tmp_path / "synth2")]) == 0
    if _tree(synth_dir) != _tree(tmp_path / "synth2"):
        mismatches.append("synth")

    clip_path = synth_dir / "walk-demo.diff1"
    dif = {"input": str(clip_path), "pipeline": "dif",
           "reference": {"mode": "sub_interval", "interval": [0, 80], "space": "linear"},
           "truth": str(synth_dir / "walk-demo.truth.json")}
    wall = {"input": str(clip_path), "pipeline": "wallcam", "flicker_correction": True,
            "empty_interval": [0, 80], "detection": {"smooth_window": 25}}
    (tmp_path / "dif.json").write_text(json.dumps(dif))
    (tmp_path / "wall.json").write_text(json.dumps(wall))
    runs = {
        "amplify": ["--config", str(tmp_path / "wall.json")],
        "stplot": ["--config", str(tmp_path / "dif.json")],
        "detect": ["--config", str(tmp_path / "dif.json")],
        "compare": ["--config", str(tmp_path / "dif.json"), "--config", str(tmp_path / "wall.json")],
    }
    for cmd, args in runs.items():
        first, second = tmp_path / f"{cmd}1", tmp_path / f"{cmd}2"
        assert cli.main([cmd, *args, "--out", str(first)]) == 0
        assert cli.main([cmd, "--config", str(first / "provenance.json"), "--out", str(second)]) == 0
        a, b = _tree(first), _tree(second)
        a.pop("timing.json", None)
        b.pop("timing.json", None)
        if a != b or not a:
            mismatches.append(cmd)

    grid = presence_corpus()[:4] + activity_corpus()[::10]
    manifest = synth.corpus(grid, tmp_path / "grid1")
    synth.regenerate(tmp_path / "grid1" / "manifest.json", tmp_path / "grid2")
    if _tree(tmp_path / "grid1") != _tree(tmp_path / "grid2"):
        mismatches.append("corpus")
    ok = not mismatches and len(manifest["cases"]) == len(grid)
    record(10, ok, "synth, amplify, stplot, detect, compare and corpus regeneration byte-identical"
           if ok else f"mismatch in {mismatches}")
    assert not mismatches


# --- 11 --------------------------------------------------------------------------------


def test_criterion_11_scale_invariance():
    specs = [
        sc.static_scene(26, 34, seed=120),
        sc.walk_scene(12.0, 50.0, 0.6, seed=121),
        sc.sway_scene(seed=122),
        replace(sc.STANDARD, seed=123),
        replace(sc.static_scene(32, 32, seed=124, tint=(0.2, 1.0, 0.5)), channels=3),
    ]
    diffs = 0
    for spec in specs:
        clip, _ = synth.generate(spec)
        res = sc.dif_residual(clip)
        scaled = res.derive(res.data * 10.0, step={"op": "scale", "factor": 10})
        a = detect.detect(amplify.dif_filter(res, sc.SIGMA, sc.WINDOW), detect.DetectionSpec(), sc.EMPTY_INTERVAL)
        b = detect.detect(amplify.dif_filter(scaled, sc.SIGMA, sc.WINDOW), detect.DetectionSpec(), sc.EMPTY_INTERVAL)
        diffs += a.to_json() != b.to_json()
    ok = diffs == 0
    record(11, ok, f"{len(specs)} clips, {diffs} report differences")
    assert diffs == 0
