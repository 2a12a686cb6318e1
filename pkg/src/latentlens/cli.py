"""
Command-line entry point: ``latentlens {synth|amplify|stplot|detect|compare}``.

Exit codes: 0 success, 2 configuration or usage error, 3 unreadable or
malformed input data. Every command writes ``provenance.json`` into its
output directory; passing that file back with ``--config`` replays the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import cv2
import numpy as np

from . import pipeline as pl
from .detect import dumps_report
from .errors import LatentLensError
from .flicker import write_curve_csv
from .spacetime import render_plot, spacetime_project
from .synth import PRESETS, SceneSpec, corpus, preset
from .video_model import load_clip, save_clip

log = logging.getLogger("latentlens")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT = 0, 2, 3


class InputDataError(Exception):
    pass


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _load_input(cfg):
    try:
        return load_clip(cfg.input)
    except LatentLensError as exc:
        raise InputDataError(str(exc)) from exc


def _pipeline_config(args, expected):
    if not args.config:
        raise pl.ConfigError(f"{expected} needs --config <json>")
    command, d, base = pl.load_config(args.config[0])
    if command is not None and command != expected:
        raise pl.ConfigError(f"provenance file was written by '{command}', not '{expected}'")
    return pl.PipelineConfig.from_dict(d, base)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands --------------------------------------------------------------------


def cmd_synth(args):
    scenes = []
    if args.config or args.spec:
        src = args.spec or args.config[0]
        command, d, _ = pl.load_config(src)
        if command not in (None, "synth"):
            raise pl.ConfigError(f"provenance file was written by '{command}', not 'synth'")
        if isinstance(d, dict) and "scenes" in d:
            d = d["scenes"]
        items = d if isinstance(d, list) else [d]
        try:
            scenes = [SceneSpec.from_dict(s) for s in items]
        except TypeError as exc:
            raise pl.ConfigError(f"bad scene spec: {exc}") from exc
    elif args.preset:
        scenes = [preset(args.preset, 0)]
    else:
        raise pl.ConfigError("synth needs --preset, --spec or --config")
    if args.seed is not None:
        scenes = [replace(s, seed=args.seed) for s in scenes]
    out = _out_dir(args)
    manifest = corpus(scenes, out)
    _write_json(out / "provenance.json", pl.provenance("synth", {"scenes": [s.to_dict() for s in scenes]}))
    if manifest["cases"]:
        print(out / "manifest.json")
    return EXIT_OK


def cmd_amplify(args):
    cfg = _pipeline_config(args, "amplify")
    clip = _load_input(cfg)
    res = pl.run_pipeline(clip, cfg)
    out = _out_dir(args)
    save_clip(res.amplified, out / "amplified", "png-seq")
    save_clip(res.analysis, out / "residual.diff1", "diff1")
    if res.curve is not None:
        write_curve_csv(res.curve, out / "flicker_curve.csv")
    _write_json(out / "provenance.json", pl.provenance("amplify", cfg.to_dict(), res.amplified.provenance))
    return EXIT_OK


def cmd_stplot(args):
    cfg = _pipeline_config(args, "stplot")
    clip = _load_input(cfg)
    res = pl.run_pipeline(clip, cfg)
    out = _out_dir(args) / "stplot"
    src = pl.detection_clip(res, cfg)
    for axis in ("horizontal", "vertical"):
        for reduction in ("abs_mean", "signed_mean"):
            render_plot(spacetime_project(src, axis, reduction), out / f"{axis}_{reduction}.png")
    _write_json(out.parent / "provenance.json", pl.provenance("stplot", cfg.to_dict(), src.provenance))
    return EXIT_OK


def cmd_detect(args):
    cfg = _pipeline_config(args, "detect")
    clip = _load_input(cfg)
    res = pl.run_pipeline(clip, cfg)
    report = pl.run_detection(res, cfg)
    out = _out_dir(args)
    (out / "report.json").write_text(report.to_json())
    if cfg.truth is not None:
        try:
            truth = json.loads(Path(cfg.truth).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputDataError(f"cannot read ground truth {cfg.truth}: {exc}") from exc
        metrics = pl.evaluate(report, truth, cfg, res.factor)
        (out / "metrics.json").write_text(dumps_report(metrics))
    _write_json(out / "provenance.json", pl.provenance("detect", cfg.to_dict(), res.analysis.provenance))
    return EXIT_OK


def _contact_sheet(clips, n=4, height=96):
    rows = []
    count = clips[0].frame_count
    idx = np.linspace(0, count - 1, n).round().astype(int)
    for clip in clips:
        tiles = []
        for t in idx:
            fr = clip.data[t]
            img = fr[0] if fr.shape[0] == 1 else fr.transpose(1, 2, 0)
            img = np.rint(np.clip(img, 0, 1) * 255).astype(np.uint8)
            if img.ndim == 2:
                img = np.repeat(img[:, :, None], 3, axis=2)
            scale = height / img.shape[0]
            img = cv2.resize(img, (max(1, round(img.shape[1] * scale)), height), interpolation=cv2.INTER_NEAREST)
            tiles.append(img)
            tiles.append(np.full((height, 4, 3), 255, np.uint8))
        rows.append(np.concatenate(tiles[:-1], axis=1))
    width = max(r.shape[1] for r in rows)
    rows = [np.pad(r, ((0, 4), (0, width - r.shape[1]), (0, 0)), constant_values=255) for r in rows]
    return np.concatenate(rows, axis=0)


def cmd_compare(args):
    if not args.config or len(args.config) not in (1, 2):
        raise pl.ConfigError("compare needs --config A.json --config B.json (or one provenance file)")
    if len(args.config) == 1:
        command, d, base = pl.load_config(args.config[0])
        if command != "compare":
            raise pl.ConfigError("a single --config for compare must be a compare provenance file")
        cfgs = [pl.PipelineConfig.from_dict(d["a"], base), pl.PipelineConfig.from_dict(d["b"], base)]
    else:
        cfgs = []
        for p in args.config:
            command, d, base = pl.load_config(p)
            if command not in (None, "compare", "detect", "amplify", "stplot"):
                raise pl.ConfigError(f"{p}: not a pipeline config")
            cfgs.append(pl.PipelineConfig.from_dict(d, base))
    runs, timings = [], []
    for cfg in cfgs:
        clip = _load_input(cfg)
        start = time.perf_counter()
        res = pl.run_pipeline(clip, cfg)
        report = pl.run_detection(res, cfg)
        elapsed = time.perf_counter() - start
        runs.append((cfg, clip, res, report))
        timings.append(elapsed / clip.frame_count)
    (ca, clip_a, _, _), (cb, clip_b, _, _) = runs
    if clip_a.shape != clip_b.shape:
        raise pl.ConfigError(f"inputs differ in geometry: {clip_a.shape} vs {clip_b.shape}")
    table = {}
    for key, (cfg, clip, res, report) in zip(("a", "b"), runs):
        row = {"pipeline": cfg.pipeline, "flicker_correction": cfg.flicker_correction}
        row.update(pl.snr_metrics(res, cfg, report))
        row["present_frames"] = int(sum(report.present))
        row["activity"] = report.activity
        if cfg.truth is not None:
            row["evaluation"] = pl.evaluate(report, json.loads(Path(cfg.truth).read_text()), cfg, res.factor)
        table[key] = row
    out = _out_dir(args)
    (out / "compare.json").write_text(dumps_report(table))
    sheet = _contact_sheet([r[2].amplified for r in runs])
    cv2.imwrite(str(out / "contact_sheet.png"), sheet[:, :, ::-1])
    # wall-clock timings are the one non-reproducible output
    _write_json(out / "timing.json", {"a_seconds_per_frame": timings[0], "b_seconds_per_frame": timings[1]})
    _write_json(out / "provenance.json", pl.provenance("compare", {"a": ca.to_dict(), "b": cb.to_dict()}))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "amplify": cmd_amplify,
    "stplot": cmd_stplot,
    "detect": cmd_detect,
    "compare": cmd_compare,
}


def build_parser():
    p = argparse.ArgumentParser(prog="latentlens", description="Amplify and analyze faint wall-reflection residuals in video.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", action="append", help="pipeline config or provenance JSON")
        sp.add_argument("--out", "-o", default="out", help="output directory")
        sp.add_argument("--seed", type=int, help="override scene seed (synth)")
        if name == "synth":
            sp.add_argument("--preset", choices=PRESETS)
            sp.add_argument("--spec", help="scene spec JSON (object, list, or {scenes: [...]})")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputDataError as exc:
        print(f"latentlens: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LatentLensError, ValueError, KeyError) as exc:
        print(f"latentlens: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
