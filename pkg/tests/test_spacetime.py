import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latentlens import detect
from latentlens.errors import ParameterError
from latentlens.spacetime import SpaceTimePlot, diverging_rgb, read_plot_csv, render_plot, spacetime_project
from latentlens.video_model import RESIDUAL, Clip

import _scenes as sc
from _oracles import parabolic_ridge_slope


def _res(data):
    return Clip(np.asarray(data, dtype=np.float64), 30.0, RESIDUAL)


def test_zero_clip_zero_plot():
    p = spacetime_project(_res(np.zeros((4, 1, 5, 6))), "horizontal")
    assert p.data.shape == (6, 4)
    assert np.all(p.data == 0)
    v = spacetime_project(_res(np.zeros((4, 1, 5, 6))), "vertical", "signed_mean")
    assert v.data.shape == (5, 4)


def test_bright_column_peaks_at_its_row():
    data = np.zeros((1, 1, 8, 10))
    data[0, 0, :, 6] = 1.0
    p = spacetime_project(_res(data), "horizontal", "signed_mean")
    assert int(np.argmax(p.data[:, 0])) == 6
    assert p.data[6, 0] == 1.0


@pytest.mark.parametrize("v", [0.5, 1.0])
def test_walk_ridge_slope(v):
    filt, truth = sc.dif_analysis(sc.walk_scene(9.0, 54.0, v, seed=41))
    plot = spacetime_project(filt, "horizontal", "abs_mean")
    frames = np.nonzero(truth.present_mask())[0][12:-12]
    assert abs(parabolic_ridge_slope(plot.data, frames) / truth.velocity - 1) < 0.1
    pos = detect.ridge_positions(plot, frames)
    assert abs(np.polyfit(frames.astype(float), pos, 1)[0] / truth.velocity - 1) < 0.1


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 1, 4, 5), elements=st.floats(-1, 1)))
def test_plot_properties(data):
    clip = _res(data)
    h = spacetime_project(clip, "horizontal", "signed_mean")
    rot = _res(np.rot90(data, k=1, axes=(2, 3)))  # rotate each frame 90 degrees counter-clockwise
    v_rot = spacetime_project(rot, "vertical", "signed_mean")
    np.testing.assert_allclose(v_rot.data[::-1], h.data, atol=1e-12)
    for axis in ("horizontal", "vertical"):
        a = spacetime_project(clip, axis, "abs_mean").data
        s = spacetime_project(clip, axis, "signed_mean").data
        assert np.all(a >= np.abs(s) - 1e-12)
    perm = _res(data[:, :, ::-1, :])
    a1 = spacetime_project(clip, "horizontal", "abs_mean").data
    a2 = spacetime_project(perm, "horizontal", "abs_mean").data
    assert np.sum(a1) == pytest.approx(np.sum(a2), abs=1e-12)


def test_rgb_uses_luma_and_roi():
    data = np.zeros((2, 3, 4, 4))
    data[:, 1] = 1.0
    p = spacetime_project(_res(data), "horizontal", "signed_mean")
    np.testing.assert_allclose(p.data, 0.7152)
    q = spacetime_project(_res(data), "vertical", roi=(1, 0, 3, 2))
    assert q.data.shape == (2, 2)
    with pytest.raises(ParameterError):
        spacetime_project(_res(data), "vertical", roi=(0, 0, 9, 2))
    with pytest.raises(ParameterError):
        spacetime_project(_res(data), "diagonal")
    with pytest.raises(ParameterError):
        spacetime_project(_res(data), "vertical", "max")


def test_render_zero_plot_uniform_gray(tmp_path):
    render_plot(SpaceTimePlot("horizontal", np.zeros((5, 7)), "abs_mean"), tmp_path / "z.png")
    img = cv2.imread(str(tmp_path / "z.png"))
    assert img.shape == (5, 7, 3)
    assert np.all(img == 128)


def test_render_single_max_is_full_red(tmp_path):
    data = np.random.default_rng(0).uniform(-0.5, 0.5, (6, 9))
    data[2, 4] = 1.0
    render_plot(SpaceTimePlot("horizontal", data, "signed_mean"), tmp_path / "p.png")
    rgb = cv2.imread(str(tmp_path / "p.png"))[:, :, ::-1]
    red = np.all(rgb == [255, 0, 0], axis=-1)
    assert red.sum() == 1 and red[2, 4]
    assert diverging_rgb(np.array([-1.0]))[0].tolist() == [0, 0, 255]


def test_csv_round_trip_exact(tmp_path):
    data = np.random.default_rng(1).standard_normal((4, 6)) * 1e-5
    plot = SpaceTimePlot("vertical", data, "signed_mean")
    render_plot(plot, tmp_path / "v.png")
    text = (tmp_path / "v.csv").read_text().splitlines()
    assert text[0] == ",".join(f"t{t}" for t in range(6))
    back = read_plot_csv(tmp_path / "v.csv", "vertical", "signed_mean")
    assert np.array_equal(back.data, data)
