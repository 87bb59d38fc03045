import json
import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hsv_colorsys
from popscan.detector import (
    BackendFailure,
    ButtonKind,
    DetectedButton,
    DetectorConfig,
    HsvInterval,
    PipeBackend,
    PowDetection,
    geometric_detect,
    identify_pow,
    opacity_verify,
    outside_shadow_ratio,
    rgb_to_hsv,
    rgb_to_hsv_array,
    shadow_mask,
)
from popscan.gui import Rect
from popscan.simulator import render
from support import make_script, pow_dict, row, screen, simple_pow

pixels = st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))


@settings(max_examples=500, deadline=None)
@given(pixels)
def test_hsv_matches_colorsys(px):
    h, s, v = rgb_to_hsv(px)
    oh, os_, ov = hsv_colorsys(px)
    assert s == pytest.approx(os_, abs=1e-12)
    assert v == pytest.approx(ov, abs=1e-12)
    if s > 0:
        assert min(abs(h - oh), 360 - abs(h - oh)) == pytest.approx(0, abs=1e-9)


def test_hsv_array_matches_scalar():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (20, 30, 3), dtype=np.uint8)
    arr = rgb_to_hsv_array(img)
    for y in range(20):
        for x in range(30):
            assert arr[y, x] == pytest.approx(rgb_to_hsv(img[y, x]), abs=1e-9)


def test_mask_matches_per_pixel_interval():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, (40, 40, 3), dtype=np.uint8)
    for interval in (HsvInterval(), HsvInterval(h_min=180, h_max=260, s_max=1.0, v_max=1.0)):
        mask = shadow_mask(img, interval).mask
        expected = np.array([[interval.contains(*hsv_colorsys(img[y, x])) for x in range(40)] for y in range(40)])
        assert (mask == expected).all()


def test_interval_union():
    img = np.array([[[0, 0, 0], [255, 0, 0], [255, 255, 255]]], dtype=np.uint8)
    red = HsvInterval(h_min=0, h_max=10, s_min=0.9, s_max=1.0, v_min=0.9, v_max=1.0)
    assert shadow_mask(img, [HsvInterval(), red]).mask.tolist() == [[True, True, False]]


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        HsvInterval(s_min=0.5, s_max=0.4)


# -- shadow ratio analytic cases ---------------------------------------------

def test_outside_ratio_analytic():
    dark = np.zeros((40, 60, 3), np.uint8)
    bright = np.full((40, 60, 3), 255, np.uint8)
    box = Rect(10, 10, 30, 30)
    assert outside_shadow_ratio(shadow_mask(dark).mask, box) == 1.0
    assert outside_shadow_ratio(shadow_mask(bright).mask, box) == 0.0
    half = bright.copy()
    half[:, :30] = 0
    assert outside_shadow_ratio(shadow_mask(half).mask, Rect(0, 0, 0, 0)) == 0.5
    assert outside_shadow_ratio(shadow_mask(dark).mask, Rect(0, 0, 60, 40)) is None


def test_opacity_verify_full_frame_box_is_false():
    dark = np.zeros((20, 20, 3), np.uint8)
    assert not opacity_verify(dark, Rect(0, 0, 20, 20))
    assert opacity_verify(dark, Rect(5, 5, 10, 10))


# -- renders -----------------------------------------------------------------

HOME = screen("home", [row("a", 100, "Alpha"), row("b", 200, "Beta")])


def render_with(spec):
    from popscan.simulator import ActivePow, pow_spec_from_dict

    script = make_script([HOME])
    if spec is None:
        return render(script, "home")
    p = pow_spec_from_dict(spec)
    return render(script, "home", [ActivePow(p, [t.initially_checked for t in p.toggles])])


def test_render_dims_white_to_102():
    img = render_with(simple_pow(bbox=[30, 300, 330, 600]))
    assert tuple(img[5, 5]) == (102, 102, 102)
    assert tuple(img[310, 35]) == (250, 250, 250)


def test_geometric_finds_panel_and_drops_widgets():
    img = render_with(simple_pow(bbox=[30, 160, 330, 480]))
    dets = geometric_detect(img)
    assert dets[0].bbox == Rect(30, 160, 330, 480)
    assert dets[0].confidence == 1.0
    assert all(not dets[0].bbox.contains_rect(d.bbox) for d in dets[1:])


def test_identify_none_without_overlay():
    assert identify_pow(render_with(None)) is None


def test_identify_edge_flush_sheet():
    img = render_with(simple_pow(bbox=[0, 380, 360, 640]))
    det = identify_pow(img)
    assert det is not None and det.bbox == Rect(0, 380, 360, 640)


def test_dark_toolbar_is_not_an_overlay():
    s = screen("home", [{"id": "bar", "bounds": [0, 0, 360, 56], "text": "T", "color": [30, 30, 30],
                         "clickable": False}, row("a", 200, "A")])
    assert identify_pow(render(make_script([s]), "home")) is None


@pytest.mark.parametrize("alpha", [0.2, 0.3, 0.4, 0.44])
def test_identify_across_dimming_levels(alpha):
    img = render_with(simple_pow(shadow_alpha=alpha))
    assert identify_pow(img).bbox == Rect(*simple_pow()["bbox"])


def test_light_dimming_is_not_detected():
    # 255 * 0.6 = 153 -> v = 0.6, above the default V ceiling
    assert identify_pow(render_with(simple_pow(shadow_alpha=0.6))) is None


def test_tau_monotone_on_single_render():
    img = render_with(pow_dict([30, 160, 330, 480]))
    results = [identify_pow(img, tau=t) is not None for t in np.linspace(0, 1, 21)]
    # once rejected at some tau, rejected for every larger tau
    assert results == sorted(results, reverse=True)


# -- detections and backends -------------------------------------------------

def test_detection_validation():
    box = Rect(10, 10, 100, 100)
    with pytest.raises(ValueError):
        PowDetection(box, 1.5)
    with pytest.raises(ValueError):
        PowDetection(box, 0.9, (DetectedButton(ButtonKind.EXIT, Rect(200, 200, 210, 210)),))
    det = PowDetection(box, 0.9, (DetectedButton(ButtonKind.EXIT, Rect(90, 10, 100, 20), 0.8),))
    assert PowDetection.from_dict(json.loads(json.dumps(det.to_dict()))) == det


class ListBackend:
    def __init__(self, dets):
        self.dets = dets

    def detect(self, image):
        return self.dets


def test_identify_picks_first_that_passes_opacity():
    img = render_with(simple_pow(bbox=[30, 160, 330, 480]))
    whole = PowDetection(Rect(0, 0, 360, 640), 0.99)
    good = PowDetection(Rect(30, 160, 330, 480), 0.9)
    assert identify_pow(img, ListBackend([whole, good])) == good
    assert identify_pow(img, ListBackend([])) is None


def test_detector_config_memoises_per_frame():
    calls = []

    class Counting(ListBackend):
        def detect(self, image):
            calls.append(1)
            return super().detect(image)

    img = render_with(simple_pow())
    cfg = DetectorConfig(backend=Counting([PowDetection(Rect(30, 160, 330, 480), 0.9)]))
    assert cfg.identify(img) == cfg.identify(img.copy())
    assert len(calls) == 1


def test_detector_config_round_trip():
    cfg = DetectorConfig(interval=(HsvInterval(), HsvInterval(h_min=10, h_max=20)), tau=0.6)
    again = DetectorConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.tau == 0.6 and again.interval == cfg.interval


def _pipe_script(tmp_path, body):
    path = tmp_path / "backend.py"
    path.write_text(textwrap.dedent(body))
    return [sys.executable, str(path)]


def test_pipe_backend_round_trip(tmp_path):
    argv = _pipe_script(tmp_path, """
        import json, sys
        for line in sys.stdin:
            req = json.loads(line)
            w, h = req["width"], req["height"]
            det = {"bbox": [30, 160, 330, 480], "confidence": 0.7,
                   "buttons": [{"kind": "exit", "bbox": [296, 166, 322, 192], "confidence": 0.9}]}
            print(json.dumps({"detections": [det, {"bbox": [0, 0, w, h], "confidence": 0.95}]}), flush=True)
    """)
    backend = PipeBackend(argv, workdir=tmp_path)
    try:
        img = render_with(simple_pow())
        dets = backend.detect(img)
        assert [d.confidence for d in dets] == [0.95, 0.7]
        found = identify_pow(img, backend)
        assert found.bbox == Rect(30, 160, 330, 480)
        assert found.buttons[0].kind is ButtonKind.EXIT
    finally:
        backend.close()


def test_pipe_backend_failure_modes(tmp_path):
    garbage = PipeBackend(_pipe_script(tmp_path, """
        import sys
        for line in sys.stdin:
            print("not json", flush=True)
    """), workdir=tmp_path)
    with pytest.raises(BackendFailure):
        garbage.detect(np.zeros((10, 10, 3), np.uint8))
    dead = PipeBackend(_pipe_script(tmp_path, "import sys\nsys.exit(0)\n"), workdir=tmp_path)
    with pytest.raises(BackendFailure):
        dead.detect(np.zeros((10, 10, 3), np.uint8))
