import math
import pathlib

import numpy as np
import pytest

import phantom_fusion as pf

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    ids = pf.write_synthetic_dataset(str(root), 6, seed=3)
    assert ids == [f"{i:06d}" for i in range(6)]
    return root


def test_points_roundtrip(tmp_path):
    pts = np.random.default_rng(0).normal(size=(100, 4)).astype(np.float32)
    path = tmp_path / "x.bin"
    pf.write_points(str(path), pts)
    assert path.stat().st_size == 1600
    np.testing.assert_array_equal(pf.read_points(str(path)), pts)


def test_projection_matches_matrix_chain():
    c = pf.reference_calibration()
    pts = np.array([[20.0, 1.0, -0.5, 0.0], [35.0, -4.0, 0.3, 0.0]], dtype=np.float32)
    r0 = np.eye(4)
    r0[:3, :3] = c.r0_rect
    tr = np.eye(4)
    tr[:3, :] = c.tr_velo_to_cam
    hom = np.c_[pts[:, :3].astype(np.float64), np.ones(2)]
    h = (c.p2 @ r0 @ tr @ hom.T).T
    uvd = pf.project(pts, c)
    np.testing.assert_allclose(uvd[:, 0], h[:, 0] / h[:, 2], atol=1e-6)
    np.testing.assert_allclose(uvd[:, 1], h[:, 1] / h[:, 2], atol=1e-6)


def test_bev_iou_offset_squares():
    a = pf.Box3D([0.0, 1.0, 10.0], pf.Dims(1.5, 1.0, 1.0))
    b = pf.Box3D([0.5, 1.0, 10.0], pf.Dims(1.5, 1.0, 1.0))
    assert math.isclose(pf.bev_iou(a, b), 1 / 3, abs_tol=1e-9)
    assert pf.bev_iou(a, a) == 1.0


def test_campaign_and_detect(dataset, tmp_path):
    lib = pf.extract_templates(str(dataset))
    assert len(lib.ids("Car")) > 0
    outcomes, table = pf.run_campaign(str(dataset), lib, str(tmp_path / "camp"), attempts=3, seed=2)
    assert len(outcomes) == 6
    assert "Object Class" in table
    log = (tmp_path / "camp" / "results.jsonl").read_text()
    assert len(log.splitlines()) == 6
    scene = pf.load_scene(str(tmp_path / "camp"), "000000", require_labels=False)
    dets = pf.detect(scene.points, scene.calib)
    assert any(d.score > 0.5 for d in dets)
    bev = pf.render_bev(scene.points, [d.box for d in dets], scene.calib)
    assert bev.shape == (600, 500, 3)
    overlay = pf.render_overlay(scene.image, [], scene.calib)
    np.testing.assert_array_equal(overlay, scene.image)


def test_reference_fixture_summary():
    text = (FIXTURES / "reference_summary" / "results.jsonl").read_text()
    s = pf.summarize_log(text)
    assert s["total"]["asr"] == pytest.approx(85.5)
    assert abs(s["total"]["weighted_mean_score"] - 0.6578) <= 0.0005
    assert "85.5%" in pf.render_summary_log(text)


def test_cli_exit_codes():
    code, out, err = pf.cli(["nope"])
    assert code == 2 and err.count("\n") == 1
    code, out, _ = pf.cli(["evaluate", "--data-root", str(FIXTURES / "reference_summary")])
    assert code == 0 and "85.5%" in out
