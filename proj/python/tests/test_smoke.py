import math

import numpy as np
import pytest

import geoset


def plane_spec(density=400.0):
    return {
        "seed": 1,
        "noise_sigma": 0.0,
        "primitives": [
            {"type": "plane", "origin": [0, 0, 0], "axis_u": [1, 0, 0], "axis_v": [0, 1, 0], "density": density},
            {"type": "plane", "origin": [0, 1, 0], "axis_u": [1, 0, 0], "axis_v": [0, 0, 1], "density": density},
        ],
    }


def test_scene_segments_into_its_faces():
    positions, normals, faces = geoset.generate_scene(plane_spec())
    assert positions.shape == normals.shape == (len(faces), 3)
    edges = geoset.knn_graph(positions, 8)
    labels = geoset.segment(positions, normals, edges, k_threshold=0.05)
    assert len(set(labels.tolist())) == 2
    for face in (0, 1):
        assert len(set(labels[faces == face].tolist())) == 1


def test_estimated_normals_are_unit():
    positions, _, _ = geoset.generate_scene(plane_spec())
    normals, degenerate = geoset.estimate_normals(positions, 8, viewpoint=(0.5, 0.5, 2.0))
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-9)
    assert degenerate.size == 0


def test_projection_and_overlap(toy_config):
    views = geoset.render_views(toy_config)
    assert len(views) == 6
    assert views[0]["depth"].shape == (32, 32)
    assert geoset.compute_overlap(views[0], views[0]) == 1.0
    pairs = geoset.mine_pairs(views, frame_stride=1)
    assert pairs and all(m < n and overlap > 0.3 for m, n, overlap in pairs)

    positions, _, faces = geoset.generate_scene(toy_config["scene"] | {"seed": 7})
    proj = geoset.project_geo_sets(positions, faces, views[0])
    assert proj["width"] == 32 and len(proj["sets"]) >= 2
    u, v, _ = next(iter(proj["sets"].values()))[0]
    assert 0 <= u < 32 and 0 <= v < 32

    proj_n = geoset.project_geo_sets(positions, faces, views[1])
    pixel_pairs, sets = geoset.build_match_index(proj, proj_n)
    assert pixel_pairs.shape[1] == 5 and len(sets) >= 2


def test_project_point_examples():
    view = {"camera": {"fx": 500, "fy": 500, "cx": 320, "cy": 240, "width": 640, "height": 480,
                       "world_to_camera": np.eye(4).ravel().tolist()}}
    assert geoset.project_point((0, 0, 2), view) == (320, 240, 2.0)
    assert geoset.project_point((1, 0, 2), view)[:2] == (570, 240)
    assert geoset.project_point((0, 0, -1), view) is None


def test_pixel_infonce_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    f_m = geoset.normalize(rng.normal(size=(3, 4, 6)))
    f_n = geoset.normalize(rng.normal(size=(3, 4, 6)))
    matches = np.array([[0, 0, 1, 1], [2, 1, 3, 2], [1, 2, 0, 0], [3, 0, 2, 2]])
    loss, grad_m, _ = geoset.pixel_infonce(f_m, f_n, matches)
    assert loss > 0
    h = 1e-5
    i = (1, 2, 3)
    up, down = f_m.copy(), f_m.copy()
    up[i] += h
    down[i] -= h
    numeric = (geoset.pixel_infonce(up, f_n, matches)[0] - geoset.pixel_infonce(down, f_n, matches)[0]) / (2 * h)
    assert numeric == pytest.approx(grad_m[i], rel=1e-5, abs=1e-9)


def test_singleton_sets_match_pixel_loss():
    rng = np.random.default_rng(1)
    f_m = geoset.normalize(rng.normal(size=(2, 3, 4)))
    f_n = geoset.normalize(rng.normal(size=(2, 3, 4)))
    matches = np.array([[0, 0, 2, 1], [1, 1, 0, 0], [2, 0, 1, 0]])
    proj_m = {"view_id": 0, "width": 3, "height": 2,
              "sets": {k: np.array([[u, v, k]]) for k, (u, v, _, _) in enumerate(matches)}}
    proj_n = {"view_id": 1, "width": 3, "height": 2,
              "sets": {k: np.array([[u, v, k]]) for k, (_, _, u, v) in enumerate(matches)}}
    set_loss = geoset.set_infonce(f_m, f_n, proj_m, proj_n, [0, 1, 2])[0]
    assert set_loss == pytest.approx(geoset.pixel_infonce(f_m, f_n, matches)[0], abs=1e-12)


def test_coding_rate_and_poly_lr():
    assert geoset.coding_rate(np.zeros((4, 5))) == 0.0
    assert geoset.coding_rate(np.ones((1, 1)), epsilon=1.0) == pytest.approx(0.5 * math.log(2), abs=1e-12)
    assert geoset.poly_lr(0.1, 0, 10) == 0.1
    assert geoset.poly_lr(0.1, 10, 10) == 0.0


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        geoset.pixel_infonce(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), np.array([[5, 5, 0, 0]]))
    with pytest.raises(geoset.GeosetError):
        geoset.pixel_infonce(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), np.zeros((0, 4), dtype=int))


def test_train_pipeline_on_toy_scene(toy_config):
    result = geoset.train_pipeline(toy_config)
    assert result["set_count"] == 3
    assert result["intra_set_cosine"] > 0.9
    assert result["cross_set_cosine"] < 0.5
    assert sorted(result["embeddings"]) == list(range(6))
    assert result["embeddings"][0].shape == (32, 32, 16)
    stages = {(r["stage"], r["loss_kind"]) for r in result["log"] if r["loss_kind"] != "epoch"}
    assert stages == {(1, "pixel"), (2, "set")}
    again = geoset.train_pipeline(toy_config)
    np.testing.assert_array_equal(again["embeddings"][3], result["embeddings"][3])


def test_reads_fixture_and_reports_byte_offsets(tmp_path):
    from conftest import DATA

    positions, normals, edges = geoset.read_ply(str(DATA / "two_planes.ply"))
    assert positions.shape == (200, 3) and normals.shape == (200, 3) and len(edges) == 361

    header = "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n"
    bad = tmp_path / "bad.ply"
    bad.write_text(header + "0 zero 0\n")
    with pytest.raises(geoset.GeosetIoError) as info:
        geoset.read_ply(str(bad))
    assert info.value.path == str(bad)
    assert info.value.offset == len(header) + 2
    assert isinstance(info.value, geoset.GeosetError)
