import math

import numpy as np
import pytest

import morph3d


@pytest.fixture(scope="module")
def faces():
    cfg = morph3d.PopulationConfig(seed=7, subjects=4, samples=2, noise="controlled")
    out = []
    for s in range(4):
        for k in range(2):
            mesh, tip = morph3d.generate_sample(cfg, s, k)
            out.append((f"s{s}", morph3d.register_and_rasterize(mesh)))
    return out


def test_metrics_boundaries():
    assert morph3d.fmr([1, 2, 3, 9], 8, morph3d.Polarity.SIMILARITY) == 0.25
    assert morph3d.fmr([8], 8, morph3d.Polarity.SIMILARITY) == 1.0
    assert morph3d.fmr([0.5], 0.5, morph3d.Polarity.DISTANCE) == 0.0
    assert morph3d.mmpmr([([9], [1]), ([9], [8])], 8, morph3d.Polarity.SIMILARITY) == 0.5
    assert morph3d.rmmr(0.3997, 0.018) == pytest.approx(0.4177)
    with pytest.raises(morph3d.Error, match="EmptyScoreSet"):
        morph3d.fmr([], 1.0, morph3d.Polarity.SIMILARITY)


def test_depth_map_numpy_round_trip():
    g = morph3d.GridSpec(3, 2, 0.0, 0.0)
    a = np.array([[1.0, np.nan, 3.0], [4.0, 5.0, 6.0]])
    d = morph3d.DepthMap(g, a)
    assert d.valid_count == 5
    np.testing.assert_array_equal(d.to_numpy(), a)
    with pytest.raises(morph3d.Error, match="GridMismatch"):
        morph3d.DepthMap(g, np.zeros((3, 3)))


def test_registration_puts_tip_at_origin():
    cfg = morph3d.PopulationConfig(seed=7, subjects=2, samples=1)
    mesh, _ = morph3d.generate_sample(cfg, 0, 0)
    r = morph3d.register_face(mesh)
    tip = r["rotation"] @ r["nose_tip"] + r["translation"]
    assert np.linalg.norm(tip) < 1e-6
    assert mesh.vertices.shape == (mesh.vertex_count, 3)


def test_morph_model_and_matchers(faces):
    a, b = faces[0][1], faces[2][1]
    np.testing.assert_array_equal(morph3d.depth_average(a, b, 1.0).to_numpy(), a.to_numpy())
    mid = morph3d.depth_average(a, b, 0.5, "intersect_fill")
    assert mid.valid_count >= a.valid_count

    model = morph3d.build_model([d for _, d in faces], 3)
    c = morph3d.fit_coefficients(model, a)
    assert c.shape == (3,)
    np.testing.assert_allclose(morph3d.fit_coefficients(model, morph3d.reconstruct(model, c)), c, atol=1e-9)
    cm = morph3d.coefficient_average(model, a, b, 0.5)
    np.testing.assert_allclose(morph3d.fit_coefficients(model, cm),
                               0.5 * (c + morph3d.fit_coefficients(model, b)), atol=1e-9)
    assert morph3d.morph_to_mesh(mid).face_count > 0

    assert morph3d.distance_score(a, a) == pytest.approx(0.0, abs=1e-12)
    assert morph3d.distance_score(a, faces[1][1]) < morph3d.distance_score(a, b)
    lm = morph3d.train_likelihood_matcher(faces)
    assert lm.score(a, a) == lm.region_count


def test_presets_listed():
    names = morph3d.preset_names()
    assert len(names) == 5
    assert '"name": "exp2_random"' in morph3d.preset_config("exp2_random")
    with pytest.raises(morph3d.Error, match="UnknownId"):
        morph3d.preset_config("nope")
