import math

import numpy as np
import pytest

import skelgroup as sg


@pytest.fixture(scope="module")
def data():
    cfg = sg.SyntheticConfig()
    cfg.n_clips = 24
    cfg.actors = 3
    cfg.frames = 6
    cfg.joints = 9
    cfg.seed = 3
    return sg.generate_synthetic(cfg)


def small_model(ds):
    m = sg.ModelConfig()
    m.branch.point_channels = 4
    m.branch.temporal_channels = 4
    m.branch.spatial_channels = 6
    m.branch.deep_channels = 6
    m.fusion.hidden = 12
    m.fusion.features = 8
    return m.for_dataset(ds)


def test_dataset_shapes(data):
    assert len(data) == 24
    assert data.actors_per_clip == 3 and data.frames_per_clip == 6 and data.joints == 9
    assert data.clip_array(0).shape == (3, 6, 9, 3)
    assert list(data.group_labels[:4]) == [0, 1, 2, 3]
    with pytest.raises(IndexError):
        data.clip_array(24)


def test_streams_are_translation_invariant(data, tmp_path):
    s = sg.streams(data, 1)
    assert set(s) == {"gs", "gm", "gd", "pivot"}
    assert s["gs"].shape == (3, 6, 9, 3)
    gd = s["gd"][s["pivot"]]
    assert np.all(gd[..., :2] == 0.0)
    assert np.all(s["gm"][:, -1] == 0.0)
    assert np.all(sg.streams(data, 1, use_gd=False)["gd"] == 0.0)


def test_round_trip(data, tmp_path):
    sg.write_dataset(data, tmp_path / "ds")
    again = sg.load_dataset(tmp_path / "ds")
    assert again.clip_ids == data.clip_ids
    assert np.allclose(again.clip_array(5), data.clip_array(5))


def test_train_evaluate_checkpoint(data, tmp_path):
    tr, va = sg.split_dataset(data, 0.75, 0)
    model = small_model(data)
    tc = sg.TrainConfig()
    tc.epochs = 3
    tc.batch_size = 8
    tc.seed = 1
    result = sg.train(tr, va, model, tc)
    assert len(result.history) == 3
    assert result.history_csv.startswith("epoch,")
    assert all(math.isfinite(r["group_loss"]) for r in result.history)

    report = sg.evaluate(result.params, va, model)
    assert 0.0 <= report.group_accuracy <= 1.0
    assert report.confusion.sum() == len(va)

    path = tmp_path / "model.ckpt"
    result.params.save(path)
    back = sg.load_checkpoint(path)
    assert back.layer_names == result.params.layer_names
    assert np.allclose(back.flatten(), result.params.flatten(), atol=1e-6)

    logits = sg.predict_group_logits(result.params, va, model)
    assert logits.shape == (len(va), 4)
    assert np.mean(logits.argmax(axis=1) == va.group_labels) == pytest.approx(report.group_accuracy)


def test_training_is_deterministic(data):
    model = small_model(data)
    tc = sg.TrainConfig()
    tc.epochs = 2
    tc.batch_size = 8
    a = sg.train(data, None, model, tc)
    tc.threads = 2
    b = sg.train(data, None, model, tc)
    assert a.params == b.params


def test_pseudo_labels_and_ari(data):
    feats, ids = sg.stand_in_features(data)
    assert feats.shape[0] == len(ids) == 24 * 3
    pc = sg.PseudoConfig()
    pc.k = 4
    pc.pca_dim = 8
    out = sg.pseudo_labels(feats, pc, ids)
    assert out["clusters"].shape == (72,)
    assert set(out["clusters"]) <= set(range(4))
    assert sg.adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)


def test_kmeans_separates_blobs():
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(c, 0.05, size=(20, 2)) for c in ((0, 0), (3, 0), (0, 3))])
    r = sg.kmeans(pts, 3, seed=1)
    truth = np.repeat([0, 1, 2], 20)
    assert sg.adjusted_rand_index(list(truth), r["assignments"]) == pytest.approx(1.0)
    for trace in r["traces"]:
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_gradcheck_passes():
    lines = sg.gradcheck()
    assert lines and all(l["passed"] for l in lines)


def test_errors_map_to_python_exceptions(data, tmp_path):
    tc = sg.TrainConfig()
    tc.batch_size = 0
    with pytest.raises(ValueError):
        sg.train(data, None, small_model(data), tc)
    with pytest.raises(sg.ConfigError):
        tc.validate()
    with pytest.raises(OSError):
        sg.load_dataset(tmp_path / "missing")


def test_cli_passthrough():
    code, out, err = sg.cli(["gradcheck"])
    assert code == 0
    assert "RESULT" in out
    code, _, err = sg.cli(["no-such-command"])
    assert code != 0
