import numpy as np
import pytest
import torch

from conftest import toy_model_config
from supergaze import gaze_codec, synthetic
from supergaze.detectors import BlobDetector
from supergaze.errors import ConfigurationError, LoadError
from supergaze.model import (GazeModel, GazePrediction, build_preprocessor, load_model, predict_static,
                             predict_temporal, save_checkpoint, save_lookup_checkpoint)
from supergaze.preprocessing import EyeRegions


def frame(yaw=0.3, size=64):
    return synthetic.render(size, [synthetic.Face(0.5, 0.5, 0.28)], yaw=yaw)


@pytest.fixture
def static_model():
    torch.manual_seed(0)
    return GazeModel(toy_model_config(detector="blob")).eval()


def test_static_prediction_contract(static_model):
    pre = build_preprocessor(static_model.cfg)
    pred = predict_static(static_model, frame(), pre)
    assert pred.trig.shape == (3,)
    assert -np.pi < pred.yaw <= np.pi and -np.pi / 2 <= pred.pitch <= np.pi / 2
    np.testing.assert_allclose(pred.vector, gaze_codec.angles_to_vector(pred.yaw, pred.pitch))


def test_prediction_without_eyes(static_model):
    pre = build_preprocessor(static_model.cfg)
    pred = predict_static(static_model, frame(), pre, regions=EyeRegions())
    assert np.all(np.isfinite(pred.trig))


def test_prediction_from_trig_decodes():
    p = GazePrediction.from_trig([0.0, -1.0, 0.0])
    assert p.yaw == pytest.approx(np.pi)


def test_mlp_consumes_both_summaries(static_model):
    assert static_model.mlp[0].in_features == 2 * static_model.cfg.dheca.dim


def test_temporal_token_counts():
    m = GazeModel(toy_model_config(mode="temporal"))
    assert (m.head_len, m.eye_len) == (7 * 49, 2 * 7 * 4)
    assert m.dheca.pos_head.shape[1] == 344 and m.dheca.pos_eye.shape[1] == 57


def test_static_temporal_share_shapes_except_positions():
    s = GazeModel(toy_model_config(mode="static")).state_dict()
    t = GazeModel(toy_model_config(mode="temporal")).state_dict()
    assert s.keys() == t.keys()
    differ = {k for k in s if s[k].shape != t[k].shape}
    assert differ == {"dheca.pos_head", "dheca.pos_eye"}


def test_temporal_identical_frames():
    torch.manual_seed(0)
    m = GazeModel(toy_model_config(mode="temporal", detector="blob")).eval()
    pred = predict_temporal(m, [frame()] * 7, build_preprocessor(m.cfg))
    assert np.all(np.isfinite(pred.trig))


def test_temporal_reversal_invariance_without_positions():
    torch.manual_seed(0)
    m = GazeModel(toy_model_config(mode="temporal", detector="blob")).double().eval()
    with torch.no_grad():
        m.dheca.pos_head.zero_()
        m.dheca.pos_eye.zero_()
    frames = [frame(yaw=0.2 * k) for k in range(7)]
    pre = build_preprocessor(m.cfg)
    a = predict_temporal(m, frames, pre)
    b = predict_temporal(m, frames[::-1], pre)
    np.testing.assert_allclose(a.trig, b.trig, atol=1e-5)


def test_wrong_mode_and_frame_count(static_model):
    pre = build_preprocessor(static_model.cfg)
    with pytest.raises(ConfigurationError):
        predict_temporal(static_model, [frame()] * 7, pre)
    m = GazeModel(toy_model_config(mode="temporal"))
    with pytest.raises(ConfigurationError):
        predict_temporal(m, [frame()] * 5, build_preprocessor(m.cfg))


def test_determinism(static_model):
    pre = build_preprocessor(static_model.cfg)
    a = predict_static(static_model, frame(), pre)
    b = predict_static(static_model, frame(), pre)
    assert np.array_equal(a.trig, b.trig)


def test_checkpoint_round_trip(static_model, tmp_path):
    path = save_checkpoint(tmp_path / "m.pt", static_model)
    loaded = load_model(path)
    heads, eyes = torch.rand(2, 4, 3, 224, 224), torch.rand(2, 2, 3, 64, 64)
    with torch.no_grad():
        assert torch.equal(static_model(heads, eyes), loaded(heads, eyes))
    assert loaded.cfg == static_model.cfg.__class__(**{**static_model.cfg.__dict__, "pretrained": False})


def test_lookup_checkpoint_is_not_a_model(tmp_path):
    path = save_lookup_checkpoint(tmp_path / "l.pt", {"a.png": [0, 0, 1]})
    with pytest.raises(LoadError):
        load_model(path)


def test_garbage_checkpoint(tmp_path):
    torch.save({"hello": 1}, tmp_path / "x.pt")
    with pytest.raises(LoadError):
        load_model(tmp_path / "x.pt")


def test_resnet_requires_512():
    from supergaze.config import DhecaConfig, ModelConfig
    with pytest.raises(ConfigurationError):
        ModelConfig(backbone="resnet18", dheca=DhecaConfig(dim=32, heads=4))
