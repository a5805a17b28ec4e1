"""Acceptance suite: one test per criterion, each printing a PASS/FAIL verdict.

The verdicts are also collected into an "acceptance criteria" section of
the pytest terminal summary.
"""

import math
import time

import numpy as np
import torch

from conftest import toy_model_config, toy_train_config
from helpers import criterion, finite_difference_check, mp_angle_deg, randomize_norms, ref_dual_block
from supergaze import data, gaze_codec, synthetic
from supergaze.config import DhecaConfig, ModelConfig, TrainConfig
from supergaze.dataset import GazeDataset
from supergaze.detectors import BlobDetector
from supergaze.dheca import DualCrossAttentionBlock
from supergaze.evaluation import ModelPredictor, classify_subset, evaluate
from supergaze.model import GazeModel, build_preprocessor, load_model
from supergaze.preprocessing import SR_CONFIGS
from supergaze.training import train


@criterion(1, "codec round trip")
def test_codec_round_trip():
    yaw = np.linspace(-math.pi, math.pi, 3601)[1:]
    pitch = np.linspace(-math.pi / 2 + 1e-3, math.pi / 2 - 1e-3, 102)[1:-1]
    yy, pp = np.meshgrid(yaw, pitch, indexing="ij")
    start = time.perf_counter()
    back_yaw, back_pitch = gaze_codec.decode(gaze_codec.encode(yy, pp))
    seconds = time.perf_counter() - start
    dyaw = np.abs(np.angle(np.exp(1j * (back_yaw - yy))))
    worst = max(dyaw.max(), np.abs(back_pitch - pp).max())
    return worst < 1e-6 and seconds < 1.0, f"{yy.size} pairs, max error {worst:.2e} rad, {seconds:.3f} s"


@criterion(2, "yaw blending weight limits")
def test_weight_behaviour():
    start = time.perf_counter()
    pitch = np.linspace(-1.5, 1.5, 31)
    near_zero = np.linspace(-0.0099, 0.0099, 199)
    near_quarter = np.concatenate([np.pi / 2 + near_zero, -np.pi / 2 + near_zero])
    _, _, w0 = gaze_codec.yaw_components(gaze_codec.encode(*np.meshgrid(near_zero, pitch)))
    _, _, w1 = gaze_codec.yaw_components(gaze_codec.encode(*np.meshgrid(near_quarter, pitch)))
    seconds = time.perf_counter() - start
    ok = w0.min() > 0.99 and w1.max() < 0.01 and seconds < 1.0
    return ok, f"min w near 0: {w0.min():.6f}, max w near +-pi/2: {w1.max():.6f}, {seconds:.3f} s"


@criterion(3, "angular error against extended precision")
def test_angular_error_oracle():
    rng = np.random.default_rng(2024)
    a = rng.normal(size=(1000, 3))
    b = rng.normal(size=(1000, 3))
    # include nearly parallel and nearly antiparallel pairs, where acos is ill conditioned
    b[:100] = a[:100] + 1e-7 * rng.normal(size=(100, 3))
    b[100:200] = -a[100:200] + 1e-7 * rng.normal(size=(100, 3))
    got = gaze_codec.angular_error(a, b)
    ref = np.array([mp_angle_deg(x, y) for x, y in zip(a, b)])
    worst = np.abs(got - ref).max()
    ident = gaze_codec.angular_error(a, a)
    anti = gaze_codec.angular_error(a, -a)
    ok = worst < 1e-6 and np.all(ident == 0.0) and np.all(anti == 180.0)
    return ok, f"max gap {worst:.2e} deg; identity max {ident.max()}, antipodal min {anti.min()}"


@criterion(4, "dual cross-attention block against loop reference")
def test_attention_oracle():
    torch.manual_seed(4)
    blk = DualCrossAttentionBlock(16, 4, 64)
    randomize_norms(blk)
    head = torch.randn(1, 5, 16)
    eye = torch.randn(1, 3, 16)
    with torch.no_grad():
        h, e, w = blk(head, eye)
    rh, re, rwh, rwe = ref_dual_block(blk, head[0].double().numpy(), eye[0].double().numpy())
    rel = max(np.abs(h[0].double().numpy() - rh).max() / np.abs(rh).max(),
              np.abs(e[0].double().numpy() - re).max() / np.abs(re).max())
    row_gap = max((w["head"].sum(-1) - 1).abs().max().item(), (w["eye"].sum(-1) - 1).abs().max().item())
    return rel < 1e-5 and row_gap < 1e-6, f"relative error {rel:.2e}, softmax row-sum gap {row_gap:.2e}"


@criterion(5, "gradient check on the tiny configuration")
def test_gradient_check():
    start = time.perf_counter()
    worst = finite_difference_check()
    seconds = time.perf_counter() - start
    return worst < 1e-4 and seconds < 30, f"worst relative gap {worst:.2e}, {seconds:.1f} s"


def _probe(backbone, mode):
    dim = 512 if backbone == "resnet18" else 32
    cfg = ModelConfig(mode=mode, backbone=backbone, pretrained=False,
                      dheca=DhecaConfig(depth=1, dim=dim, heads=4))
    torch.manual_seed(0)
    model = GazeModel(cfg).eval()
    heads = torch.rand(1, cfg.head_images, 3, 224, 224)
    eyes = torch.rand(1, cfg.eye_images, 3, 64, 64)
    with torch.no_grad():
        h_tok, e_tok = model.tokens(heads, eyes)
        h_seq, e_seq = model.dheca.attach_cls_and_pos(h_tok, e_tok)
        out = model(heads, eyes)
    return h_tok.shape[1], e_tok.shape[1], h_seq.shape[1], e_seq.shape[1], tuple(out.shape)


@criterion(6, "token shape contracts")
def test_shape_contracts():
    expected = {"static": (4 * 49, 2 * 4), "temporal": (7 * 49, 2 * 7 * 4)}
    found, ok = [], True
    for backbone in ("resnet18", "toy"):
        for mode, (lh, le) in expected.items():
            got = _probe(backbone, mode)
            ok &= got == (lh, le, lh + 1, le + 1, (1, 3))
            found.append(f"{backbone}/{mode} {got[2]}+{got[3]}")
    return ok, ", ".join(found)


@criterion(7, "toy overfit below 5 degrees")
def test_toy_overfit(tmp_path):
    samples, scenes = synthetic.gaze_fixture(32, size=64, seed=0)
    model_cfg = ModelConfig(backbone="toy", pretrained=False, dheca=DhecaConfig(depth=4, dim=32, heads=4))
    train_cfg = TrainConfig(epochs=300, batch_size=8, learning_rate=1e-3, seed=0)
    start = time.perf_counter()
    record = train(model_cfg, train_cfg, samples, None, tmp_path / "overfit", image_loader=scenes)
    seconds = time.perf_counter() - start
    model = load_model(record.checkpoint)
    predictor = ModelPredictor(model, build_preprocessor(model_cfg), None, image_loader=scenes)
    ae = evaluate(predictor, samples).means["full"]
    return ae < 5.0 and seconds < 3600, f"training-set AE {ae:.2f} deg after {record.epochs} epochs, {seconds:.0f} s"


@criterion(8, "rectification recovers planted outliers")
def test_rectification_recovery():
    samples, scenes, planted = synthetic.rectification_fixture(1000, 50)
    intervals = data.ValidIntervals()
    out, report = data.rectify(samples, intervals, BlobDetector(), scenes)
    invalid, redetected = report.total("invalid"), report.total("redetected")
    by_path = {s.image_path: s for s in out}
    inside = all(data.ValidIntervals(data.PUBLISHED_INTERVALS).contains(data.box_center(by_path[p].face_box),
                                                                  by_path[p].subset)
                 for p in planted)
    again, report2 = data.rectify(out, intervals, BlobDetector(), scenes)
    idempotent = again == out and report2.total("invalid") == 0
    ok = invalid == 50 and redetected == 50 and inside and idempotent
    return ok, (f"invalid {invalid}, re-detected {redetected}, centres inside published intervals {inside}, "
                f"idempotent {idempotent}")


@criterion(9, "evaluation partition identities")
def test_evaluation_partition():
    rng = np.random.default_rng(9)
    samples = [data.make_sample(f"p/{i}", "s", "q", i, g) for i, g in enumerate(rng.normal(size=(500, 3)))]
    samples += [data.make_sample("edge/+90", "s", "q", 500, [1, 0, 0]),
                data.make_sample("edge/-90", "s", "q", 501, [-1, 0, 0])]
    preds = rng.normal(size=(len(samples), 3))
    rep = evaluate(lambda items: preds, samples)
    c, m = rep.counts, rep.means
    counts_ok = c["front"] + c["backward"] == c["full"] and c["front_facing"] <= c["front"]
    recombined = (c["front"] * m["front"] + c["backward"] * m["backward"]) / c["full"]
    gap = abs(recombined - m["full"])
    boundary_ok = all("front" in classify_subset(t) and "backward" not in classify_subset(t) for t in (-90.0, 90.0))
    return counts_ok and gap < 1e-9 and boundary_ok, (
        f"front {c['front']} + backward {c['backward']} = full {c['full']}, recombination gap {gap:.1e}, "
        f"+-90 front-only {boundary_ok}")


@criterion(10, "ablation switchboard end to end")
def test_ablation_switchboard(tmp_path):
    samples, scenes = synthetic.gaze_fixture(4, size=48, seed=10)
    runs = []
    for variant in ("none", "self", "crossgaze", "dheca"):
        runs.append((f"attention-{variant}", toy_model_config(variant=variant, depth=1, dim=16, heads=2)))
    for sr in SR_CONFIGS:
        runs.append((f"sr-{sr}", toy_model_config(sr_config=sr, depth=1, dim=16, heads=2)))
    dirs = set()
    for name, cfg in runs:
        record = train(cfg, toy_train_config(batch_size=2), samples, None, tmp_path / name, image_loader=scenes)
        model = load_model(record.checkpoint)
        preds = ModelPredictor(model, build_preprocessor(cfg), None, image_loader=scenes)(samples)
        assert np.all(np.isfinite(preds))
        dirs.add(str((tmp_path / name).resolve()))
    ok = len(dirs) == len(runs) == 8 and all((tmp_path / n / "checkpoint.pt").exists() for n, _ in runs)
    return ok, f"{len(runs)} configurations trained and evaluated in {len(dirs)} distinct run directories"


@criterion(11, "determinism under a fixed seed")
def test_determinism(tmp_path):
    samples, scenes = synthetic.gaze_fixture(8, size=48, seed=11)
    cfg = toy_model_config(depth=1, dim=16, heads=2)
    records = [train(cfg, toy_train_config(epochs=3, batch_size=3, seed=5), samples, None, tmp_path / k,
                     image_loader=scenes) for k in ("a", "b")]
    probe = GazeDataset(samples[:4], None, build_preprocessor(cfg), image_loader=scenes)
    heads, eyes, _ = (torch.stack(x) for x in zip(*(probe[i] for i in range(4))))
    with torch.no_grad():
        preds = [load_model(r.checkpoint).eval()(heads, eyes) for r in records]
    same_loss = records[0].train_loss == records[1].train_loss
    same_pred = torch.equal(preds[0], preds[1])
    return same_loss and same_pred, f"identical losses {same_loss} ({records[0].train_loss}), bitwise predictions {same_pred}"
