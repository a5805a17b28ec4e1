"""Short toy training run followed by the subset evaluation table.

Three seeds are trained for a few epochs on synthetic frames, each is
scored on a held-out synthetic set, and the per-run means are averaged.
"""
import tempfile

from supergaze import synthetic
from supergaze.config import DhecaConfig, ModelConfig, TrainConfig
from supergaze.evaluation import ModelPredictor, aggregate, evaluate, render_table
from supergaze.model import build_preprocessor, load_model
from supergaze.training import completed, multi_run

train_set, train_scenes = synthetic.gaze_fixture(24, size=64, seed=0)
test_set, test_scenes = synthetic.gaze_fixture(40, size=64, seed=1, subset="test", prefix="test")

model_cfg = ModelConfig(backbone="toy", pretrained=False, dheca=DhecaConfig(depth=2, dim=32, heads=4))
train_cfg = TrainConfig(epochs=15, batch_size=8, learning_rate=1e-3, seed=0)

run_dir = tempfile.mkdtemp(prefix="supergaze-demo-")
records = multi_run(model_cfg, train_cfg, train_set, None, run_dir, runs=3, image_loader=train_scenes)
for r in records:
    print(r.seed, r.status, [round(v, 3) for v in r.train_loss[::5]])

reports = []
for r in completed(records):
    predictor = ModelPredictor(load_model(r.checkpoint), build_preprocessor(model_cfg), None,
                               image_loader=test_scenes)
    reports.append(evaluate(predictor, test_set, "synthetic"))

print(render_table(reports + [aggregate(reports)], ["seed 0", "seed 1", "seed 2", "mean"]))
print(run_dir)
