"""Angular-error evaluation over yaw subsets, run aggregation and reports."""

from dataclasses import asdict, dataclass, field
import json
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader

from . import gaze_codec
from .dataset import GazeDataset, label_of
from .model import load_model, read_checkpoint

REPORT_VERSION = 1
SUBSET_NAMES = ("full", "front", "front_facing", "backward")
_BOUNDARIES = (-90.0, -20.0, 20.0, 90.0)
BOUNDARY_TOL = 1e-6


def classify_subset(yaw_deg):
    """Subsets containing a ground-truth yaw in degrees.

    front is ``[-90, 90]``, front_facing ``[-20, 20]`` and backward the
    rest, open at +-90.
    """
    names = {"full"}
    if -90.0 <= yaw_deg <= 90.0:
        names.add("front")
        if -20.0 <= yaw_deg <= 20.0:
            names.add("front_facing")
    else:
        names.add("backward")
    return names


def subset_masks(yaw_deg):
    yaw_deg = np.asarray(yaw_deg, dtype=np.float64)
    front = (yaw_deg >= -90.0) & (yaw_deg <= 90.0)
    return {
        "full": np.ones_like(front),
        "front": front,
        "front_facing": (yaw_deg >= -20.0) & (yaw_deg <= 20.0),
        "backward": ~front,
    }


@dataclass
class EvalReport:
    means: dict
    counts: dict
    runs: int = 1
    train_dataset: str = None
    test_dataset: str = None
    near_boundary: list = field(default_factory=list)
    per_run: list = field(default_factory=list)

    def to_dict(self):
        return {"version": REPORT_VERSION, **asdict(self)}

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.pop("version", None)
        return cls(**data)

    @property
    def label(self):
        if self.train_dataset and self.test_dataset and self.train_dataset != self.test_dataset:
            return f"{self.train_dataset} -> {self.test_dataset}"
        return self.test_dataset or self.train_dataset or ""


def evaluate(predictor, items, train_dataset=None, test_dataset=None):
    """Mean angular error per yaw subset.

    ``predictor(items) -> (N, 3)`` gaze vectors; ``items`` are samples or
    7-frame windows (labelled by the centre frame). Subset membership uses
    the ground-truth yaw. Empty subsets get ``None``.
    """
    items = list(items)
    truth = np.asarray([label_of(it).gaze for it in items], dtype=np.float64).reshape(-1, 3)
    pred = np.asarray(predictor(items), dtype=np.float64).reshape(-1, 3)
    if len(pred) != len(truth):
        raise ValueError(f"predictor returned {len(pred)} vectors for {len(truth)} items")
    errors = gaze_codec.angular_error(truth, pred) if len(truth) else np.zeros(0)
    yaw_deg = np.degrees(gaze_codec.vector_to_angles(truth)[0]) if len(truth) else np.zeros(0)
    masks = subset_masks(yaw_deg)
    means, counts = {}, {}
    for name in SUBSET_NAMES:
        m = masks[name]
        counts[name] = int(m.sum())
        means[name] = float(errors[m].mean()) if m.any() else None
    near = [label_of(items[i]).frame_id for i in range(len(items))
            if any(abs(yaw_deg[i] - b) <= BOUNDARY_TOL for b in _BOUNDARIES)]
    return EvalReport(means, counts, runs=1, train_dataset=train_dataset,
                      test_dataset=test_dataset or train_dataset, near_boundary=near)


def cross_dataset_eval(predictor, items, train_dataset, test_dataset):
    """Evaluation of a model trained on ``train_dataset`` on another dataset, no fine-tuning."""
    return evaluate(predictor, items, train_dataset=train_dataset, test_dataset=test_dataset)


def aggregate(reports):
    """Average per-subset means over runs (subsets absent in a run are skipped)."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    means = {}
    for name in SUBSET_NAMES:
        vals = [r.means[name] for r in reports if r.means.get(name) is not None]
        means[name] = float(np.mean(vals)) if vals else None
    first = reports[0]
    return EvalReport(means, dict(first.counts), runs=len(reports), train_dataset=first.train_dataset,
                      test_dataset=first.test_dataset, near_boundary=list(first.near_boundary),
                      per_run=[r.means for r in reports])


def render_table(reports, names=None):
    """Plain-text table: one row per report, columns Full/Front/Front facing/Backward."""
    header = ["Model", "Full", "Front", "Front facing", "Backward"]
    rows = []
    for i, rep in enumerate(reports):
        name = names[i] if names else (rep.label or f"run {i}")
        rows.append([name] + ["-" if rep.means[k] is None else f"{rep.means[k]:.2f}" for k in SUBSET_NAMES])
    widths = [max(len(str(r[c])) for r in [header] + rows) for c in range(len(header))]
    fmt = lambda r: "  ".join(str(v).ljust(w) if j == 0 else str(v).rjust(w) for j, (v, w) in enumerate(zip(r, widths)))
    line = "-" * len(fmt(header))
    return "\n".join([fmt(header), line] + [fmt(r) for r in rows])


def plot_error_vs_yaw(items, predictor, path):
    """Polar scatter of per-sample angular error against ground-truth yaw."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    items = list(items)
    truth = np.asarray([label_of(it).gaze for it in items], dtype=np.float64).reshape(-1, 3)
    pred = np.asarray(predictor(items), dtype=np.float64).reshape(-1, 3)
    yaw = gaze_codec.vector_to_angles(truth)[0]
    err = gaze_codec.angular_error(truth, pred)
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="polar")
    ax.scatter(yaw, err, s=4)
    ax.set_theta_zero_location("N")
    ax.set_title("angular error (deg) vs yaw")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


class ModelPredictor:
    """Wraps a :class:`GazeModel` as an ``items -> vectors`` predictor."""

    def __init__(self, model, preprocessor, root, sr_cache=None, image_loader=None, batch_size=16):
        self.model = model
        self.preprocessor = preprocessor
        self.root = root
        self.sr_cache = sr_cache
        self.image_loader = image_loader
        self.batch_size = batch_size

    @torch.no_grad()
    def trig(self, items, dataset=None):
        if dataset is None:
            dataset = GazeDataset(None, self.root, self.preprocessor, mode=self.model.cfg.mode,
                                  sr_cache=self.sr_cache, image_loader=self.image_loader,
                                  cache=False, items=list(items))
        param = next(self.model.parameters())
        was_training = self.model.training
        self.model.eval()
        out = []
        try:
            for heads, eyes, _ in DataLoader(dataset, batch_size=self.batch_size, shuffle=False):
                out.append(self.model(heads.to(param.device, param.dtype), eyes.to(param.device, param.dtype)))
        finally:
            self.model.train(was_training)
        if not out:
            return np.zeros((0, 3))
        return torch.cat(out).double().cpu().numpy()

    def __call__(self, items, dataset=None):
        return gaze_codec.trig_to_vector(self.trig(items, dataset))


class LookupPredictor:
    """Answers with stored vectors keyed by the label frame's ``image_path``."""

    def __init__(self, predictions):
        self.predictions = {k: np.asarray(v, dtype=np.float64) for k, v in predictions.items()}

    def __call__(self, items):
        try:
            return np.stack([self.predictions[label_of(it).image_path] for it in items]) if items else np.zeros((0, 3))
        except KeyError as exc:
            raise KeyError(f"lookup checkpoint has no prediction for {exc}") from None


def load_predictor(checkpoint, root, preprocessor_factory=None, sr_cache=None, image_loader=None):
    """Predictor for a model or lookup checkpoint; returns ``(predictor, mode)``."""
    payload = read_checkpoint(checkpoint)
    if payload["kind"] == "lookup":
        return LookupPredictor(payload["predictions"]), None
    from .model import build_preprocessor

    model = load_model(checkpoint)
    factory = preprocessor_factory or build_preprocessor
    return ModelPredictor(model, factory(model.cfg), root, sr_cache, image_loader), model.cfg.mode
