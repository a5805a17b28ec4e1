"""L1 training on trig targets with Adam at a constant learning rate, and multi-run protocol."""

from dataclasses import asdict, dataclass, field, replace
import json
import logging
import math
from pathlib import Path
import random
import time

import numpy as np
import torch
from torch.utils.data import DataLoader

from .config import ModelConfig, TrainConfig, config_echo
from .dataset import GazeDataset
from .errors import TrainingDivergedError
from .evaluation import ModelPredictor, evaluate
from .model import GazeModel, build_preprocessor, read_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)


def l1_loss(pred, target):
    """Mean absolute difference over components and batch."""
    return (pred - target).abs().mean()


def seed_everything(seed, deterministic=True):
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(deterministic, warn_only=False)
    if torch.backends.cudnn.is_available():
        torch.backends.cudnn.deterministic = deterministic
        torch.backends.cudnn.benchmark = not deterministic


@dataclass
class RunRecord:
    config: dict
    seed: int
    train_loss: list = field(default_factory=list)
    val_ae: list = field(default_factory=list)
    checkpoint: str = None
    selected_epoch: int = None
    seconds: float = 0.0
    status: str = "completed"
    error: str = None

    @property
    def epochs(self):
        return len(self.train_loss)

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path):
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def warm_start(model, checkpoint):
    """Copy matching parameters from another checkpoint (positional tables may differ in length)."""
    state = read_checkpoint(checkpoint)["state_dict"]
    own = model.state_dict()
    usable = {k: v for k, v in state.items() if k in own and own[k].shape == v.shape}
    model.load_state_dict(usable, strict=False)
    logger.info("warm start: %d/%d tensors from %s", len(usable), len(own), checkpoint)


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, train_samples, root, run_dir,
          val_samples=None, detector=None, enhancer=None, image_loader=None, sr_cache=None):
    """Train one model and write ``config.json``, ``checkpoint.pt`` and ``run.json`` to ``run_dir``."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    echo = config_echo(model_cfg, train_cfg)
    (run_dir / "config.json").write_text(json.dumps(echo, indent=2), encoding="utf-8")
    seed_everything(train_cfg.seed, train_cfg.deterministic)
    device = torch.device(train_cfg.device)

    model = GazeModel(model_cfg).to(device)
    if train_cfg.warm_start:
        warm_start(model, train_cfg.warm_start)
    pre = build_preprocessor(model_cfg, detector=detector, enhancer=enhancer)
    train_set = GazeDataset(train_samples, root, pre, mode=model_cfg.mode, image_loader=image_loader,
                            sr_cache=sr_cache)
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    val_set = None
    if val_samples:
        val_set = GazeDataset(val_samples, root, pre, mode=model_cfg.mode, image_loader=image_loader,
                              sr_cache=sr_cache)
    predictor = ModelPredictor(model, pre, root, sr_cache, image_loader)

    generator = torch.Generator().manual_seed(train_cfg.seed)
    loader = DataLoader(train_set, batch_size=train_cfg.batch_size, shuffle=True, generator=generator)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)

    record = RunRecord(config=echo, seed=train_cfg.seed)
    ckpt = run_dir / "checkpoint.pt"
    best = math.inf
    start = time.perf_counter()
    for epoch in range(train_cfg.epochs):
        model.train()
        total, count = 0.0, 0
        for heads, eyes, target in loader:
            heads, eyes, target = heads.to(device), eyes.to(device), target.to(device)
            loss = l1_loss(model(heads, eyes), target)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss {loss.item()} at epoch {epoch}")
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(target)
            count += len(target)
        record.train_loss.append(total / count)
        if val_set is not None and len(val_set):
            ae = evaluate(lambda items: predictor(items, val_set), val_set.items).means["full"]
            record.val_ae.append(ae)
            if train_cfg.selection == "best_val" and ae < best:
                best = ae
                save_checkpoint(ckpt, model, {"epoch": epoch})
                record.selected_epoch = epoch
        logger.info("epoch %d loss %.5f%s", epoch, record.train_loss[-1],
                    f" val AE {record.val_ae[-1]:.3f}" if record.val_ae else "")
    if train_cfg.selection == "final" or record.selected_epoch is None:
        save_checkpoint(ckpt, model, {"epoch": train_cfg.epochs - 1})
        record.selected_epoch = train_cfg.epochs - 1
    record.checkpoint = str(ckpt)
    record.seconds = time.perf_counter() - start
    record.save(run_dir / "run.json")
    return record


def multi_run(model_cfg, train_cfg, train_samples, root, run_dir, runs=5, **kwargs):
    """``runs`` independent trainings with seeds ``seed, seed+1, ...`` under ``run_dir/run_<i>``.

    A failed run is recorded with ``status="failed"`` and the rest continue.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    records = []
    for i in range(runs):
        cfg = replace(train_cfg, seed=train_cfg.seed + i)
        try:
            records.append(train(model_cfg, cfg, train_samples, root, Path(run_dir) / f"run_{i}", **kwargs))
        except Exception as exc:
            logger.warning("run %d (seed %d) failed: %s", i, cfg.seed, exc)
            records.append(RunRecord(config=config_echo(model_cfg, cfg), seed=cfg.seed,
                                     status="failed", error=str(exc)))
    done = [r for r in records if r.status == "completed"]
    if len(done) < runs:
        logger.warning("%d of %d runs failed; aggregating over %d", runs - len(done), runs, len(done))
    return records


def completed(records):
    return [r for r in records if r.status == "completed"]
