import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest
import torch

from supergaze import synthetic
from supergaze.config import DhecaConfig, ModelConfig, TrainConfig

torch.set_num_threads(1)


def toy_model_config(mode="static", variant="dheca", sr_config="head", depth=2, dim=32, heads=4,
                     detector="annotation", enhancer="bicubic"):
    return ModelConfig(mode=mode, backbone="toy", pretrained=False, sr_config=sr_config,
                       enhancer=enhancer, detector=detector,
                       dheca=DhecaConfig(depth=depth, dim=dim, heads=heads, variant=variant))


def toy_train_config(**kw):
    base = dict(epochs=1, batch_size=8, learning_rate=1e-3, seed=0)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_fixture():
    return synthetic.gaze_fixture(8, size=64, seed=3)


@pytest.fixture(scope="session")
def sequence_fixture():
    """Two sequences of 9 consecutive frames."""
    return synthetic.gaze_fixture(18, size=64, seed=5, sequences=2)


def pytest_terminal_summary(terminalreporter):
    import helpers

    if helpers.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(helpers.VERDICTS):
            terminalreporter.write_line(helpers.format_verdict(number))
