import numpy as np
import pytest

from crossview.datapipe import generate, load_records, record_inputs, record_target
from crossview.flowmatch import TrainConfig, TrainSample, train
from crossview.model import DitConfig, VelocityDit


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A few dozen records across all splits; shared by CLI/service tests."""
    out = tmp_path_factory.mktemp("data") / "ds"
    generate(
        str(out), seed=2, n_scenes=12, paths_per_scene=10,
        eval_fraction=0.2, val_fraction=0.2,
    )
    records = load_records(str(out), "eval")
    assert records, "fixture dataset produced an empty eval split"
    return str(out)


@pytest.fixture(scope="session")
def tiny_checkpoint(small_dataset, tmp_path_factory):
    """A loadable (barely trained) checkpoint for plumbing tests."""
    path = tmp_path_factory.mktemp("ckpt") / "tiny.ckpt"
    records = load_records(small_dataset, "train")[:8]
    config = DitConfig(layers=1, model_dim=32, heads=2, mlp_ratio=2)
    model = VelocityDit(config, seed=0)
    samples = [
        TrainSample(x1=record_target(r), inputs=record_inputs(r)) for r in records
    ]
    train(model, samples, TrainConfig(steps=3, batch_size=4, eval_every=100))
    model.save(str(path), step=3)
    return str(path)
