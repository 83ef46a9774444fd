"""Pin BLAS to one thread before numpy loads so training tests are bit-reproducible."""
import os

for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from posemetric.metrics import MetricRegistry  # noqa: E402
from posemetric.pipeline import (  # noqa: E402
    ModelBundle,
    TrainingConfig,
    train_autoencoder,
    train_metric_network,
)
from posemetric.skeleton import Pose  # noqa: E402
from posemetric.synthetic import generate_dataset  # noqa: E402


@pytest.fixture(scope="session")
def tiny_config():
    """Small architecture and short budgets; keeps unit tests fast."""
    return TrainingConfig(
        steps=150,
        batch_size=128,
        latent_dim=8,
        hidden_units=32,
        metric_hidden_units=24,
        seed=5,
        early_stop=False,
    )


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_dataset(n_clips=6, frames_per_clip=40, seed=11)


@pytest.fixture(scope="session")
def tiny_model(tiny_dataset, tiny_config):
    model, _ = train_autoencoder(tiny_dataset, tiny_config)
    return model


@pytest.fixture(scope="session")
def tiny_bundle(tiny_dataset, tiny_model, tiny_config):
    registry = MetricRegistry()
    bundle = ModelBundle(tiny_model)
    for i, name in enumerate(("legs_spread", "spine_flexion")):
        cfg = TrainingConfig(
            steps=200,
            batch_size=128,
            latent_dim=8,
            hidden_units=32,
            metric_hidden_units=24,
            seed=20 + i,
            early_stop=False,
        )
        net, _ = train_metric_network(tiny_model, registry.get(name), tiny_dataset, cfg)
        bundle.metric_networks[name] = net
    return bundle


@pytest.fixture
def simple_roles():
    return {
        "pelvis": 0,
        "spine1": 1,
        "neck": 2,
        "rshoulder": 3,
        "lshoulder": 4,
        "rknee": 5,
        "lknee": 6,
    }


@pytest.fixture
def upright_pose(simple_roles):
    """A small articulated figure standing upright."""
    positions = np.array(
        [
            [0.0, 1.0, 0.0],  # pelvis
            [0.0, 1.35, 0.0],  # spine1
            [0.0, 1.6, 0.0],  # neck
            [0.2, 1.4, 0.0],  # rshoulder
            [-0.2, 1.4, 0.0],  # lshoulder
            [0.2, 0.5, 0.0],  # rknee
            [-0.2, 0.5, 0.0],  # lknee
        ]
    )
    return Pose(positions, simple_roles)
