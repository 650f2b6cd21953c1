"""Shared fixtures: a tiny synthetic corpus and models trained on it.

Everything here is desk-scale (32x32, small channel ladders) so the whole
unit suite stays fast; the full-size experiment lives in
test_acceptance.py.
"""

from pathlib import Path

import numpy as np
import pytest

import texdefect as td
from texdefect import synthgen as sg
from texdefect.image import Dataset

TINY_SIZE = 32
TINY_ARCH = td.ArchitectureDescriptor(TINY_SIZE, TINY_SIZE, 1, (8, 16))
NO_AUGMENT = td.AugmentSpec(
    shear_range=0.0, zoom_range=0.0, horizontal_flip=False, vertical_flip=False, seed=0
)


def tiny_texture(seed: int, noise: float = 0.04) -> np.ndarray:
    return sg.gen_texture(
        sg.TextureSpec(size=TINY_SIZE, base="sinusoid-grid", period=8, noise_amplitude=noise, seed=seed)
    )


@pytest.fixture(scope="session")
def tiny_corpus() -> Dataset:
    """In-memory 32x32 dataset: 8 train, 4 test-normal, 4 test-defect."""
    defect = sg.DefectSpec(kind="blob", extent=6, contrast=0.5, count=1)
    train = [(f"train/good/{i:03d}", tiny_texture(100 + i)) for i in range(8)]
    test_normal = [(f"test/good/{i:03d}", tiny_texture(200 + i)) for i in range(4)]
    test_defect = []
    for i in range(4):
        img, _ = sg.inject_defect(
            tiny_texture(300 + i), sg.DefectSpec(kind="blob", extent=6, contrast=0.5, count=1, seed=300 + i)
        )
        test_defect.append((f"test/defect/{i:03d}", img))
    return Dataset(
        root=Path("tiny"),
        category="tiny",
        train=train,
        test_normal=test_normal,
        test_defect=test_defect,
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_corpus) -> td.ModelWeights:
    """A briefly trained model; good enough for pipeline mechanics."""
    cfg = td.TrainConfig(
        learning_rate=2e-3, epochs=60, batch_size=8, augment=NO_AUGMENT, seed=3
    )
    model, losses = td.train_images([img for _, img in tiny_corpus.train], TINY_ARCH, cfg)
    assert losses[-1] < losses[0]
    return model


@pytest.fixture(scope="session")
def overfit_pair() -> tuple[td.ModelWeights, np.ndarray]:
    """(model, image) where the model was overfit hard on that one image."""
    img = tiny_texture(7, noise=0.03)
    cfg = td.TrainConfig(
        learning_rate=3e-3, epochs=250, batch_size=1, augment=NO_AUGMENT, seed=1
    )
    model, _ = td.train_images([img], TINY_ARCH, cfg)
    return model, img
