"""Session fixtures shared by the trainer, CLI and acceptance tests."""

import numpy as np
import pytest

from derain import ModelConfig, SynthRainParams, TrainConfig, synth_rain, train

from helpers import make_clean_image

# Desk-scale rain for 64px images: visible streaks, some clipping.
OVERFIT_RAIN = SynthRainParams(
    num_streaks=(6, 14),
    length_px=(10.0, 26.0),
    width_px=(1.0, 2.0),
    intensity=(0.08, 0.3),
)

OVERFIT_MODEL = ModelConfig(base_channels=8, num_stages=2, num_levels=2, se_reduction=4)


def make_overfit_pairs():
    return [
        synth_rain(
            make_clean_image(64, 64, seed=10 + i),
            OVERFIT_RAIN,
            np.random.default_rng([99, i]),
            key=f"pair{i}",
        )
        for i in range(4)
    ]


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory):
    """One small training run reused by every test that needs a fitted model."""
    pairs = make_overfit_pairs()
    train_cfg = TrainConfig(
        lr=5e-4,
        batch_size=4,
        patch_size=64,
        max_steps=2000,
        flip=False,
        seed=7,
        checkpoint_every=0,
    )
    out_dir = tmp_path_factory.mktemp("overfit")
    result = train(OVERFIT_MODEL, train_cfg, pairs, out_dir=out_dir)
    return result, pairs
