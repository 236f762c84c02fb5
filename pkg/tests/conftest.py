import os
from logging import Logger

import pytest

from segdepth.cli.log import setup_pytest_logging
from segdepth.model.config import ModelConfig, SuperpixelSource


@pytest.fixture()
def logger(request) -> Logger:
    """Quiet matplotlib font cache chatter in test output."""
    return setup_pytest_logging(request)


@pytest.fixture(scope="session")
def tiny_config() -> ModelConfig:
    """Two level model on 16×16 input.

    Grid superpixels line up with the 2×2 token grid, one 8×8 cell each.
    """
    return ModelConfig(
        input_size=(16, 16),
        n0=4,
        stage_sizes=[2, 1],
        blocks_per_stage=1,
        width=8,
        heads=2,
        head_channels=4,
        mlp_ratio=2,
        superpixels=SuperpixelSource.grid,
    )


def slow_tests_enabled() -> bool:
    return os.environ.get("SEGDEPTH_SLOW_TESTS") is not None
