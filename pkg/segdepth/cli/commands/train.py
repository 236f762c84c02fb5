"""train command"""

import logging
from pathlib import Path
from typing import Optional

import typer

from segdepth.cli.commands.app import app
from segdepth.cli.config_file import load_run_config
from segdepth.cli.errors import command_errors
from segdepth.cli.log import setup_logging
from segdepth.data.dataset import SampleDataset
from segdepth.model.config import ModelVariant
from segdepth.training.trainer import train as run_training

logger = logging.getLogger(__name__)


@app.command()
def train(
    data: Path = typer.Option(..., envvar="SEGDEPTH_DATA", help="Split directory written by gen-data"),
    out: Path = typer.Option(..., envvar="SEGDEPTH_OUT", help="Run directory for checkpoints, loss_curve.csv and summary.json"),
    config: Optional[Path] = typer.Option(None, envvar="SEGDEPTH_CONFIG", help="Run configuration key=value file. Defaults to the desk configuration."),
    variant: Optional[ModelVariant] = typer.Option(None, envvar="SEGDEPTH_VARIANT", help="Decoder variant, overrides the config file"),
    seed: Optional[int] = typer.Option(None, envvar="SEGDEPTH_SEED", help="Training seed, overrides the config file"),
    steps: Optional[int] = typer.Option(None, envvar="SEGDEPTH_STEPS", help="Total optimiser steps, overrides the config file"),
    resume: Optional[Path] = typer.Option(None, envvar="SEGDEPTH_RESUME", help="Checkpoint to continue training from"),
    log_level: str = typer.Option("info", envvar="SEGDEPTH_LOG_LEVEL", help="Python logging level. Set 'disabled' in testing."),
):
    """Train a model on a synthetic split."""
    setup_logging(log_level)
    with command_errors():
        model_config, train_config = load_run_config(
            config,
            model_overrides={"variant": variant.value if variant else None},
            train_overrides={
                "seed": str(seed) if seed is not None else None,
                "steps": str(steps) if steps is not None else None,
            },
        )
        dataset = SampleDataset.load(data, seed=train_config.seed)
        result = run_training(model_config, train_config, dataset, run_dir=out, resume=resume)
        print(f"Trained {result.state.step} steps, final loss {result.summary.final_loss}, run directory {out}")
