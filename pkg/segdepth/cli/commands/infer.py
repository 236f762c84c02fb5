"""infer command"""

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from segdepth.cli.commands.app import app
from segdepth.cli.config_file import parse_size
from segdepth.cli.errors import command_errors
from segdepth.cli.log import setup_logging
from segdepth.data.storage import write_depth
from segdepth.model.checkpoint import load_checkpoint
from segdepth.model.config import ModelConfig
from segdepth.model.network import ForwardTrace, predict
from segdepth.model.params import ModelParams
from segdepth.vision.netpbm import read_ppm, write_ppm
from segdepth.vision.overlay import colorize_depth
from segdepth.vision.resize import resize_bilinear

logger = logging.getLogger(__name__)


def predict_image(image: np.ndarray, config: ModelConfig, params: ModelParams) -> tuple[np.ndarray, np.ndarray, ForwardTrace]:
    """Predict depth for an image of any size.

    The image is resized to the model input first.

    :return:
        Model-resolution image, model-resolution depth, forward trace
    """
    if image.shape[:2] != config.input_size:
        logger.info("Resizing %s input to %s", image.shape[:2], config.input_size)
        image = np.clip(resize_bilinear(image, config.input_size), 0, 1)
    depth, trace = predict(image, params, config)
    return image, depth, trace


@app.command()
def infer(
    ckpt: Path = typer.Option(..., envvar="SEGDEPTH_CKPT", help="Trained checkpoint"),
    image: Path = typer.Option(..., help="Input 8-bit PPM image"),
    out_depth: Path = typer.Option(..., help="Output raw depth file"),
    out_size: Optional[str] = typer.Option(None, help="Output size HxW. Defaults to the input image size."),
    out_ppm: Optional[Path] = typer.Option(None, help="Also write a colour-mapped depth PPM"),
    log_level: str = typer.Option("warning", envvar="SEGDEPTH_LOG_LEVEL", help="Python logging level. Set 'disabled' in testing."),
):
    """Predict depth for one image and resize it bilinearly to the requested size."""
    setup_logging(log_level)
    with command_errors():
        checkpoint = load_checkpoint(ckpt)
        raw = read_ppm(image)
        size = parse_size(out_size) if out_size else raw.shape[:2]
        _, depth, _ = predict_image(raw, checkpoint.config, checkpoint.params)
        depth = np.asarray(resize_bilinear(depth, size), dtype=np.float32)
        write_depth(out_depth, depth)
        if out_ppm is not None:
            write_ppm(out_ppm, colorize_depth(depth, checkpoint.config.depth_range))
        print(f"Wrote {depth.shape[0]}x{depth.shape[1]} depth to {out_depth}")
