"""viz command"""

import logging
from pathlib import Path

import numpy as np
import typer

from segdepth.cli.commands.app import app
from segdepth.cli.commands.infer import predict_image
from segdepth.cli.errors import command_errors
from segdepth.cli.log import setup_logging
from segdepth.evaluation.canny import canny_edges
from segdepth.geometry.camera import Intrinsics, backproject
from segdepth.geometry.ply import write_ply
from segdepth.model.checkpoint import load_checkpoint
from segdepth.vision.netpbm import read_ppm, write_ppm
from segdepth.vision.overlay import boundary_overlay, colorize_depth, mask_image, segment_palette

logger = logging.getLogger(__name__)


#: Hierarchy level whose segments colour the exported point cloud
POINT_CLOUD_LEVEL = 1


@app.command()
def viz(
    ckpt: Path = typer.Option(..., envvar="SEGDEPTH_CKPT", help="Trained checkpoint"),
    image: Path = typer.Option(..., help="Input 8-bit PPM image"),
    out_dir: Path = typer.Option(..., help="Directory for the overlays"),
    log_level: str = typer.Option("warning", envvar="SEGDEPTH_LOG_LEVEL", help="Python logging level. Set 'disabled' in testing."),
):
    """Write segment boundary overlays per hierarchy level, the depth colormap, depth edges and a part-coloured point cloud."""
    setup_logging(log_level)
    with command_errors():
        checkpoint = load_checkpoint(ckpt)
        config = checkpoint.config
        resized, depth, trace = predict_image(read_ppm(image), config, checkpoint.params)
        out_dir.mkdir(parents=True, exist_ok=True)

        written = []
        for level, segmentation in enumerate(trace.segmentations()):
            path = out_dir / f"level{level}_segments.ppm"
            write_ppm(path, boundary_overlay(resized, segmentation))
            written.append(path)

        path = out_dir / "depth.ppm"
        write_ppm(path, colorize_depth(depth, config.depth_range))
        written.append(path)

        path = out_dir / "edges.ppm"
        write_ppm(path, mask_image(canny_edges(depth)))
        written.append(path)

        segmentation = trace.segmentations()[min(POINT_CLOUD_LEVEL, trace.l_max)]
        points = backproject(depth, Intrinsics.default_for(*config.input_size), valid=np.ones(depth.shape, dtype=bool))
        colours = segment_palette(segmentation.n_segments)[segmentation.labels.ravel()]
        write_ply(out_dir / "points_segments.ply", points, colours)

        for path in written:
            print(path)
