"""gen-data command"""

import logging
from pathlib import Path
from typing import Optional

import typer

from segdepth.cli.commands.app import app
from segdepth.cli.config_file import parse_size
from segdepth.cli.errors import UsageError, command_errors
from segdepth.cli.log import setup_logging
from segdepth.data.scene import SceneSpec, generate_dataset
from segdepth.data.storage import write_split
from segdepth.utils.dataclass import read_key_value_file
from segdepth.utils.timer import timed_task

logger = logging.getLogger(__name__)


@app.command(name="gen-data")
def gen_data(
    out: Path = typer.Option(..., envvar="SEGDEPTH_OUT", help="Split directory to write samples and manifest.csv into"),
    scenes: int = typer.Option(8, envvar="SEGDEPTH_SCENES", help="Number of procedural scenes"),
    frames_per_scene: int = typer.Option(4, envvar="SEGDEPTH_FRAMES_PER_SCENE", help="Camera-jittered frames rendered per scene"),
    size: str = typer.Option("96x96", envvar="SEGDEPTH_SIZE", help="Sample size HxW, both divisible by 8"),
    seed: int = typer.Option(0, envvar="SEGDEPTH_SEED", help="Dataset seed"),
    scene_config: Optional[Path] = typer.Option(None, envvar="SEGDEPTH_SCENE_CONFIG", help="key=value file overriding scene generator ranges"),
    log_level: str = typer.Option("warning", envvar="SEGDEPTH_LOG_LEVEL", help="Python logging level. Set 'disabled' in testing."),
):
    """Render a synthetic dataset with exact depth and instance masks."""
    setup_logging(log_level)
    with command_errors():
        height, width = parse_size(size)
        if height % 8 or width % 8:
            raise UsageError(f"Size {height}x{width} must be divisible by 8")
        if scenes < 1 or frames_per_scene < 1:
            raise UsageError("Need at least one scene and one frame per scene")
        if seed < 0:
            raise UsageError(f"Seed must be non-negative, got {seed}")

        spec = SceneSpec.from_key_values(read_key_value_file(scene_config)) if scene_config else SceneSpec()
        with timed_task("gen-data", scenes=scenes, frames=frames_per_scene, size=size):
            samples = generate_dataset(scenes, frames_per_scene, (height, width), seed, spec)
            write_split(out, samples)
        print(f"Wrote {len(samples)} samples ({scenes} scenes x {frames_per_scene} frames) to {out}")
