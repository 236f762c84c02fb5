"""flops command"""

from pathlib import Path
from typing import Optional

import typer

from segdepth.cli.commands.app import app
from segdepth.cli.config_file import load_run_config
from segdepth.cli.errors import command_errors
from segdepth.cli.log import setup_logging
from segdepth.model.flops import REFERENCE_FLOPS_RATIO, FlopsBaseline, estimate_flops


@app.command()
def flops(
    config: Optional[Path] = typer.Option(None, envvar="SEGDEPTH_CONFIG", help="Run configuration key=value file. Defaults to the desk configuration."),
    baseline: FlopsBaseline = typer.Option(FlopsBaseline.hierarchical, envvar="SEGDEPTH_BASELINE", help="Token schedule to count"),
    log_level: str = typer.Option("warning", envvar="SEGDEPTH_LOG_LEVEL", help="Python logging level. Set 'disabled' in testing."),
):
    """Print per-stage FLOPs and the ratio against a flat encoder of equal depth."""
    setup_logging(log_level)
    with command_errors():
        model_config, _ = load_run_config(config)
        report = estimate_flops(model_config, baseline)
        print(report.to_frame().to_string(index=False))
        print(f"encoder_total={report.encoder_total}")
        print(f"flat_encoder={report.flat_encoder}")
        print(f"total={report.total}")
        print(f"ratio={report.ratio:.6f}")
        print(f"reference_ratio={REFERENCE_FLOPS_RATIO:.6f}")
