"""eval command"""

import logging
from pathlib import Path
from typing import List, Optional

import typer

from segdepth.cli.commands.app import app
from segdepth.cli.errors import UsageError, command_errors
from segdepth.cli.log import setup_logging
from segdepth.data.dataset import SampleDataset
from segdepth.model.checkpoint import load_checkpoint
from segdepth.training.evaluator import GroundTruthPredictor, ModelPredictor, compare_reports, evaluate

logger = logging.getLogger(__name__)


COMPARISON_NAME = "comparison.csv"


def report_names(checkpoints: list[Path]) -> list[str]:
    """Directory name per checkpoint: the file stem, qualified by its parent when stems repeat."""
    stems = [p.stem for p in checkpoints]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{p.parent.name}-{p.stem}" for p in checkpoints]


@app.command(name="eval")
def evaluate_command(
    data: Path = typer.Option(..., envvar="SEGDEPTH_DATA", help="Split directory to evaluate on"),
    report: Path = typer.Option(..., envvar="SEGDEPTH_REPORT", help="Directory for report.csv, report.txt and retrieval.csv"),
    ckpt: Optional[List[Path]] = typer.Option(None, help="Checkpoint to evaluate. Repeat to compare several."),
    gt: bool = typer.Option(False, "--gt", help="Evaluate the ground truth as the prediction"),
    log_level: str = typer.Option("warning", envvar="SEGDEPTH_LOG_LEVEL", help="Python logging level. Set 'disabled' in testing."),
):
    """Run the evaluation battery for one or more checkpoints."""
    setup_logging(log_level)
    with command_errors():
        checkpoints = list(ckpt or [])
        if not checkpoints and not gt:
            raise UsageError("Give at least one --ckpt or --gt")

        dataset = SampleDataset.load(data)
        predictors = {}
        for name, path in zip(report_names(checkpoints), checkpoints):
            predictors[name] = ModelPredictor.from_checkpoint(load_checkpoint(path))
        if gt:
            predictors["ground_truth"] = GroundTruthPredictor()

        if len(predictors) == 1:
            name, predictor = next(iter(predictors.items()))
            result = evaluate(predictor, dataset)
            result.write(report)
            print(f"Evaluated {name} on {len(dataset)} samples, report in {report}")
            return

        reports = {}
        for name, predictor in predictors.items():
            reports[name] = evaluate(predictor, dataset)
            reports[name].write(report / name)
        comparison = compare_reports(reports)
        comparison.to_csv(report / COMPARISON_NAME, index=False, float_format="%.6f")
        print(comparison.to_string(index=False))
