"""Evaluation battery over a dataset.

For every sample the report carries:

- Pixel metrics over all valid pixels
- Segment metrics averaged over ground truth instances
- Occlusion boundary Chamfer ε_a and ε_c on Canny edges of depth
- Region mIoU and boundary F-score of every predicted hierarchy level against instances
- 3-D Chamfer between back-projected prediction and ground truth

A protocol that cannot run for a sample, e.g. because the predicted depth
has no edges, leaves its columns empty and names itself in the `notes`
column. The last row is the macro average. Retrieval accuracy is computed
over the whole dataset from the predictors' image embeddings.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
import pandas as pd

from segdepth.data.dataset import SampleDataset
from segdepth.data.scene import Sample
from segdepth.evaluation.boundary import depth_boundary_chamfer
from segdepth.evaluation.depth_metrics import UndefinedMetric, masks_from_labels, pixel_metrics, segment_metrics
from segdepth.evaluation.retrieval import random_baseline, retrieval_sweep
from segdepth.evaluation.segmentation import boundary_fscore, region_miou
from segdepth.geometry.camera import Intrinsics, backproject
from segdepth.geometry.chamfer import chamfer_3d
from segdepth.model.checkpoint import Checkpoint
from segdepth.model.config import ModelConfig
from segdepth.model.network import predict
from segdepth.model.params import ModelParams
from segdepth.utils.dataclass import format_key_values
from segdepth.utils.timer import timed_task
from segdepth.vision.partition import SegmentationMap

logger = logging.getLogger(__name__)


#: Label of the averaged row
MACRO_ROW = "macro"

REPORT_CSV_NAME = "report.csv"

REPORT_TEXT_NAME = "report.txt"

RETRIEVAL_CSV_NAME = "retrieval.csv"


@dataclass
class Prediction:
    depth: np.ndarray

    #: Segmentations from finest to coarsest, at image resolution
    segmentations: list[SegmentationMap] = field(default_factory=list)

    #: Image embedding for retrieval
    embedding: Optional[np.ndarray] = None


class Predictor(Protocol):
    """Anything that turns a sample into a prediction."""

    def predict(self, sample: Sample) -> Prediction:
        ...


class ModelPredictor:
    """Predict with trained parameters."""

    def __init__(self, config: ModelConfig, params: ModelParams):
        self.config = config
        self.params = params

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "ModelPredictor":
        return cls(checkpoint.config, checkpoint.params)

    def predict(self, sample: Sample) -> Prediction:
        depth, trace = predict(sample.image, self.params, self.config)
        return Prediction(depth=depth, segmentations=trace.segmentations(), embedding=trace.embedding())


class GroundTruthPredictor:
    """Return the ground truth as the prediction.

    Used to check the evaluation battery itself: every metric should come out perfect.
    """

    def predict(self, sample: Sample) -> Prediction:
        instances = sample.instances
        return Prediction(
            depth=sample.depth.astype(np.float64),
            segmentations=[SegmentationMap(instances, int(instances.max()) + 1)],
        )


@dataclass
class EvaluationReport:
    """Per-sample rows plus the macro row, and the retrieval table."""

    #: One row per sample and a final `macro` row
    rows: pd.DataFrame

    #: Retrieval sweep, None when the predictor gives no embeddings
    retrieval: Optional[pd.DataFrame] = None

    #: Expected scene-level top-1 accuracy of a random ranking
    retrieval_baseline: Optional[float] = None

    @property
    def samples(self) -> pd.DataFrame:
        return self.rows[self.rows["stem"] != MACRO_ROW]

    @property
    def macro(self) -> pd.Series:
        return self.rows[self.rows["stem"] == MACRO_ROW].iloc[0]

    def summary_values(self) -> dict[str, str]:
        """Macro metrics and retrieval accuracy as key=value strings."""
        values = {}
        for column, value in self.macro.items():
            if column in ("stem", "scene_id", "frame_id", "notes"):
                continue
            values[column] = "nan" if pd.isna(value) else f"{float(value):.6f}"
        if self.retrieval is not None:
            for row in self.retrieval.itertuples(index=False):
                key = f"retrieval.scene.top{row.top_k}" if row.protocol == "scene" else f"retrieval.frame{row.frame_k}.top{row.top_k}"
                values[key] = f"{row.accuracy:.6f}"
            values["retrieval.random_baseline"] = f"{self.retrieval_baseline:.6f}"
        values["samples"] = str(len(self.samples))
        return values

    def write(self, directory: Path):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.rows.to_csv(directory / REPORT_CSV_NAME, index=False, float_format="%.6f")
        if self.retrieval is not None:
            self.retrieval.to_csv(directory / RETRIEVAL_CSV_NAME, index=False, float_format="%.6f")
        (directory / REPORT_TEXT_NAME).write_text(format_key_values(self.summary_values()), encoding="utf-8")
        logger.info("Wrote evaluation report to %s", directory)


def _intrinsics(sample: Sample) -> Intrinsics:
    return sample.intrinsics or Intrinsics.default_for(*sample.size)


def evaluate_sample(sample: Sample, prediction: Prediction) -> dict:
    """All per-sample protocols as one report row."""
    row = {"stem": sample.stem, "scene_id": sample.scene_id, "frame_id": sample.frame_id}
    notes = []
    gt = sample.depth.astype(np.float64)
    pred = np.asarray(prediction.depth, dtype=np.float64)

    try:
        row |= pixel_metrics(pred, gt).to_dict()
    except UndefinedMetric:
        notes.append("pixel")

    try:
        _, macro = segment_metrics(pred, gt, masks_from_labels(sample.instances))
        row |= {f"segment_{k}": v for k, v in macro.to_dict().items() if k != "pixels"}
    except UndefinedMetric:
        notes.append("segment")

    try:
        boundary = depth_boundary_chamfer(pred, gt)
        row |= {"eps_a": boundary.eps_a, "eps_c": boundary.eps_c}
    except UndefinedMetric:
        notes.append("boundary")

    if prediction.segmentations:
        for level, segmentation in enumerate(prediction.segmentations):
            row[f"miou_l{level}"] = region_miou(segmentation, sample.instances)
            row[f"fscore_l{level}"] = boundary_fscore(segmentation, sample.instances)
    else:
        notes.append("segmentation")

    k = _intrinsics(sample)
    try:
        chamfer = chamfer_3d(backproject(pred, k), backproject(gt, k))
        row |= {"chamfer_precision": chamfer.precision, "chamfer_recall": chamfer.recall}
    except UndefinedMetric:
        notes.append("chamfer")

    row["notes"] = ",".join(notes)
    return row


def evaluate(predictor: Predictor, dataset: SampleDataset) -> EvaluationReport:
    """Run every protocol over a dataset.

    :return:
        Report with `len(dataset) + 1` rows
    """
    rows = []
    embeddings = []
    with timed_task("evaluate", samples=len(dataset), predictor=type(predictor).__name__):
        for sample in dataset:
            prediction = predictor.predict(sample)
            rows.append(evaluate_sample(sample, prediction))
            embeddings.append(prediction.embedding)

    frame = pd.DataFrame(rows)
    numeric = frame.drop(columns=["stem", "scene_id", "frame_id", "notes"])
    macro = {"stem": MACRO_ROW, "scene_id": -1, "frame_id": -1, "notes": ""}
    macro |= numeric.mean(axis=0, skipna=True).to_dict()
    frame = pd.concat([frame, pd.DataFrame([macro])], ignore_index=True)
    frame = frame[list(rows[0].keys()) + [c for c in frame.columns if c not in rows[0]]]

    retrieval = None
    baseline = None
    if all(e is not None for e in embeddings) and len(dataset) >= 2:
        try:
            retrieval = retrieval_sweep(np.stack(embeddings), dataset.scene_ids, dataset.frame_ids)
            baseline = random_baseline(dataset.scene_ids)
        except UndefinedMetric as e:
            logger.warning("Retrieval skipped: %s", e)
    return EvaluationReport(rows=frame, retrieval=retrieval, retrieval_baseline=baseline)


def compare_reports(reports: dict[str, EvaluationReport], columns: Sequence[str] = ("abs_rel", "rmse", "delta1", "eps_a", "eps_c", "chamfer_precision", "chamfer_recall")) -> pd.DataFrame:
    """Macro rows of several reports side by side, one row per report name."""
    rows = []
    for name, report in reports.items():
        macro = report.macro
        rows.append({"name": name} | {c: macro.get(c, np.nan) for c in columns})
    return pd.DataFrame(rows)
