"""Full decoder against the decoder without progressive unpooling.

Both variants train with an identical budget for every seed and are then
evaluated on the training set. The comparison reports AbsRel and boundary
accuracy ε_a per seed and averaged.
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from segdepth.data.dataset import SampleDataset
from segdepth.model.config import ModelConfig, ModelVariant
from segdepth.training.config import TrainConfig
from segdepth.training.evaluator import ModelPredictor, evaluate
from segdepth.training.trainer import train

logger = logging.getLogger(__name__)


VARIANTS = (ModelVariant.full, ModelVariant.no_unpool)


@dataclass
class AblationResult:

    #: Columns seed, variant, abs_rel, eps_a, final_loss
    runs: pd.DataFrame

    def averaged(self) -> pd.DataFrame:
        """Mean metrics per variant, indexed by variant name."""
        return self.runs.groupby("variant")[["abs_rel", "eps_a", "final_loss"]].mean()

    def full_not_worse(self) -> bool:
        """Whether the full variant averages at most the no_unpool numbers on both metrics."""
        averaged = self.averaged()
        full = averaged.loc[ModelVariant.full.value]
        ablated = averaged.loc[ModelVariant.no_unpool.value]
        return bool(full["abs_rel"] <= ablated["abs_rel"] and full["eps_a"] <= ablated["eps_a"])


def compare_variants(
        model_config: ModelConfig,
        train_config: TrainConfig,
        dataset: SampleDataset,
        seeds: Sequence[int] = (0, 1, 2),
        run_dir: Optional[Path] = None,
) -> AblationResult:
    """Train and evaluate both decoder variants for every seed."""
    rows = []
    for seed in seeds:
        for variant in VARIANTS:
            config = model_config.with_variant(variant)
            seeded = replace(train_config, seed=seed)
            out = Path(run_dir) / f"{variant.value}-seed{seed}" if run_dir is not None else None
            result = train(config, seeded, dataset, run_dir=out)
            report = evaluate(ModelPredictor(config, result.state.params), dataset)
            macro = report.macro
            rows.append({
                "seed": seed,
                "variant": variant.value,
                "abs_rel": float(macro["abs_rel"]),
                "eps_a": float(macro.get("eps_a", float("nan"))),
                "final_loss": result.summary.final_loss,
            })
            logger.info("Ablation seed %d variant %s: AbsRel %.4f ε_a %.4f", seed, variant.value, rows[-1]["abs_rel"], rows[-1]["eps_a"])
    return AblationResult(runs=pd.DataFrame(rows))
