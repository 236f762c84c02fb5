"""Analytic multiply-accumulate counts of the token pipeline.

Per transformer block over n tokens of width d:

- attention: `4nd² + 2n²d` (four projections, scores and mixing)
- MLP: `2·r·nd²` for hidden ratio r, `8nd²` at the usual r=4

Token counts include the class token. The flat baseline runs every encoder
block at the level-0 token count, the way a plain ViT keeps its token count.
"""
import enum
import logging
from dataclasses import dataclass, field

import pandas as pd
from dataclasses_json import dataclass_json

from segdepth.model.config import ModelConfig, ModelVariant

logger = logging.getLogger(__name__)


#: Reference hierarchical over flat encoder GFLOPs at full size, 103.2 / 135.0.
#: Documentation only, desk-scale counts are not expected to match it.
REFERENCE_FLOPS_RATIO = 103.2 / 135.0


class FlopsBaseline(enum.Enum):
    """Token schedule of the encoder."""

    #: Tokens shrink after every stage
    hierarchical = "hierarchical"

    #: Every stage keeps all level-0 tokens
    flat = "flat"


def attention_flops(n: int, d: int) -> int:
    return 4 * n * d * d + 2 * n * n * d


def mlp_flops(n: int, d: int, ratio: int = 4) -> int:
    return 2 * ratio * n * d * d


@dataclass_json
@dataclass
class StageFlops:
    """Counts for one hierarchy level."""

    level: int

    #: Segment tokens at this level, class token excluded
    tokens: int

    encoder_blocks: int

    attention: int

    mlp: int

    #: Assignment and aggregation producing this level from the one below
    pooling: int = 0

    #: Decoder blocks, skip fusion and unpooling at this level
    decoder: int = 0

    #: Projection of this level's tokens to the stride-8 grid
    projection: int = 0

    @property
    def encoder(self) -> int:
        return self.attention + self.mlp

    @property
    def total(self) -> int:
        return self.encoder + self.pooling + self.decoder + self.projection


@dataclass_json
@dataclass
class FlopsReport:
    """Per-level counts and the comparison against the flat encoder."""

    baseline: FlopsBaseline

    stages: list[StageFlops] = field(default_factory=list)

    #: Encoder attention+MLP of the flat equal-depth encoder
    flat_encoder: int = 0

    @property
    def encoder_total(self) -> int:
        return sum(s.encoder for s in self.stages)

    @property
    def total(self) -> int:
        return sum(s.total for s in self.stages)

    @property
    def ratio(self) -> float:
        """Encoder counts of this schedule over the flat encoder."""
        return self.encoder_total / self.flat_encoder

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "level": s.level,
                "tokens": s.tokens,
                "encoder_blocks": s.encoder_blocks,
                "attention": s.attention,
                "mlp": s.mlp,
                "pooling": s.pooling,
                "decoder": s.decoder,
                "projection": s.projection,
                "total": s.total,
            }
            for s in self.stages
        ]
        return pd.DataFrame(rows)


def estimate_flops(config: ModelConfig, baseline: FlopsBaseline = FlopsBaseline.hierarchical) -> FlopsReport:
    """Count multiply-accumulates of the encoder, pooling and decoder."""
    d = config.width
    r = config.mlp_ratio
    blocks = config.blocks_per_stage
    sizes = [config.n0] + list(config.stage_sizes)
    rows, columns = config.grid_size
    cells = rows * columns
    levels = config.levels

    flat_encoder = levels * blocks * (attention_flops(config.n0 + 1, d) + mlp_flops(config.n0 + 1, d, r))

    stages = []
    for level, n in enumerate(sizes):
        tokens = config.n0 if baseline == FlopsBaseline.flat else n
        # The coarsest level has no encoder blocks, it only feeds the decoder
        encoder_blocks = blocks if level < levels else 0

        attention = encoder_blocks * attention_flops(tokens + 1, d)
        mlp = encoder_blocks * mlp_flops(tokens + 1, d, r)

        pooling = 0
        if level > 0 and baseline == FlopsBaseline.hierarchical:
            fine = sizes[level - 1]
            # cosine similarities, weighted aggregation, refinement MLP
            pooling = fine * n * d + fine * n * d + mlp_flops(n, d, r)

        decoder = 0
        projection = 0
        if baseline == FlopsBaseline.hierarchical:
            if config.variant == ModelVariant.full and level < levels:
                coarse = sizes[level + 1]
                decoder = n * coarse * d + mlp_flops(n, d, r) + blocks * (attention_flops(n + 1, d) + mlp_flops(n + 1, d, r))
            elif config.variant == ModelVariant.no_unpool and level == levels:
                decoder = blocks * (attention_flops(n + 1, d) + mlp_flops(n + 1, d, r))
            projected = config.variant == ModelVariant.full or level == levels
            if projected:
                # P chain onto level-0 segments, then the head projection per cell
                projection = config.n0 * n * d + cells * d * config.head_channels

        stages.append(StageFlops(
            level=level,
            tokens=tokens,
            encoder_blocks=encoder_blocks,
            attention=attention,
            mlp=mlp,
            pooling=pooling,
            decoder=decoder,
            projection=projection,
        ))

    report = FlopsReport(baseline=baseline, stages=stages, flat_encoder=flat_encoder)
    logger.debug("FLOPs %s: encoder %d, flat encoder %d, ratio %.4f", baseline.value, report.encoder_total, flat_encoder, report.ratio)
    return report
