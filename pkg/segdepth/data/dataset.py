"""In-memory datasets and deterministic batching."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from segdepth.core.rng import Rng
from segdepth.data.augment import AugmentConfig, augment
from segdepth.data.scene import Sample
from segdepth.data.storage import read_split

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    """Stacked samples of one training step."""

    #: b×h×w×3
    images: np.ndarray

    #: b×h×w
    depths: np.ndarray

    #: Dataset indices of the samples
    indices: np.ndarray


class SampleDataset:
    """A list of samples with a seeded epoch order."""

    def __init__(self, samples: list[Sample], seed: int = 0):
        assert len(samples) > 0, "Empty dataset"
        sizes = {s.size for s in samples}
        assert len(sizes) == 1, f"Samples of mixed sizes: {sizes}"
        self.samples = samples
        self.seed = seed

    def __repr__(self):
        return f"<SampleDataset {len(self)} samples of {self.size}>"

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @classmethod
    def load(cls, directory: Path, seed: int = 0) -> "SampleDataset":
        samples = read_split(directory)
        logger.info("Loaded %d samples from %s", len(samples), directory)
        return cls(samples, seed)

    @property
    def size(self) -> tuple[int, int]:
        return self.samples[0].size

    @property
    def scene_ids(self) -> np.ndarray:
        return np.array([s.scene_id for s in self.samples])

    @property
    def frame_ids(self) -> np.ndarray:
        return np.array([s.frame_id for s in self.samples])

    def epoch_order(self, epoch: int) -> np.ndarray:
        """Sample order of an epoch, a function of the dataset seed and the epoch only."""
        return Rng(self.seed).child(f"epoch-{epoch}").permutation(len(self))

    def batch_indices(self, step: int, batch_size: int) -> np.ndarray:
        """Indices of the batch at a global step.

        Epochs are walked in order. A batch crossing an epoch boundary takes
        the rest from the next epoch's order.
        """
        n = len(self)
        start = step * batch_size
        indices = []
        for position in range(start, start + batch_size):
            epoch, offset = divmod(position, n)
            indices.append(self.epoch_order(epoch)[offset])
        # Fixed summation order inside a batch
        return np.sort(np.array(indices))

    def batch(self, step: int, batch_size: int, augment_config: Optional[AugmentConfig] = None) -> Batch:
        """Stack the batch of a step, augmenting each sample from its own stream."""
        indices = self.batch_indices(step, batch_size)
        samples = [self.samples[i] for i in indices]
        if augment_config is not None:
            stream = Rng(self.seed).child(f"augment-{step}")
            samples = [augment(s, stream.child(f"slot-{slot}"), augment_config) for slot, s in enumerate(samples)]
        return Batch(
            images=np.stack([s.image for s in samples]),
            depths=np.stack([s.depth for s in samples]),
            indices=indices,
        )
