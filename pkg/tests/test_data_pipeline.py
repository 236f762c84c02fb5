"""Sample storage, augmentation, batching and external frame preprocessing."""
from pathlib import Path

import numpy as np
import pytest

from segdepth.core.rng import Rng
from segdepth.data.augment import AugmentConfig, AugmentError, augment, hflip_sample
from segdepth.data.dataset import SampleDataset
from segdepth.data.preprocess import preprocess_external
from segdepth.data.scene import SceneSpec, generate_dataset, generate_scene
from segdepth.data.storage import (
    MANIFEST_COLUMNS,
    MANIFEST_NAME,
    SampleFormatError,
    depth_from_bytes,
    depth_to_bytes,
    read_manifest,
    read_split,
    write_split,
)
from segdepth.geometry.camera import Intrinsics


@pytest.fixture(scope="module")
def samples():
    return generate_dataset(2, 3, (12, 16), seed=4)


def test_depth_bytes():
    depth = np.arange(12, dtype=np.float32).reshape(3, 4) / 7
    data = depth_to_bytes(depth)
    assert data[:8] == b"SHEDDPTH"
    assert len(data) == 16 + 12 * 4
    assert np.array_equal(depth_from_bytes(data), depth)


@pytest.mark.parametrize("data", [
    b"SHED",
    b"NOTDEPTH" + b"\x01\x00\x00\x00\x01\x00\x00\x00" + b"\x00" * 4,
    b"SHEDDPTH" + b"\x02\x00\x00\x00\x02\x00\x00\x00" + b"\x00" * 4,
])
def test_bad_depth_bytes(data):
    with pytest.raises(SampleFormatError):
        depth_from_bytes(data)


def test_split_round_trip(tmp_path: Path, samples):
    manifest = write_split(tmp_path, samples)
    assert list(manifest.columns) == MANIFEST_COLUMNS
    assert (tmp_path / MANIFEST_NAME).exists()
    assert len(read_manifest(tmp_path)) == len(samples)

    loaded = read_split(tmp_path)
    assert len(loaded) == len(samples)
    for original, copy in zip(samples, loaded):
        assert (copy.scene_id, copy.frame_id) == (original.scene_id, original.frame_id)
        assert np.allclose(copy.image, original.image, atol=1e-6)
        assert np.array_equal(copy.depth, original.depth)
        assert np.array_equal(copy.instances, original.instances)
        for name in ("fx", "fy", "cx", "cy"):
            assert getattr(copy.intrinsics, name) == pytest.approx(getattr(original.intrinsics, name))


def test_manifest_missing(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        read_manifest(tmp_path)
    (tmp_path / MANIFEST_NAME).write_text("stem,scene_id\nx,0\n")
    with pytest.raises(SampleFormatError):
        read_manifest(tmp_path)


def test_truncated_sample_file(tmp_path: Path, samples):
    write_split(tmp_path, samples[:1])
    path = tmp_path / f"{samples[0].stem}.depth"
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(SampleFormatError):
        read_split(tmp_path)


def test_hflip_moves_the_principal_point():
    sample = generate_scene(0, SceneSpec(), (8, 16), intrinsics=Intrinsics(fx=10.0, fy=10.0, cx=3.0, cy=4.0))
    flipped = hflip_sample(sample)
    assert flipped.intrinsics.cx == 12.0
    assert np.array_equal(flipped.depth, sample.depth[:, ::-1])
    assert np.array_equal(hflip_sample(flipped).image, sample.image)


def test_augment_is_reproducible(samples):
    config = AugmentConfig(crop_size=(8, 8))
    a = augment(samples[0], Rng(3).child("a"), config)
    b = augment(samples[0], Rng(3).child("a"), config)
    assert a.image.shape == (8, 8, 3)
    assert a.depth.shape == (8, 8)
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.depth, b.depth)
    assert 0 <= a.image.min() and a.image.max() <= 1


def test_augment_keeps_depth_values(samples):
    config = AugmentConfig(flip_probability=1.0)
    result = augment(samples[1], Rng(0), config)
    assert np.array_equal(result.depth, samples[1].depth[:, ::-1])


def test_crop_larger_than_sample(samples):
    with pytest.raises(AugmentError):
        augment(samples[0], Rng(0), AugmentConfig(crop_size=(100, 100)))


def test_epoch_order(samples):
    dataset = SampleDataset(samples, seed=9)
    order = dataset.epoch_order(0)
    assert sorted(order) == list(range(len(samples)))
    assert np.array_equal(order, SampleDataset(samples, seed=9).epoch_order(0))


def test_batches_walk_epochs(samples):
    dataset = SampleDataset(samples, seed=1)
    # Three batches of two cover the six samples of epoch 0
    seen = np.concatenate([dataset.batch_indices(step, 2) for step in range(3)])
    assert sorted(seen) == list(range(6))
    # A batch of four from step 1 spans the epoch boundary
    crossing = dataset.batch_indices(1, 4)
    expected = sorted([*dataset.epoch_order(0)[4:], *dataset.epoch_order(1)[:2]])
    assert list(crossing) == expected


def test_batch_stacks(samples):
    dataset = SampleDataset(samples, seed=1)
    batch = dataset.batch(0, 3)
    assert batch.images.shape == (3, 12, 16, 3)
    assert batch.depths.shape == (3, 12, 16)
    for slot, index in enumerate(batch.indices):
        assert np.array_equal(batch.depths[slot], samples[index].depth)

    augmented = dataset.batch(0, 3, AugmentConfig())
    again = dataset.batch(0, 3, AugmentConfig())
    assert np.array_equal(augmented.images, again.images)


def test_dataset_rejects_mixed_sizes(samples):
    other = generate_scene(0, SceneSpec(), (8, 8))
    with pytest.raises(AssertionError):
        SampleDataset([samples[0], other])


def test_preprocess_external():
    image = np.full((480, 640, 3), 255, dtype=np.uint8)
    depth = np.zeros((480, 640), dtype=np.uint16)
    depth[45:472, 43:608] = 2000
    k = Intrinsics(fx=500.0, fy=500.0, cx=319.5, cy=239.5)

    frame = preprocess_external(image, depth, (48, 64), intrinsics=k)
    assert frame.image.shape == (48, 64, 3)
    assert np.allclose(frame.image, 1.0)
    assert np.allclose(frame.depth, 2.0)
    assert frame.valid.all()
    assert frame.intrinsics.fx == pytest.approx(500.0 * 64 / 565)
    assert frame.intrinsics.fy == pytest.approx(500.0 * 48 / 427)


def test_preprocess_marks_holes():
    image = np.zeros((40, 40, 3), dtype=np.uint8)
    depth = np.full((40, 40), 1500, dtype=np.uint16)
    depth[0:4, 0:4] = 0
    frame = preprocess_external(image, depth, (10, 10), crop_box=None)
    assert not frame.valid[0, 0]
    assert frame.valid[5:, 5:].all()
    assert frame.depth[9, 9] == pytest.approx(1.5)
