import numpy as np
import pytest

from mostream.formats import ManifestEntry, write_pgm
from mostream.mos import MosPair
from mostream.pipeline import (
    Clip,
    TrainPipeline,
    load_dataset,
    read_clip_frames,
    zero_magnitude_channels,
)
from mostream.raster import make_rng
from mostream.synth import SyntheticSpec, gen_synthetic
from mostream.volume import StackSpec


class TestReadClipFrames:
    def test_sorted_pgm_frames(self, tmp_path):
        rng = make_rng(0)
        for t in (2, 0, 1):
            write_pgm(tmp_path / f"frame_{t:03d}.pgm", rng.integers(0, 256, (4, 4), dtype=np.uint8))
        frames = read_clip_frames(tmp_path)
        assert len(frames) == 3
        assert frames[0].dtype == np.float64

    def test_empty_dir_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no frame files"):
            read_clip_frames(tmp_path)


class TestLoadDataset:
    def test_splits_and_pair_counts(self, tmp_path):
        spec = SyntheticSpec(
            frame_size=(32, 32), clips_per_class=3, speeds=(2.0,), directions=("right", "down")
        )
        entries = gen_synthetic(spec, make_rng(1), tmp_path)
        dataset = load_dataset(entries, tmp_path)
        assert dataset.classes == ["right_s2", "down_s2"]
        assert [len(g) for g in dataset.train_by_class] == [2, 2]
        assert len(dataset.test_clips) == 2
        for clip in dataset.test_clips:
            assert len(clip.pairs) == spec.frames_per_clip - 1
            assert clip.pairs[0].magnitude.dtype == np.uint8

    def test_missing_clip_reported_before_flow_work(self, tmp_path):
        entries = [ManifestEntry("nowhere/clip_000", "x", 0, "train")]
        with pytest.raises(ValueError, match="clip directory missing"):
            load_dataset(entries, tmp_path)


class TestTrainPipeline:
    def make_clip(self, seed, h=24, w=24, count=12):
        rng = make_rng(seed)
        pairs = [
            MosPair(
                rng.integers(0, 256, (h, w), dtype=np.uint8),
                rng.integers(0, 256, (h, w), dtype=np.uint8),
            )
            for _ in range(count)
        ]
        return Clip("clip", 0, pairs)

    def test_volume_shape(self):
        pipe = TrainPipeline(stack=StackSpec(10), out_side=16)
        vol = pipe.make_volume(self.make_clip(2), make_rng(3))
        assert vol.shape == (20, 16, 16)

    def test_deterministic_given_rng(self):
        pipe = TrainPipeline(stack=StackSpec(4), out_side=16)
        clip = self.make_clip(4)
        a = pipe.make_volume(clip, make_rng(5))
        b = pipe.make_volume(clip, make_rng(5))
        assert np.array_equal(a, b)

    def test_transform_applied(self):
        pipe = TrainPipeline(stack=StackSpec(4), out_side=16, volume_transform=zero_magnitude_channels)
        vol = pipe.make_volume(self.make_clip(6), make_rng(7))
        assert np.all(vol[0::2] == 0.0)
        assert np.any(vol[1::2] != 0.0)


class TestZeroMagnitudeChannels:
    def test_even_channels_zeroed_odd_kept(self):
        vol = make_rng(8).normal(size=(6, 3, 3))
        out = zero_magnitude_channels(vol)
        assert np.all(out[0::2] == 0.0)
        assert np.array_equal(out[1::2], vol[1::2])
        assert np.any(vol[0::2] != 0.0)  # input untouched
