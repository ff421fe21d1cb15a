"""Dataset plumbing: read clips, cache their byte-image pairs, and build
training volumes with the random stack start and multi-scale crop."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .augment import ScaleSet, apply_crop, random_multiscale_crop
from .formats import ManifestEntry, read_pgm, read_ppm
from .fusion import pairs_from_frames
from .mos import MosParams
from .raster import Rng, to_gray
from .tvl1 import Tvl1Params
from .volume import StackSpec, sample_train_start, stack_volume

FRAME_SUFFIXES = (".pgm", ".ppm")


@dataclass(frozen=True)
class Clip:
    video_id: str
    class_index: int
    pairs: list  # per-transition (first, second) byte-image pairs


@dataclass
class ClipDataset:
    classes: list[str]
    train_by_class: list[list[Clip]]
    test_clips: list[Clip]

    @property
    def num_classes(self) -> int:
        return len(self.classes)


def read_clip_frames(clip_dir) -> list[np.ndarray]:
    """Grayscale float frames from a directory of PGM/PPM files, sorted by name."""
    clip_dir = Path(clip_dir)
    paths = sorted(p for p in clip_dir.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not paths:
        raise ValueError(f"no frame files (*.pgm, *.ppm) in {clip_dir}")
    frames = []
    for p in paths:
        if p.suffix.lower() == ".pgm":
            frames.append(read_pgm(p).astype(np.float64))
        else:
            frames.append(to_gray(read_ppm(p)))
    return frames


def load_dataset(
    entries: list[ManifestEntry],
    root,
    tvl1_params: Tvl1Params = Tvl1Params(),
    mos_params: MosParams = MosParams(),
    mode: str = "mos",
    progress: Callable | None = None,
) -> ClipDataset:
    """Compute and cache byte pairs for every manifest entry.

    Missing clip directories are reported before any flow work starts.
    """
    root = Path(root)
    classes = [None] * (max(e.class_index for e in entries) + 1)
    for e in entries:
        classes[e.class_index] = e.label
        if not (root / e.path).is_dir():
            raise ValueError(f"clip directory missing: {root / e.path}")
    train_by_class = [[] for _ in classes]
    test_clips = []
    for i, e in enumerate(entries):
        frames = read_clip_frames(root / e.path)
        pairs = pairs_from_frames(frames, tvl1_params, mos_params, mode)
        clip = Clip(e.path, e.class_index, pairs)
        if e.split == "train":
            train_by_class[e.class_index].append(clip)
        else:
            test_clips.append(clip)
        if progress is not None:
            progress(i + 1, len(entries))
    return ClipDataset(classes, train_by_class, test_clips)


@dataclass(frozen=True)
class TrainPipeline:
    """Randomized volume construction used by the training loop."""

    stack: StackSpec = field(default_factory=StackSpec)
    scales: ScaleSet = field(default_factory=ScaleSet)
    out_side: int = 56
    volume_transform: Callable | None = None

    def make_volume(self, clip: Clip, rng: Rng) -> np.ndarray:
        start = sample_train_start(len(clip.pairs), self.stack.stack_length, rng)
        vol = stack_volume(clip.pairs, start, self.stack)
        if self.volume_transform is not None:
            vol = self.volume_transform(vol)
        h, w = vol.shape[1:]
        crop = random_multiscale_crop(w, h, self.scales, rng, self.out_side)
        return apply_crop(vol, crop)


def zero_magnitude_channels(volume: np.ndarray) -> np.ndarray:
    """Ablation transform: blank the magnitude channels (even indices)."""
    out = volume.copy()
    out[0::2] = 0.0
    return out
