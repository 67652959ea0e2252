"""Frame sampling and batch extraction over a list of videos."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from . import ExtractionError
from .backbone import TorchBackbone
from .formats import write_features, write_manifest

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractConfig:
    videos: tuple[str, ...]
    out_dir: str
    fps: float = 1.0              # sampling rate, frames per second of video time
    arch: str = "alexnet"
    layer: str = "classifier.6"   # 1000-wide logits layer
    weights: str = "none"         # checkpoint path, or "none" for seeded init
    d: int = 1000                 # must equal the layer width
    split: str = "test"
    csv: bool = False
    seed: int = 0
    input_size: int = 224

    def __post_init__(self):
        if self.fps <= 0:
            raise ExtractionError(f"sampling rate must be positive, got {self.fps}")
        if not self.videos:
            raise ExtractionError("no input videos")
        if self.split not in ("train", "test"):
            raise ExtractionError(f"split must be train or test, got {self.split!r}")


@dataclass
class ExtractResult:
    written: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)


def sample_frame_indices(frame_count: int, native_fps: float, target_fps: float) -> list[int]:
    """Indices at times k/target_fps for k = 0.. while inside the clip.

    Yields ceil(frame_count * target_fps / native_fps) frames: a 10 s clip
    sampled at 2 fps gives 20 rows.
    """
    if frame_count < 1 or native_fps <= 0:
        return []
    step = native_fps / target_fps
    count = math.ceil(frame_count / step)
    return [min(round(i * step), frame_count - 1) for i in range(count)]


def read_frames(path, target_fps: float, size: int) -> np.ndarray | None:
    """Decode the sampled frames of one video as N x size x size x 3 RGB."""
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        return None
    try:
        frame_count = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        native_fps = float(cap.get(cv2.CAP_PROP_FPS))
        wanted = sample_frame_indices(frame_count, native_fps, target_fps)
        if not wanted:
            return None
        needed = set(wanted)
        grabbed = {}
        pos = 0
        while pos <= max(needed):
            ok, frame = cap.read()
            if not ok:
                break
            if pos in needed:
                rgb = cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
                grabbed[pos] = cv2.resize(rgb, (size, size), interpolation=cv2.INTER_AREA)
            pos += 1
        if not grabbed:
            return None
        # containers sometimes report more frames than decode; repeat the last
        # decoded frame rather than shortening the clip
        last = next(iter(grabbed.values()))
        frames = []
        for p in wanted:
            last = grabbed.get(p, last)
            frames.append(last)
        return np.stack(frames)
    finally:
        cap.release()


def extract(cfg: ExtractConfig) -> ExtractResult:
    """Write one canonical feature file per readable video, plus manifest
    lines and an extraction metadata record.

    Unreadable videos are skipped with a warning and listed in the summary;
    a layer narrower or wider than cfg.d is an error.
    """
    out_dir = Path(cfg.out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    backbone = TorchBackbone(arch=cfg.arch, layer=cfg.layer, weights=cfg.weights,
                             seed=cfg.seed, input_size=cfg.input_size)
    if backbone.width != cfg.d:
        raise ExtractionError(
            f"layer {cfg.layer!r} of {cfg.arch} is {backbone.width}-wide, "
            f"config declares d={cfg.d}")

    result = ExtractResult()
    entries = []
    for video in cfg.videos:
        video_path = Path(video)
        frames = read_frames(video_path, cfg.fps, cfg.input_size)
        if frames is None:
            log.warning("skipping unreadable video %s", video_path)
            result.skipped.append((str(video_path), "unreadable"))
            continue
        matrix = backbone.embed(frames)
        suffix = ".csv" if cfg.csv else ".bin"
        rel = f"features/{video_path.stem}{suffix}"
        write_features(matrix, out_dir / rel)
        entries.append({"video_id": video_path.stem, "split": cfg.split,
                        "features": rel})
        result.written.append(rel)
    write_manifest(entries, cfg.d, out_dir / "manifest.jsonl")
    meta = {
        "arch": cfg.arch, "layer": cfg.layer, "weights": cfg.weights,
        "fps": cfg.fps, "d": cfg.d, "seed": cfg.seed,
        "rectification": "negative activations clamped at zero",
        "written": result.written,
        "skipped": [{"video": v, "reason": r} for v, r in result.skipped],
    }
    with open(out_dir / "extraction_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result
