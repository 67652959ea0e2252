"""Unsupervised selection of salient features and frames, and the foreground /
foreground-background descriptors built from them.

Everything here is a pure function of the input matrix; per-video descriptor
computation is safe to parallelize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_io import FeatureSequence

L1_FG = "L1_FG"
L2_FG_BG = "L2_FG_BG"
L3_CTX = "L3_CTX"
L3_TEMP = "L3_TEMP"

LEVEL_TAGS = (L1_FG, L2_FG_BG, L3_CTX, L3_TEMP)


@dataclass(frozen=True)
class Descriptor:
    values: np.ndarray
    level_tag: str

    def __post_init__(self):
        if self.level_tag not in LEVEL_TAGS:
            raise ValueError(f"unknown level tag {self.level_tag!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("descriptor contains non-finite values")


@dataclass(frozen=True)
class SelectionResult:
    top_features: np.ndarray  # decreasing-saliency order
    top_frames: np.ndarray    # ascending frame order
    feature_saliency: np.ndarray
    frame_saliency: np.ndarray


def feature_saliency(seq: FeatureSequence) -> np.ndarray:
    """Per-feature mean activation over the whole video."""
    return seq.features.mean(axis=0)


def select_top_features(saliency: np.ndarray, k: int) -> np.ndarray:
    """Indices of the min(k, d) largest saliency values, strongest first.

    Ties break toward the lower index (stable sort on the negated values).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    order = np.argsort(-saliency, kind="stable")
    return order[: min(k, saliency.shape[0])]


def frame_saliency(seq: FeatureSequence, top_features: np.ndarray) -> np.ndarray:
    """Per-frame mean over the selected features."""
    top_features = np.asarray(top_features)
    if top_features.size == 0:
        raise ValueError("top_features must be non-empty")
    return seq.features[:, top_features].mean(axis=1)


def select_top_frames(frame_sal: np.ndarray, q: int) -> np.ndarray:
    """Indices of the min(q, T) most salient frames, in temporal order.

    Ties break toward the earlier frame.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    order = np.argsort(-frame_sal, kind="stable")
    chosen = order[: min(q, frame_sal.shape[0])]
    return np.sort(chosen)


def run_selection(seq: FeatureSequence, k: int, q: int) -> SelectionResult:
    """Full two-step selection: top-k features by video mean, then top-q frames
    by mean of those features."""
    fsal = feature_saliency(seq)
    feats = select_top_features(fsal, k)
    frsal = frame_saliency(seq, feats)
    frames = select_top_frames(frsal, q)
    return SelectionResult(top_features=feats, top_frames=frames,
                           feature_saliency=fsal, frame_saliency=frsal)


def foreground_descriptor(seq: FeatureSequence, k: int, q: int,
                          selection: SelectionResult | None = None) -> Descriptor:
    """Mean of the selected features over the selected frames; zero elsewhere."""
    if selection is None:
        selection = run_selection(seq, k, q)
    out = np.zeros(seq.dim)
    sub = seq.features[np.ix_(selection.top_frames, selection.top_features)]
    out[selection.top_features] = sub.mean(axis=0)
    return Descriptor(values=out, level_tag=L1_FG)


def background_descriptor(seq: FeatureSequence, selected_frames: np.ndarray) -> np.ndarray:
    """All-feature mean over the frames NOT selected; zero vector if none remain."""
    mask = np.ones(seq.n_frames, dtype=bool)
    mask[np.asarray(selected_frames, dtype=int)] = False
    if not mask.any():
        return np.zeros(seq.dim)
    return seq.features[mask].mean(axis=0)


def fg_bg_descriptor(seq: FeatureSequence, k: int, q: int) -> Descriptor:
    """Foreground descriptor concatenated with the background mean, length 2d."""
    selection = run_selection(seq, k, q)
    fg = foreground_descriptor(seq, k, q, selection=selection)
    bg = background_descriptor(seq, selection.top_frames)
    return Descriptor(values=np.concatenate([fg.values, bg]), level_tag=L2_FG_BG)
