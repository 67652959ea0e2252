"""The three-level classifier stack: L1 on foreground descriptors, L2 on
foreground-background descriptors, and L3 on sparse context descriptors built
from the top L2 responses, optionally split over three overlapping temporal
parts of the video.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import SLOTS
from .dataset_io import (AnnotationSet, DataError, FeatureSequence, Vocabulary,
                         load_vocabulary, most_common_word, save_vocabulary)
from .linear_svm import (ClassifierBank, TrainConfig, decision_values,
                         load_bank, predict, save_bank, train_ovr)
from .parallel import parallel_map
from .saliency import (L1_FG, L2_FG_BG, L3_CTX, L3_TEMP, Descriptor,
                       background_descriptor, fg_bg_descriptor,
                       foreground_descriptor, run_selection)

log = logging.getLogger(__name__)

LEVELS = ("l1", "l2", "l3")


@dataclass(frozen=True)
class StoryConfig:
    k: int = 60
    q: int = 50
    c: int = 5
    temporal: bool = False
    svm: TrainConfig = field(default_factory=TrainConfig)
    # local: re-run top-k/top-q inside each temporal part; global: restrict the
    # whole-video selection to the part's frames
    segment_selection: str = "local"
    # experiment flags: append the raw L2 descriptor to the context descriptor,
    # and/or squash L2 margins before they become L3 inputs
    append_l2_descriptor: bool = False
    response_transform: str = "raw"

    def __post_init__(self):
        if min(self.k, self.q, self.c) < 1:
            raise ValueError("k, q and c must all be >= 1")
        if self.segment_selection not in ("local", "global"):
            raise ValueError(f"unknown segment_selection {self.segment_selection!r}")
        if self.response_transform not in ("raw", "tanh"):
            raise ValueError(f"unknown response_transform {self.response_transform!r}")


@dataclass(frozen=True)
class TemporalSegments:
    """Three half-overlapping frame ranges covering [0, T)."""

    ranges: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]


def temporal_segments(n_frames: int) -> TemporalSegments:
    """Split a T-frame video into first/middle/last overlapping parts.

    Parts have length ceil(T/2) and start at 0, floor(T/4) and T-ceil(T/2);
    degenerate clips (T < 3) use the whole range three times.
    """
    if n_frames < 1:
        raise ValueError(f"need at least one frame, got {n_frames}")
    if n_frames < 3:
        whole = (0, n_frames)
        return TemporalSegments(ranges=(whole, whole, whole))
    half = math.ceil(n_frames / 2)
    quarter = n_frames // 4
    return TemporalSegments(ranges=(
        (0, half),
        (quarter, min(quarter + half, n_frames)),
        (n_frames - half, n_frames),
    ))


@dataclass(frozen=True)
class TrainSet:
    sequences: tuple[FeatureSequence, ...]
    annotations: dict[str, AnnotationSet]
    vocabs: dict[str, Vocabulary]

    def labels(self, slot: str) -> np.ndarray:
        vocab = self.vocabs[slot]
        out = []
        for seq in self.sequences:
            ann = self.annotations.get(seq.video_id)
            if ann is None:
                raise DataError(f"video {seq.video_id!r} has no annotations")
            out.append(vocab.lookup(most_common_word(ann, slot)))
        return np.array(out, dtype=int)


@dataclass
class StoryModel:
    config: StoryConfig
    d: int
    vocabs: dict[str, Vocabulary]
    banks: dict[tuple[str, str], ClassifierBank] = field(default_factory=dict)

    def bank(self, level: str, slot: str) -> ClassifierBank:
        try:
            return self.banks[(level, slot)]
        except KeyError:
            raise DataError(f"level {level} {slot} bank is not trained") from None

    @property
    def context_tag(self) -> str:
        return L3_TEMP if self.config.temporal else L3_CTX


def _train_slot_banks(X: np.ndarray, train_set: TrainSet, cfg: StoryConfig,
                      level_tag: str, threads: int) -> dict[str, ClassifierBank]:
    banks = {}
    for slot in SLOTS:
        banks[slot] = train_ovr(X, train_set.labels(slot), train_set.vocabs[slot],
                                cfg.svm, level_tag=level_tag, threads=threads)
    return banks


def _descriptor_matrix(descs: list[Descriptor]) -> np.ndarray:
    return np.stack([d.values for d in descs])


def train_level1(train_set: TrainSet, cfg: StoryConfig,
                 threads: int = 1) -> dict[str, ClassifierBank]:
    """Per-slot one-vs-rest banks over foreground descriptors."""
    if not train_set.sequences:
        raise DataError("empty train split")
    descs = parallel_map(
        lambda s: foreground_descriptor(s, cfg.k, cfg.q), train_set.sequences,
        threads=threads)
    return _train_slot_banks(_descriptor_matrix(descs), train_set, cfg, L1_FG, threads)


def train_level2(train_set: TrainSet, cfg: StoryConfig,
                 threads: int = 1) -> dict[str, ClassifierBank]:
    """Per-slot banks over foreground-background descriptors."""
    if not train_set.sequences:
        raise DataError("empty train split")
    descs = parallel_map(
        lambda s: fg_bg_descriptor(s, cfg.k, cfg.q), train_set.sequences,
        threads=threads)
    return _train_slot_banks(_descriptor_matrix(descs), train_set, cfg, L2_FG_BG, threads)


def _top_c_block(scores: np.ndarray, c: int) -> np.ndarray:
    """Keep the c largest responses at their class positions, zero the rest."""
    keep = np.argsort(-scores, kind="stable")[: min(c, scores.shape[0])]
    out = np.zeros_like(scores)
    out[keep] = scores[keep]
    return out


def _segment_fg_bg(seq: FeatureSequence, start: int, end: int,
                   cfg: StoryConfig) -> Descriptor:
    part = FeatureSequence(video_id=seq.video_id, features=seq.features[start:end])
    if cfg.segment_selection == "local":
        return fg_bg_descriptor(part, cfg.k, cfg.q)
    # global: restrict the whole-video selection to this part's frames
    selection = run_selection(seq, cfg.k, cfg.q)
    inside = selection.top_frames[(selection.top_frames >= start)
                                  & (selection.top_frames < end)] - start
    fg = np.zeros(seq.dim)
    if inside.size:
        sub = part.features[np.ix_(inside, selection.top_features)]
        fg[selection.top_features] = sub.mean(axis=0)
    bg = background_descriptor(part, inside)
    return Descriptor(values=np.concatenate([fg, bg]), level_tag=L2_FG_BG)


def build_context_descriptor(l2_banks: dict[str, ClassifierBank],
                             seq: FeatureSequence, cfg: StoryConfig) -> Descriptor:
    """Sparse vector of top-c L2 responses per slot: one S|V|O block group for
    the whole video, or three groups for the overlapping temporal parts."""
    for slot in SLOTS:
        if slot not in l2_banks:
            raise DataError(f"level l2 {slot} bank is not trained")

    def blocks_for(desc: Descriptor) -> list[np.ndarray]:
        out = []
        for slot in SLOTS:
            scores = decision_values(l2_banks[slot], desc.values)
            if cfg.response_transform == "tanh":
                scores = np.tanh(scores)
            out.append(_top_c_block(scores, cfg.c))
        return out

    if not cfg.temporal:
        full = fg_bg_descriptor(seq, cfg.k, cfg.q)
        parts = blocks_for(full)
        if cfg.append_l2_descriptor:
            parts.append(full.values)
        return Descriptor(values=np.concatenate(parts), level_tag=L3_CTX)

    parts = []
    for start, end in temporal_segments(seq.n_frames).ranges:
        seg_desc = _segment_fg_bg(seq, start, end, cfg)
        parts.extend(blocks_for(seg_desc))
        if cfg.append_l2_descriptor:
            parts.append(seg_desc.values)
    return Descriptor(values=np.concatenate(parts), level_tag=L3_TEMP)


def train_level3(train_set: TrainSet, l2_banks: dict[str, ClassifierBank],
                 cfg: StoryConfig, threads: int = 1) -> dict[str, ClassifierBank]:
    """Per-slot banks over context descriptors derived from the L2 outputs."""
    tag = L3_TEMP if cfg.temporal else L3_CTX
    descs = parallel_map(
        lambda s: build_context_descriptor(l2_banks, s, cfg), train_set.sequences,
        threads=threads)
    return _train_slot_banks(_descriptor_matrix(descs), train_set, cfg, tag, threads)


def effective_c(c: int, vocabs: dict[str, Vocabulary]) -> int:
    cap = min(len(vocabs[s]) for s in SLOTS)
    if c > cap:
        log.info("capping c=%d to the smallest vocabulary size %d", c, cap)
        return cap
    return c


def train_story(train_set: TrainSet, cfg: StoryConfig,
                threads: int = 1) -> tuple[StoryModel, dict]:
    """Train L1, then L2, then L3; returns the model and per-level per-slot
    training accuracies for the log."""
    if not train_set.sequences:
        raise DataError("empty train split")
    cfg = StoryConfig(**{**asdict_config(cfg), "c": effective_c(cfg.c, train_set.vocabs)})
    d = train_set.sequences[0].dim
    model = StoryModel(config=cfg, d=d, vocabs=dict(train_set.vocabs))
    accuracies: dict[str, dict[str, float]] = {}

    builders = {
        "l1": lambda: train_level1(train_set, cfg, threads),
        "l2": lambda: train_level2(train_set, cfg, threads),
        "l3": lambda: train_level3(
            train_set, {s: model.bank("l2", s) for s in SLOTS}, cfg, threads),
    }
    for level in LEVELS:
        banks = builders[level]()
        for slot in SLOTS:
            model.banks[(level, slot)] = banks[slot]
        accuracies[level] = _training_accuracy(model, train_set, level, threads)
        log.info("level %s train accuracy: %s", level, accuracies[level])
    return model, accuracies


def asdict_config(cfg: StoryConfig) -> dict:
    return {
        "k": cfg.k, "q": cfg.q, "c": cfg.c, "temporal": cfg.temporal,
        "svm": cfg.svm, "segment_selection": cfg.segment_selection,
        "append_l2_descriptor": cfg.append_l2_descriptor,
        "response_transform": cfg.response_transform,
    }


def _descriptor_for_level(model: StoryModel, seq: FeatureSequence, level: str) -> np.ndarray:
    cfg = model.config
    if level == "l1":
        return foreground_descriptor(seq, cfg.k, cfg.q).values
    if level == "l2":
        return fg_bg_descriptor(seq, cfg.k, cfg.q).values
    if level == "l3":
        l2_banks = {s: model.bank("l2", s) for s in SLOTS}
        return build_context_descriptor(l2_banks, seq, cfg).values
    raise DataError(f"unknown level {level!r}")


def predict_svo(model: StoryModel, seq: FeatureSequence,
                level: str = "l3") -> tuple[str, str, str]:
    """Per-slot argmax prediction at the requested level."""
    desc = _descriptor_for_level(model, seq, level)
    words = []
    for slot in SLOTS:
        bank = model.bank(level, slot)
        words.append(model.vocabs[slot].word_at(predict(bank, desc)))
    return tuple(words)


def _training_accuracy(model: StoryModel, train_set: TrainSet, level: str,
                       threads: int = 1) -> dict[str, float]:
    preds = parallel_map(lambda s: predict_svo(model, s, level),
                         train_set.sequences, threads=threads)
    acc = {}
    for col, slot in enumerate(SLOTS):
        labels = train_set.labels(slot)
        vocab = train_set.vocabs[slot]
        hits = sum(1 for p, li in zip(preds, labels) if p[col] == vocab.word_at(li))
        acc[slot] = hits / len(preds)
    return acc


def save_story_model(model: StoryModel, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = model.config
    vocab_files = {slot: f"vocab_{slot}.txt" for slot in SLOTS}
    for slot in SLOTS:
        save_vocabulary(model.vocabs[slot], out_dir / vocab_files[slot])
    config = {
        "k": cfg.k, "q": cfg.q, "c": cfg.c, "temporal": cfg.temporal,
        "C": cfg.svm.C, "tol": cfg.svm.tol, "max_iter": cfg.svm.max_iter,
        "seed": cfg.svm.seed, "d": model.d,
        "segment_selection": cfg.segment_selection,
        "append_l2_descriptor": cfg.append_l2_descriptor,
        "response_transform": cfg.response_transform,
        "vocab_files": vocab_files,
    }
    with open(out_dir / "config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for (level, slot), bank in sorted(model.banks.items()):
        save_bank(bank, out_dir / f"bank_{level}_{slot}.bin")


def load_story_model(model_dir) -> StoryModel:
    model_dir = Path(model_dir)
    try:
        with open(model_dir / "config.json") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"no story model at {model_dir}") from None
    cfg = StoryConfig(
        k=raw["k"], q=raw["q"], c=raw["c"], temporal=raw["temporal"],
        svm=TrainConfig(C=raw["C"], tol=raw["tol"], max_iter=raw["max_iter"],
                        seed=raw["seed"]),
        segment_selection=raw["segment_selection"],
        append_l2_descriptor=raw["append_l2_descriptor"],
        response_transform=raw["response_transform"],
    )
    vocabs = {slot: load_vocabulary(model_dir / fname, slot)
              for slot, fname in raw["vocab_files"].items()}
    model = StoryModel(config=cfg, d=raw["d"], vocabs=vocabs)
    for level in LEVELS:
        for slot in SLOTS:
            path = model_dir / f"bank_{level}_{slot}.bin"
            if path.exists():
                model.banks[(level, slot)] = load_bank(path)
    return model
