#!/usr/bin/env python3
"""Selection ablation: level-1 accuracy with top-k/top-q selection versus
plain whole-video mean pooling (k = d, q = T), on the distractor-laden
fg_basic scenario, averaged over seeds.

Usage: python scripts/selection_ablation.py [n_seeds]
"""

import sys

import numpy as np

from storyline import SLOTS
from storyline.dataset_io import most_common_word
from storyline.linear_svm import TrainConfig, predict
from storyline.saliency import foreground_descriptor
from storyline.story_hierarchy import StoryConfig, TrainSet, train_level1
from storyline.synthgen import generate, preset


def l1_accuracy(ds, k, q, seed):
    tr = TrainSet(sequences=tuple(ds.train_sequences()),
                  annotations=ds.annotations, vocabs=ds.vocabs)
    banks = train_level1(tr, StoryConfig(k=k, q=q, c=2, svm=TrainConfig(seed=seed)))
    test = ds.test_sequences()
    per_slot = {}
    for col, slot in enumerate(SLOTS):
        hits = 0
        for seq in test:
            fg = foreground_descriptor(seq, k, q).values
            word = ds.vocabs[slot].word_at(predict(banks[slot], fg))
            hits += word == most_common_word(ds.annotations[seq.video_id], slot)
        per_slot[slot] = hits / len(test)
    return per_slot


def main():
    n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    gaps = []
    for seed in range(n_seeds):
        cfg = preset("fg_basic", seed=seed)
        ds = generate(cfg)
        selected = l1_accuracy(ds, k=20, q=10, seed=seed)
        full = l1_accuracy(ds, k=cfg.d, q=10 ** 9, seed=seed)
        mean_sel = np.mean(list(selected.values()))
        mean_full = np.mean(list(full.values()))
        gaps.append(mean_sel - mean_full)
        print(f"seed {seed}: selected={mean_sel:.3f} full-mean={mean_full:.3f} "
              f"gain={mean_sel - mean_full:+.3f}")
    print(f"\nmean gain of selection over whole-video pooling: {np.mean(gaps):+.3f}")


if __name__ == "__main__":
    main()
