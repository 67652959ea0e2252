#!/usr/bin/env python3
"""Train the full stack on a synthetic scenario and print the per-level
evaluation table (binary and WUP, most(any) layout).

Usage: python scripts/level_comparison.py [scenario] [seed]
"""

import sys

from storyline import SLOTS
from storyline.evaluation import evaluate, render_table
from storyline.linear_svm import TrainConfig
from storyline.story_hierarchy import (StoryConfig, TrainSet, predict_svo,
                                       train_story)
from storyline.synthgen import generate, preset, suggested_story_params


def main():
    scenario = sys.argv[1] if len(sys.argv) > 1 else "ctx_verb"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    temporal = scenario == "temporal_order"

    ds = generate(preset(scenario, seed=seed))
    params = suggested_story_params(scenario)
    cfg = StoryConfig(k=params["k"], q=params["q"], c=params["c"],
                      temporal=temporal, svm=TrainConfig(seed=seed))
    train_set = TrainSet(sequences=tuple(ds.train_sequences()),
                         annotations=ds.annotations, vocabs=ds.vocabs)
    print(f"training on {scenario} (seed {seed}, k={cfg.k}, q={cfg.q}, c={cfg.c}, "
          f"temporal={temporal}) ...")
    model, train_acc = train_story(train_set, cfg)
    for level in ("l1", "l2", "l3"):
        print(f"  train {level}: " +
              " ".join(f"{s}={train_acc[level][s]:.3f}" for s in SLOTS))

    test = ds.test_sequences()
    labels = {"l1": "L1 - FG", "l2": "L2 - FG-BG",
              "l3": "L3 - Temp." if temporal else "L3 - FG-BG"}
    rows = []
    for level in ("l1", "l2", "l3"):
        preds = {s.video_id: predict_svo(model, s, level) for s in test}
        rows.append((labels[level], evaluate(preds, ds.annotations, ds.taxonomy)))
    print()
    print(render_table(rows))


if __name__ == "__main__":
    main()
