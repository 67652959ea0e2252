import filecmp

import numpy as np
import pytest

from storyline import SLOTS
from storyline.dataset_io import most_common_word
from storyline.saliency import foreground_descriptor, run_selection
from storyline.synthgen import (SynthConfig, anchor_block,
                                class_feature_block, generate, preset,
                                suggested_story_params, write_dataset)

from oracles import nearest_centroid_accuracy


class TestDeterminism:
    def test_generation_is_pure(self):
        cfg = preset("fg_basic", seed=11, n_videos=12)
        a, b = generate(cfg), generate(cfg)
        assert a.truth == b.truth
        for vid in a.sequences:
            assert a.sequences[vid].features.tobytes() == b.sequences[vid].features.tobytes()
            assert a.annotations[vid].triplets == b.annotations[vid].triplets

    def test_written_files_byte_identical(self, tmp_path):
        cfg = preset("ctx_verb", seed=7, n_videos=10)
        write_dataset(generate(cfg), tmp_path / "one")
        write_dataset(generate(cfg), tmp_path / "two")
        cmp = filecmp.dircmp(tmp_path / "one", tmp_path / "two")
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
        sub = filecmp.dircmp(tmp_path / "one/features", tmp_path / "two/features")
        assert not sub.diff_files

    def test_different_seeds_differ(self):
        a = generate(preset("fg_basic", seed=1, n_videos=6))
        b = generate(preset("fg_basic", seed=2, n_videos=6))
        assert any(a.sequences[v].features.tobytes() != b.sequences[v].features.tobytes()
                   for v in a.sequences)


class TestScenarioStructure:
    def test_fg_basic_noise_free_peaks_on_planted_features(self):
        cfg = preset("fg_basic", seed=3, n_videos=10, sigma=0.0, clutter_amp=0.0)
        ds = generate(cfg)
        params = suggested_story_params("fg_basic")
        for vid, seq in list(ds.sequences.items())[:6]:
            desc = foreground_descriptor(seq, params["k"], params["q"]).values
            planted = np.concatenate([
                class_feature_block(cfg, slot, ds.vocabs[slot].lookup(word))
                for slot, word in zip(SLOTS, ds.truth[vid])])
            top9 = np.argsort(-desc, kind="stable")[:9]
            assert set(top9.tolist()) == set(planted.tolist())

    def test_noise_free_selection_recovers_window_exactly(self):
        cfg = preset("fg_basic", seed=9, n_videos=6, sigma=0.0, clutter_amp=0.0)
        ds = generate(cfg)
        params = suggested_story_params("fg_basic")
        for seq in ds.sequences.values():
            sel = run_selection(seq, params["k"], params["q"])
            window_frames = np.where(seq.features.max(axis=1) > cfg.mu / 2)[0]
            assert np.isin(sel.top_frames, window_frames).all()

    def test_ctx_verb_is_bijective_pair_map(self):
        cfg = preset("ctx_verb", seed=5, n_videos=60)
        ds = generate(cfg)
        assert cfg.n_verbs == cfg.n_subjects * cfg.n_objects
        pairs = {}
        for vid, (s, v, o) in ds.truth.items():
            pairs.setdefault((s, o), set()).add(v)
        for versions in pairs.values():
            assert len(versions) == 1
        assert len({next(iter(v)) for v in pairs.values()}) == len(pairs)

    def test_ctx_verb_own_features_stay_noise(self):
        cfg = preset("ctx_verb", seed=5, n_videos=10)
        ds = generate(cfg)
        for vid, seq in ds.sequences.items():
            v_idx = ds.vocabs["verb"].lookup(ds.truth[vid][1])
            block = class_feature_block(cfg, "verb", v_idx)
            assert seq.features[:, block].max() < cfg.mu  # clipped noise only

    def test_bg_verb_signal_only_outside_window(self):
        cfg = preset("bg_verb", seed=6, n_videos=10)
        ds = generate(cfg)
        for vid, seq in ds.sequences.items():
            s_idx = ds.vocabs["subject"].lookup(ds.truth[vid][0])
            v_idx = ds.vocabs["verb"].lookup(ds.truth[vid][1])
            window = seq.features[:, class_feature_block(cfg, "subject", s_idx)].mean(axis=1) > cfg.mu / 2
            verb_vals = seq.features[:, class_feature_block(cfg, "verb", v_idx)].mean(axis=1)
            assert verb_vals[window].max() < cfg.bg_amp / 2 + 3 * cfg.sigma
            assert verb_vals[~window].min() > cfg.bg_amp / 2

    def test_temporal_order_places_slots_in_thirds(self):
        cfg = preset("temporal_order", seed=8, n_videos=20)
        ds = generate(cfg)
        verbs = set()
        for vid, seq in ds.sequences.items():
            s_idx = ds.vocabs["subject"].lookup(ds.truth[vid][0])
            o_idx = ds.vocabs["object"].lookup(ds.truth[vid][1 + 1])
            t = seq.n_frames
            third = t // 3
            s_hot = seq.features[:, class_feature_block(cfg, "subject", s_idx)].mean(axis=1) > cfg.mu / 2
            o_hot = seq.features[:, class_feature_block(cfg, "object", o_idx)].mean(axis=1) > cfg.mu / 2
            verb = ds.truth[vid][1]
            verbs.add(verb)
            early, late = (s_hot, o_hot) if verb == "verb00" else (o_hot, s_hot)
            assert early[:third].all() and not early[third:].any()
            assert late[t - third:].all() and not late[:t - third].any()
        assert verbs == {"verb00", "verb01"}

    def test_anchor_only_in_ctx_verb_window(self):
        cfg = preset("ctx_verb", seed=2, n_videos=5)
        ds = generate(cfg)
        for seq in ds.sequences.values():
            vals = seq.features[:, anchor_block(cfg)].mean(axis=1)
            hot = vals > cfg.anchor_amp / 2
            assert cfg.window_frames <= hot.sum() <= cfg.window_frames + 4


class TestAnnotations:
    def test_first_annotator_reports_truth(self):
        ds = generate(preset("fg_basic", seed=4, n_videos=8,
                             n_annotators=4, annotator_noise=0.3))
        for vid, ann in ds.annotations.items():
            assert ann.triplets[0] == ds.truth[vid]
            assert len(ann.triplets) == 4
            for t in ann.triplets:
                for slot, w in zip(SLOTS, t):
                    assert w in ds.vocabs[slot].index

    def test_zero_noise_makes_most_common_the_truth(self):
        ds = generate(preset("fg_basic", seed=4, n_videos=8))
        for vid, ann in ds.annotations.items():
            for col, slot in enumerate(SLOTS):
                assert most_common_word(ann, slot) == ds.truth[vid][col]


class TestRecoverability:
    def test_nearest_centroid_oracle_on_fg_descriptors(self):
        # mu = 12 sigma in the preset; pipeline failures are pipeline bugs
        cfg = preset("fg_basic", seed=5)
        assert cfg.mu >= 5 * cfg.sigma
        ds = generate(cfg)
        params = suggested_story_params("fg_basic")
        train, test = ds.train_sequences(), ds.test_sequences()
        for col, slot in enumerate(SLOTS):
            vocab = ds.vocabs[slot]
            xtr = [foreground_descriptor(s, params["k"], params["q"]).values for s in train]
            xte = [foreground_descriptor(s, params["k"], params["q"]).values for s in test]
            ytr = [vocab.lookup(ds.truth[s.video_id][col]) for s in train]
            yte = [vocab.lookup(ds.truth[s.video_id][col]) for s in test]
            assert nearest_centroid_accuracy(xtr, ytr, xte, yte) >= 0.99


class TestConfigValidation:
    def test_scenario_constraints(self):
        with pytest.raises(ValueError):
            SynthConfig(scenario="nope")
        with pytest.raises(ValueError):
            SynthConfig(scenario="ctx_verb", n_subjects=3, n_verbs=5, n_objects=3)
        with pytest.raises(ValueError):
            SynthConfig(scenario="temporal_order", n_verbs=3)
        with pytest.raises(ValueError):
            SynthConfig(d=10)  # too small for the feature blocks
        with pytest.raises(ValueError):
            SynthConfig(t_range=(5, 60))  # shorter than the window
        with pytest.raises(ValueError):
            SynthConfig(mu=0.0)
        with pytest.raises(ValueError):
            SynthConfig(annotator_noise=1.0)

    def test_all_entries_non_negative_and_finite(self):
        for scenario in ("fg_basic", "bg_verb", "ctx_verb", "temporal_order"):
            ds = generate(preset(scenario, seed=1, n_videos=6))
            for seq in ds.sequences.values():
                assert np.isfinite(seq.features).all()
                assert (seq.features >= 0).all()
