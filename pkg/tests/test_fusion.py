import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridfuse.core import GazeSample, StimulusEvent, TrialBundle, default_layout
from hybridfuse.eeg import GnbModel, train_gnb
from hybridfuse.fusion import (FusionConfig, FusionDecision,
                               LengthMismatchError, TrialResult,
                               classify_trial, fuse)
from hybridfuse.gaze import EmptyTrialError
from hybridfuse.simulate import SimConfig, synth_trial, unit_direction

score_vec = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    min_size=2, max_size=9)


def _cfg(**kw):
    return FusionConfig(**kw)


class TestFuse:
    def test_hand_traced_fallback_walk(self):
        d = fuse([0.6, 0.3, 0.1], [0.2, 0.9, 0.0], _cfg(threshold=0.85))
        assert d.chosen_aoi == 2
        assert d.mode == "fused"
        assert d.rank_inspected == 2

    def test_zero_threshold_is_pure_argmax(self):
        d = fuse([0.1, 0.7, 0.2], [0.0, 0.0, 0.0], _cfg(threshold=0.0))
        assert d.chosen_aoi == 2 and d.mode == "fused" and d.rank_inspected == 1

    @given(score_vec, score_vec)
    def test_zero_threshold_argmax_property(self, c_eeg, c_et):
        if len(c_eeg) != len(c_et):
            c_et = (c_et * len(c_eeg))[:len(c_eeg)]
        d = fuse(c_eeg, c_et, _cfg(threshold=0.0))
        best = min(range(len(c_eeg)), key=lambda i: (-c_eeg[i], i))
        assert d.chosen_aoi == best + 1
        assert d.mode == "fused"
        assert d.rank_inspected == 1

    def test_no_qualifier_falls_back_to_argmax(self):
        d = fuse([0.6, 0.3, 0.1], [0.1, 0.1, 0.1], _cfg(threshold=0.85))
        assert d.chosen_aoi == 1
        assert d.mode == "fallback-eeg"
        assert d.rank_inspected == 3

    def test_no_qualifier_reject_policy(self):
        d = fuse([0.6, 0.3, 0.1], [0.1, 0.1, 0.1],
                 _cfg(threshold=0.85, fallback_policy="reject"))
        assert d.chosen_aoi is None
        assert d.mode == "rejected"
        assert d.rank_inspected == 3

    def test_threshold_at_exact_score_passes(self):
        # Gate is >=, not >.
        d = fuse([0.9, 0.1], [0.85, 0.0], _cfg(threshold=0.85))
        assert d.chosen_aoi == 1 and d.mode == "fused"

    def test_eeg_ties_broken_by_lower_id(self):
        d = fuse([0.3, 0.9, 0.9], [1.0, 1.0, 1.0], _cfg())
        assert d.chosen_aoi == 2 and d.rank_inspected == 1
        d2 = fuse([0.5, 0.5, 0.5, 0.5], [0.0, 0.0, 0.9, 0.9], _cfg())
        assert d2.chosen_aoi == 3 and d2.rank_inspected == 3

    def test_deterministic_repeats(self):
        args = ([0.4, 0.4, 0.2], [0.9, 0.9, 0.9], _cfg())
        a, b = fuse(*args), fuse(*args)
        assert (a.chosen_aoi, a.mode, a.rank_inspected) == \
               (b.chosen_aoi, b.mode, b.rank_inspected)

    def test_length_mismatch_and_small_k(self):
        with pytest.raises(LengthMismatchError):
            fuse([0.5, 0.5], [0.5], _cfg())
        with pytest.raises(LengthMismatchError):
            fuse([1.0], [1.0], _cfg())
        with pytest.raises(LengthMismatchError):
            fuse([], [], _cfg())

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            fuse([np.nan, 0.1], [0.0, 0.0], _cfg())
        with pytest.raises(ValueError):
            fuse([0.5, 0.1], [np.inf, 0.0], _cfg())

    def test_vectors_attached_and_read_only(self):
        d = fuse([0.6, 0.4], [1.0, 0.0], _cfg())
        assert list(d.c_eeg) == [0.6, 0.4]
        assert list(d.c_et) == [1.0, 0.0]
        with pytest.raises(ValueError):
            d.c_et[0] = 0.5

    @given(score_vec)
    def test_rank_monotone_in_threshold(self, c_et):
        rng = np.random.default_rng(0)
        c_eeg = rng.random(len(c_et))
        ranks = [fuse(c_eeg, c_et, _cfg(threshold=t)).rank_inspected
                 for t in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert ranks == sorted(ranks)

    @given(score_vec)
    def test_fused_mode_satisfies_gate(self, c_et):
        rng = np.random.default_rng(1)
        c_eeg = rng.random(len(c_et))
        d = fuse(c_eeg, c_et, _cfg(threshold=0.6))
        if d.mode == "fused":
            assert d.c_et[d.chosen_aoi - 1] >= 0.6
        else:
            assert max(c_et) < 0.6

    def test_rank_order_transform_invariance(self):
        # Exact power-of-two scalings preserve both order and ties exactly.
        rng = np.random.default_rng(2)
        for _ in range(25):
            c_eeg = rng.random(6)
            c_et = rng.random(6)
            cfg = _cfg(threshold=0.5)
            base = fuse(c_eeg, c_et, cfg)
            for scale in (0.5, 4.0, 0.03125):
                d = fuse(c_eeg * scale, c_et, cfg)
                assert (d.chosen_aoi, d.mode, d.rank_inspected) == \
                       (base.chosen_aoi, base.mode, base.rank_inspected)

    def test_sigmoid_transform_invariance_on_coarse_grid(self):
        rng = np.random.default_rng(3)
        grid = rng.integers(0, 65, size=7) / 64.0
        c_et = rng.random(7)
        cfg = _cfg(threshold=0.7)
        base = fuse(grid, c_et, cfg)
        squashed = 1.0 / (1.0 + np.exp(-grid))
        d = fuse(squashed, c_et, cfg)
        assert (d.chosen_aoi, d.mode, d.rank_inspected) == \
               (base.chosen_aoi, base.mode, base.rank_inspected)

    def test_threshold_above_all_et_equals_pure_bci(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            c_eeg = rng.random(5)
            c_et = rng.random(5) * 0.8
            d = fuse(c_eeg, c_et, _cfg(threshold=0.9))
            assert d.mode == "fallback-eeg"
            assert d.chosen_aoi == int(np.argmax(c_eeg)) + 1
            assert d.rank_inspected == 5

    def test_bad_config_values(self):
        with pytest.raises(ValueError):
            FusionConfig(threshold=1.01)
        with pytest.raises(ValueError):
            FusionConfig(threshold=-0.1)
        with pytest.raises(ValueError):
            FusionConfig(eeg_mode="odds")
        with pytest.raises(ValueError):
            FusionConfig(fallback_policy="retry")


def _trained_model(rng, d=6.0, dim=16, n=200):
    u = unit_direction(dim)
    X = np.vstack([(d / 2.0) * u + rng.standard_normal((n, dim)),
                   -(d / 2.0) * u + rng.standard_normal((n, dim))])
    y = np.array([True] * n + [False] * n)
    return train_gnb(X, y, standardize=True)


def _hand_bundle(layout, gaze_aoi, eeg_aoi, model_dim=2):
    """One flash per AOI; features put the EEG argmax on eeg_aoi, all gaze
    samples inside gaze_aoi."""
    events, rows = [], []
    for i, a in enumerate(layout.aois):
        events.append(StimulusEvent(t_us=1000 + 100 * i, trial=1, aoi_id=a.id))
        rows.append([5.0, 5.0] if a.id == eeg_aoi else [0.0, 0.0])
    cx, cy = layout.aoi_by_id(gaze_aoi).center
    gaze = [GazeSample(t_us=10 + t, left=(cx, cy)) for t in range(20)]
    return TrialBundle(trial=1, window_us=(0, 10_000), gaze=gaze,
                       events=tuple(events), features=np.array(rows))


class TestClassifyTrial:
    def test_separable_end_to_end(self):
        rng = np.random.default_rng(21)
        cfg = SimConfig(eeg_separation=6.0, gaze_on_target_p=1.0)
        layout = default_layout()
        model = _trained_model(rng, d=6.0, dim=cfg.feature_dim)
        for target in (1, 4, 7):
            bundle = synth_trial(target, cfg, layout, rng)
            d = classify_trial(bundle, model, layout)
            assert d.mode == "fused"
            assert d.chosen_aoi == target

    def test_gaze_gate_skips_unsupported_eeg_argmax(self):
        layout = default_layout()
        model = GnbModel(prior_target=0.5, prior_nontarget=0.5,
                         mean_target=np.array([5.0, 5.0]),
                         mean_nontarget=np.array([0.0, 0.0]),
                         var_target=np.array([1.0, 1.0]),
                         var_nontarget=np.array([1.0, 1.0]))
        bundle = _hand_bundle(layout, gaze_aoi=3, eeg_aoi=5)
        d = classify_trial(bundle, model, layout)
        assert d.c_et[4] == 0.0            # no gaze support at the EEG argmax
        assert np.argmax(d.c_eeg) == 4
        assert d.chosen_aoi == 3
        assert d.mode == "fused"
        assert d.rank_inspected > 1

    def test_empty_gaze_propagates(self):
        layout = default_layout()
        model = GnbModel(prior_target=0.5, prior_nontarget=0.5,
                         mean_target=np.array([1.0, 1.0]),
                         mean_nontarget=np.array([0.0, 0.0]),
                         var_target=np.array([1.0, 1.0]),
                         var_nontarget=np.array([1.0, 1.0]))
        events = tuple(StimulusEvent(t_us=1000 + 100 * i, trial=1, aoi_id=a.id)
                       for i, a in enumerate(layout.aois))
        bundle = TrialBundle(trial=1, window_us=(0, 10_000), gaze=[],
                             events=events, features=np.zeros((7, 2)))
        with pytest.raises(EmptyTrialError):
            classify_trial(bundle, model, layout)

    def test_literal_eeg_mode_flows_through(self):
        layout = default_layout()
        model = GnbModel(prior_target=0.5, prior_nontarget=0.5,
                         mean_target=np.array([5.0, 5.0]),
                         mean_nontarget=np.array([0.0, 0.0]),
                         var_target=np.array([1.0, 1.0]),
                         var_nontarget=np.array([1.0, 1.0]))
        bundle = _hand_bundle(layout, gaze_aoi=5, eeg_aoi=5)
        d = classify_trial(bundle, model, layout, FusionConfig(eeg_mode="literal"))
        assert np.all(d.c_eeg <= 0.5)
        assert d.chosen_aoi == 5


class TestTrialResult:
    def test_correct_flag(self):
        d = fuse([0.9, 0.1], [1.0, 0.0], _cfg())
        assert TrialResult(trial=1, truth=1, decision=d).correct is True
        assert TrialResult(trial=1, truth=2, decision=d).correct is False
        assert TrialResult(trial=1, truth=None, decision=d).correct is None

    def test_rejected_never_correct(self):
        d = fuse([0.9, 0.1], [0.0, 0.0], _cfg(fallback_policy="reject"))
        assert TrialResult(trial=1, truth=1, decision=d).correct is False
