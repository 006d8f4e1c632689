import filecmp
import warnings
from collections import Counter

import numpy as np
import pytest
from scipy.stats import norm

from hybridfuse.eeg import train_gnb
from hybridfuse.fusion import FusionConfig, classify_trial, fuse
from hybridfuse.gaze import aoi_confidences
from hybridfuse.simulate import (InfeasibleError, SimConfig, make_sequence,
                                 sim_layout, synth_session, synth_subject,
                                 synth_trial, unit_direction)

FAST = dict(flash_ms=5.0, isi_ms=5.0, intertrial_ms=50.0)


class TestMakeSequence:
    def test_counts(self):
        seq = make_sequence(7, 10, rng=0)
        assert len(seq) == 70
        assert Counter(seq) == {k: 10 for k in range(1, 8)}

    def test_no_adjacent_duplicates(self):
        # Linear scan oracle across many seeds and shapes.
        for seed in range(50):
            for k, r in ((7, 10), (3, 5), (8, 1), (4, 40)):
                seq = make_sequence(k, r, rng=seed)
                assert all(a != b for a, b in zip(seq, seq[1:]))

    def test_same_seed_identical(self):
        assert make_sequence(7, 10, rng=123) == make_sequence(7, 10, rng=123)

    def test_two_aois_warns_and_drops_constraint(self):
        with pytest.warns(RuntimeWarning):
            seq = make_sequence(2, 6, rng=0)
        assert Counter(seq) == {1: 6, 2: 6}

    def test_infeasible_shapes(self):
        with pytest.raises(InfeasibleError):
            make_sequence(1, 10)
        with pytest.raises(InfeasibleError):
            make_sequence(7, 0)


class TestSimConfig:
    def test_defaults_follow_protocol(self):
        cfg = SimConfig()
        assert cfg.subjects == 5
        assert cfg.trials_per_subject == 9
        assert cfg.n_aois == 7
        assert cfg.repetitions == 10

    @pytest.mark.parametrize("kw", [
        dict(trials_per_subject=0), dict(subjects=0), dict(repetitions=0),
        dict(gaze_sigma_px=0.0), dict(eeg_separation=-1.0),
        dict(gaze_on_target_p=1.5), dict(gaze_invalid_p=-0.1),
        dict(pupil_baseline_mm=0.0), dict(pupil_trial_mm=12.0),
        dict(gaze_rate_hz=0.0), dict(flash_ms=0.0),
    ])
    def test_invalid_values_rejected(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)


class TestUnitDirection:
    def test_unit_norm_and_deterministic(self):
        u = unit_direction(16)
        assert np.linalg.norm(u) == pytest.approx(1.0, rel=1e-12)
        assert np.array_equal(u, unit_direction(16))


class TestSynthTrial:
    def test_tight_gaze_gives_full_target_confidence(self):
        cfg = SimConfig(gaze_sigma_px=1e-9, gaze_on_target_p=1.0, **FAST)
        layout = sim_layout(cfg)
        bundle = synth_trial(3, cfg, layout, rng=0)
        et = aoi_confidences(bundle.gaze, layout)
        assert et.per_aoi[2] == 1.0

    def test_event_label_counts(self):
        cfg = SimConfig(**FAST)
        layout = sim_layout(cfg)
        bundle = synth_trial(2, cfg, layout, rng=1)
        targets = sum(e.is_target for e in bundle.events)
        assert targets == cfg.repetitions
        assert len(bundle.events) - targets == (cfg.n_aois - 1) * cfg.repetitions

    def test_gaze_stream_covers_window_at_rate(self):
        cfg = SimConfig(**FAST)
        layout = sim_layout(cfg)
        bundle = synth_trial(1, cfg, layout, rng=2)
        start, end = bundle.window_us
        # 60 Hz nominal clock over the half-open window.
        n = 0
        while start + int(n * 1_000_000 / cfg.gaze_rate_hz) < end:
            n += 1
        assert len(bundle.gaze) == n

    def test_pupil_near_trial_level(self):
        cfg = SimConfig(pupil_noise_sd_mm=0.0, **FAST)
        layout = sim_layout(cfg)
        bundle = synth_trial(1, cfg, layout, rng=3)
        vals = {s.pupil_left for s in bundle.gaze if s.pupil_left is not None}
        assert vals == {cfg.pupil_trial_mm}

    def test_attended_elsewhere_biases_gaze_not_labels(self):
        cfg = SimConfig(gaze_sigma_px=1e-9, gaze_on_target_p=1.0, **FAST)
        layout = sim_layout(cfg)
        bundle = synth_trial(2, cfg, layout, rng=4, attended=6)
        et = aoi_confidences(bundle.gaze, layout)
        assert et.per_aoi[5] == 1.0
        assert sum(e.is_target for e in bundle.events) == cfg.repetitions
        assert all(e.is_target == (e.aoi_id == 2) for e in bundle.events)

    def test_bad_target_rejected(self):
        cfg = SimConfig(**FAST)
        with pytest.raises(Exception):
            synth_trial(99, cfg, sim_layout(cfg), rng=0)


def _train_model(cfg, rng, n_trials=20):
    layout = sim_layout(cfg)
    rows, labels = [], []
    for i in range(n_trials):
        b = synth_trial((i % cfg.n_aois) + 1, cfg, layout, rng)
        rows.append(b.features)
        labels.extend(e.is_target for e in b.events)
    return train_gnb(np.vstack(rows), np.array(labels), standardize=True)


def _eeg_accuracy(cfg, model, rng, n_trials):
    layout = sim_layout(cfg)
    pure_eeg = FusionConfig(threshold=0.0)
    hits = 0
    for i in range(n_trials):
        target = (i % cfg.n_aois) + 1
        b = synth_trial(target, cfg, layout, rng)
        hits += classify_trial(b, model, layout, pure_eeg).chosen_aoi == target
    return hits / n_trials


class TestDifficultyCalibration:
    def test_zero_separation_is_chance_level(self):
        cfg = SimConfig(eeg_separation=0.0, **FAST)
        rng = np.random.default_rng(100)
        model = _train_model(cfg, rng)
        acc = _eeg_accuracy(cfg, model, rng, 1000)
        assert abs(acc - 1.0 / cfg.n_aois) <= 0.05

    def test_wide_separation_is_near_perfect(self):
        cfg = SimConfig(eeg_separation=6.0, repetitions=2, **FAST)
        # Oracle: with ideal means +-d/2*u and unit variance, the summed
        # log-score gap between the target AOI and any other is Gaussian
        # with mean R*d^2 and variance 2*R*d^2, so the union bound on the
        # error is (K-1)*Phi(-d*sqrt(R/2)).
        bound = (cfg.n_aois - 1) * norm.cdf(
            -cfg.eeg_separation * np.sqrt(cfg.repetitions / 2.0))
        assert bound < 0.01
        rng = np.random.default_rng(101)
        model = _train_model(cfg, rng)
        acc = _eeg_accuracy(cfg, model, rng, 1000)
        assert acc >= 0.99

    def test_eeg_accuracy_trend_in_separation(self):
        rng = np.random.default_rng(102)
        accs = []
        for d in (0.5, 1.5, 3.0):
            cfg = SimConfig(eeg_separation=d, repetitions=2, **FAST)
            model = _train_model(cfg, rng)
            accs.append(_eeg_accuracy(cfg, model, rng, 200))
        assert accs[0] < accs[1] < accs[2]

    def test_target_confidence_trend_in_sigma(self):
        rng = np.random.default_rng(103)
        means = []
        for sigma in (20.0, 80.0, 300.0):
            cfg = SimConfig(gaze_sigma_px=sigma, gaze_on_target_p=1.0, **FAST)
            layout = sim_layout(cfg)
            vals = [aoi_confidences(synth_trial(1, cfg, layout, rng).gaze,
                                    layout).per_aoi[0]
                    for _ in range(60)]
            means.append(np.mean(vals))
        assert means[0] > means[1] > means[2]


class TestSynthSubject:
    def test_trial_count_and_targets_cycle(self):
        cfg = SimConfig(trials_per_subject=9, **FAST)
        s = synth_subject(cfg, subject="S1", session_id="x", rng=5)
        assert len(s.bundles) == 9
        assert [b.trial for b in s.bundles] == list(range(1, 10))
        assert s.manifest.targets == {t: ((t - 1) % 7) + 1 for t in range(1, 10)}

    def test_intertrial_gaps_carry_baseline_pupil(self):
        cfg = SimConfig(pupil_noise_sd_mm=0.0, trials_per_subject=2, **FAST)
        s = synth_subject(cfg, subject="S1", session_id="x", rng=6)
        trial_vals, gap_vals = set(), set()
        for g in s.gaze:
            if g.pupil_left is None:
                continue
            if any(a <= g.t_us < b for a, b in s.windows):
                trial_vals.add(g.pupil_left)
            else:
                gap_vals.add(g.pupil_left)
        assert trial_vals == {cfg.pupil_trial_mm}
        assert gap_vals == {cfg.pupil_baseline_mm}


class TestSynthSession:
    def test_directory_fanout(self, tmp_path):
        cfg = SimConfig(subjects=5, trials_per_subject=9, seed=7, **FAST)
        paths = synth_session(cfg, tmp_path)
        assert len(paths) == 5
        for p in paths:
            assert (p / "manifest.json").exists()
            assert (p / "gaze.csv").exists()
            assert (p / "events.csv").exists()
            assert (p / "features.csv").exists()
            assert (p / "layout.json").exists()

    def test_same_seed_byte_identical(self, tmp_path):
        cfg = SimConfig(subjects=2, trials_per_subject=3, seed=11, **FAST)
        a = synth_session(cfg, tmp_path / "a")
        b = synth_session(cfg, tmp_path / "b")
        for pa, pb in zip(a, b):
            for f in ("manifest.json", "layout.json", "gaze.csv",
                      "events.csv", "features.csv"):
                assert filecmp.cmp(pa / f, pb / f, shallow=False), f

    def test_round_trip_loads_clean(self, tmp_path):
        from hybridfuse.session_io import load_session
        cfg = SimConfig(subjects=1, trials_per_subject=4, seed=13, **FAST)
        (path,) = synth_session(cfg, tmp_path)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            session = load_session(path)
        assert len(session.bundles) == 4
        for b in session.bundles:
            assert b.repetitions == cfg.repetitions

    def test_zero_trials_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(trials_per_subject=0)
