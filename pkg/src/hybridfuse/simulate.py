"""Synthetic sessions: stimulus sequences, gaze, pupil, and EEG features.

Everything the pipeline consumes can be generated here with controllable
difficulty, so end-to-end claims are testable without hardware. EEG is
simulated in feature space; target events draw from N(+d/2·u, I) and
non-target events from N(-d/2·u, I) along a fixed unit direction u, where
d is the configured separation. Raw waveform synthesis is out of scope.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (DEFAULT_SCREEN_H, DEFAULT_SCREEN_W, DEFAULT_WORDS,
                   AoiLayout, DomainError, GazeSample, StimulusEvent,
                   TrialBundle, default_layout)
from .session_io import Session, SessionManifest, save_session

RngOrSeed = Union[int, np.random.Generator, None]


class InfeasibleError(DomainError):
    """The requested stimulus sequence cannot exist."""


@dataclass(frozen=True)
class SimConfig:
    """Knobs for synthetic data generation.

    ``gaze_on_target_p`` is the probability a gaze sample comes from the
    Gaussian around the attended AOI center (dispersion ``gaze_sigma_px``)
    rather than from a uniform distraction over the whole screen.
    ``eeg_separation`` is the standardized mean distance between target and
    non-target feature distributions.
    """

    subjects: int = 5
    trials_per_subject: int = 9
    n_aois: int = 7
    repetitions: int = 10
    gaze_sigma_px: float = 40.0
    gaze_on_target_p: float = 0.9
    eeg_separation: float = 3.0
    pupil_baseline_mm: float = 3.1552
    pupil_trial_mm: float = 3.2945
    pupil_noise_sd_mm: float = 0.05
    gaze_invalid_p: float = 0.0
    gaze_rate_hz: float = 60.0
    eeg_rate_hz: float = 256.0
    flash_ms: float = 100.0
    isi_ms: float = 75.0
    intertrial_ms: float = 3000.0
    feature_dim: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("subjects", "trials_per_subject", "n_aois", "repetitions",
                     "feature_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.gaze_sigma_px <= 0:
            raise ValueError("gaze_sigma_px must be > 0")
        if self.eeg_separation < 0:
            raise ValueError("eeg_separation must be >= 0")
        for name in ("gaze_on_target_p", "gaze_invalid_p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("gaze_rate_hz", "eeg_rate_hz", "flash_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("isi_ms", "intertrial_ms", "pupil_noise_sd_mm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("pupil_baseline_mm", "pupil_trial_mm"):
            if not 0.0 < getattr(self, name) < 10.0:
                raise ValueError(f"{name} must be in (0, 10) mm")

    @property
    def soa_us(self) -> int:
        """Stimulus onset asynchrony: flash plus inter-stimulus interval."""
        return int(round((self.flash_ms + self.isi_ms) * 1000))

    @property
    def trial_duration_us(self) -> int:
        return self.n_aois * self.repetitions * self.soa_us


def _as_rng(rng: RngOrSeed) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def make_sequence(n_aois: int, repetitions: int, rng: RngOrSeed = None) -> Tuple[int, ...]:
    """Oddball flash order: ``repetitions`` shuffled blocks of all AOI ids.

    Each AOI appears exactly once per block, so exactly ``repetitions``
    times overall. For three or more AOIs no id flashes twice in a row:
    when a block starts with the previous block's last id, that front
    element is swapped with a random later position. With exactly two AOIs
    the no-repeat rule would force a deterministic alternation, so it is
    dropped with a warning instead.
    """
    if n_aois < 2:
        raise InfeasibleError(f"need at least 2 AOIs, got {n_aois}")
    if repetitions < 1:
        raise InfeasibleError(f"need at least 1 repetition, got {repetitions}")
    if n_aois == 2:
        warnings.warn("adjacent-repeat constraint dropped for 2 AOIs "
                      "(it would force a deterministic alternation)",
                      RuntimeWarning, stacklevel=2)
    gen = _as_rng(rng)
    seq: List[int] = []
    for _ in range(repetitions):
        block = [int(v) + 1 for v in gen.permutation(n_aois)]
        if seq and n_aois >= 3 and block[0] == seq[-1]:
            j = int(gen.integers(1, n_aois))
            block[0], block[j] = block[j], block[0]
        seq.extend(block)
    return tuple(seq)


def _clip_pupil(d: float) -> float:
    return min(max(d, 1e-6), 10.0 - 1e-6)


def _gaze_times(start_us: int, end_us: int, rate_hz: float) -> List[int]:
    """Integer-microsecond sample clock over [start, end)."""
    times = []
    n = 0
    while True:
        t = start_us + int(n * 1_000_000 / rate_hz)
        if t >= end_us:
            return times
        times.append(t)
        n += 1


def _gaze_sample(t: int, point_mean: Tuple[float, float], pupil_mean: float,
                 cfg: SimConfig, layout: AoiLayout,
                 rng: np.random.Generator) -> GazeSample:
    if cfg.gaze_invalid_p > 0 and rng.random() < cfg.gaze_invalid_p:
        return GazeSample(t_us=t)
    if rng.random() < cfg.gaze_on_target_p:
        p = (point_mean[0] + rng.normal(0.0, cfg.gaze_sigma_px),
             point_mean[1] + rng.normal(0.0, cfg.gaze_sigma_px))
    else:
        p = (rng.uniform(0.0, layout.screen_w), rng.uniform(0.0, layout.screen_h))
    d = _clip_pupil(pupil_mean + rng.normal(0.0, cfg.pupil_noise_sd_mm))
    # Both eyes carry the drawn point, so the monocular average is exactly
    # the mixture distribution.
    return GazeSample(t_us=t, left=p, right=p, pupil_left=d, pupil_right=d)


def unit_direction(dim: int) -> np.ndarray:
    """Fixed separation direction: constant by design, so a model trained
    on any session scores any other session of the same dimension."""
    return np.full(dim, 1.0 / math.sqrt(dim))


def synth_trial(target: int, cfg: SimConfig, layout: AoiLayout,
                rng: RngOrSeed = None, *, trial: int = 1, start_us: int = 0,
                attended: Optional[int] = None) -> TrialBundle:
    """Generate one trial: flash sequence, gaze stream, and feature rows.

    ``target`` is the instructed word (ground truth for event labels).
    ``attended`` is where the subject actually looks and attends; it
    defaults to the target and can be pointed at a wrong AOI to reproduce
    a diverted-attention trial, which biases gaze and EEG together.
    """
    layout.aoi_by_id(target)
    attended = target if attended is None else attended
    att_center = layout.aoi_by_id(attended).center
    gen = _as_rng(rng)

    with warnings.catch_warnings():
        if cfg.n_aois == 2:
            warnings.simplefilter("ignore", RuntimeWarning)
        order = make_sequence(layout.n_aois, cfg.repetitions, gen)
    end_us = start_us + cfg.trial_duration_us

    events = []
    rows = np.empty((len(order), cfg.feature_dim), dtype=np.float64)
    u = unit_direction(cfg.feature_dim)
    for i, aoi_id in enumerate(order):
        events.append(StimulusEvent(
            t_us=start_us + i * cfg.soa_us,
            trial=trial,
            aoi_id=aoi_id,
            is_target=aoi_id == target,
        ))
        sign = 1.0 if aoi_id == attended else -1.0
        rows[i] = sign * (cfg.eeg_separation / 2.0) * u + gen.standard_normal(cfg.feature_dim)

    gaze = [
        _gaze_sample(t, att_center, cfg.pupil_trial_mm, cfg, layout, gen)
        for t in _gaze_times(start_us, end_us, cfg.gaze_rate_hz)
    ]
    return TrialBundle(trial=trial, window_us=(start_us, end_us), gaze=tuple(gaze),
                       events=tuple(events), features=rows, target_aoi=target)


def _intertrial_gaze(start_us: int, end_us: int, cfg: SimConfig, layout: AoiLayout,
                     rng: np.random.Generator) -> List[GazeSample]:
    """Resting gaze between trials: wandering uniformly, pupil at baseline."""
    out = []
    for t in _gaze_times(start_us, end_us, cfg.gaze_rate_hz):
        if cfg.gaze_invalid_p > 0 and rng.random() < cfg.gaze_invalid_p:
            out.append(GazeSample(t_us=t))
            continue
        p = (rng.uniform(0.0, layout.screen_w), rng.uniform(0.0, layout.screen_h))
        d = _clip_pupil(cfg.pupil_baseline_mm + rng.normal(0.0, cfg.pupil_noise_sd_mm))
        out.append(GazeSample(t_us=t, left=p, right=p, pupil_left=d, pupil_right=d))
    return out


def sim_layout(cfg: SimConfig) -> AoiLayout:
    """Word grid for a config; the standard grid holds up to 8 AOIs."""
    if cfg.n_aois > 8:
        raise ValueError("the simulator grid supports at most 8 AOIs")
    words = (DEFAULT_WORDS + ("Mais",))[:cfg.n_aois]
    return default_layout(words=words)


def synth_subject(cfg: SimConfig, subject: str, session_id: str,
                  rng: RngOrSeed = None,
                  targets: Optional[Sequence[int]] = None,
                  attended: Optional[Sequence[Optional[int]]] = None) -> Session:
    """One subject's full session, in memory.

    Targets default to cycling through the AOIs; ``attended`` may override
    per-trial attention (None entries mean attend-to-target).
    """
    gen = _as_rng(rng)
    layout = sim_layout(cfg)
    if targets is None:
        targets = [(i % cfg.n_aois) + 1 for i in range(cfg.trials_per_subject)]
    if len(targets) != cfg.trials_per_subject:
        raise ValueError("targets length must equal trials_per_subject")
    if attended is None:
        attended = [None] * cfg.trials_per_subject
    if len(attended) != cfg.trials_per_subject:
        raise ValueError("attended length must equal trials_per_subject")

    gap_us = int(round(cfg.intertrial_ms * 1000))
    gaze: List[GazeSample] = []
    bundles: List[TrialBundle] = []
    windows: List[Tuple[int, int, int]] = []
    t = 0
    for i, target in enumerate(targets):
        gaze.extend(_intertrial_gaze(t, t + gap_us, cfg, layout, gen))
        t += gap_us
        bundle = synth_trial(target, cfg, layout, gen, trial=i + 1, start_us=t,
                             attended=attended[i])
        bundles.append(bundle)
        gaze.extend(bundle.gaze)
        windows.append((i + 1, bundle.window_us[0], bundle.window_us[1]))
        t = bundle.window_us[1]
    gaze.extend(_intertrial_gaze(t, t + gap_us, cfg, layout, gen))

    manifest = SessionManifest(
        session_id=session_id,
        subject=subject,
        screen_w=layout.screen_w,
        screen_h=layout.screen_h,
        gaze_rate_hz=cfg.gaze_rate_hz,
        eeg_rate_hz=cfg.eeg_rate_hz,
        feature_dim=cfg.feature_dim,
        trial_windows=tuple(windows),
        targets={i + 1: tgt for i, tgt in enumerate(targets)},
    )
    return Session(manifest=manifest, layout=layout, gaze=tuple(gaze), bundles=tuple(bundles))


def synth_session(cfg: SimConfig, out_dir: Path) -> List[Path]:
    """Write one session directory per subject under ``out_dir``.

    Each subject gets an independent child seed derived from ``cfg.seed``,
    so subjects are reproducible and could be generated in parallel.
    Returns the created directories.
    """
    out_dir = Path(out_dir)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.subjects)
    paths = []
    for i, child in enumerate(children, start=1):
        session = synth_subject(cfg, subject=f"S{i}", session_id=f"subject{i:02d}",
                                rng=np.random.default_rng(child))
        path = out_dir / session.manifest.session_id
        save_session(session, path)
        paths.append(path)
    return paths
