"""Threshold-gated fusion of the EEG and gaze confidence vectors.

The rule: walk the AOIs in strictly descending EEG-score order (ties broken
toward the lower AOI id) and select the first one whose gaze confidence
reaches the threshold. When no AOI qualifies the configured fallback policy
applies: "eeg-argmax" keeps the system live by returning the best EEG
candidate anyway, "reject" abstains. Only the ranks of the EEG vector
matter, so the decision is invariant under any strictly increasing
transform of it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import AoiLayout, DomainError, TrialBundle
from .eeg import GnbModel, aggregate_trial, bayes_scores
from .gaze import aoi_confidences


class LengthMismatchError(DomainError):
    """The two modality score vectors have different lengths."""


@dataclass(frozen=True)
class FusionConfig:
    """Tunables of the fusion decision.

    ``threshold`` is the minimum gaze confidence an EEG-ranked candidate
    must reach. ``eeg_mode`` selects how per-event scores become
    confidences (see eeg.target_confidence); fusion defaults to the
    posterior reading because the literal one inverts ranking.
    ``et_denominator`` is forwarded to the gaze confidence computation.
    """

    threshold: float = 0.85
    eeg_mode: str = "posterior"
    fallback_policy: str = "eeg-argmax"
    et_denominator: str = "all-valid"

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.eeg_mode not in ("literal", "posterior"):
            raise ValueError(f"unknown eeg_mode {self.eeg_mode!r}")
        if self.fallback_policy not in ("eeg-argmax", "reject"):
            raise ValueError(f"unknown fallback_policy {self.fallback_policy!r}")


@dataclass(frozen=True)
class FusionDecision:
    """Outcome of one trial: the chosen AOI plus both score vectors.

    ``mode`` is "fused" when an EEG candidate passed the gaze gate,
    "fallback-eeg" when none did and the argmax policy applied, "rejected"
    when the reject policy abstained (chosen_aoi is then None).
    ``rank_inspected`` counts how many EEG-ranked candidates were tested.
    """

    chosen_aoi: Optional[int]
    mode: str
    c_eeg: np.ndarray
    c_et: np.ndarray
    rank_inspected: int

    def __post_init__(self) -> None:
        for name in ("c_eeg", "c_et"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def fuse(c_eeg: Sequence[float], c_et: Sequence[float], cfg: FusionConfig) -> FusionDecision:
    """Apply the threshold-gated descending-score rule to one trial."""
    c_eeg = np.asarray(c_eeg, dtype=np.float64)
    c_et = np.asarray(c_et, dtype=np.float64)
    if c_eeg.shape != c_et.shape:
        raise LengthMismatchError(f"score vectors differ: {c_eeg.shape} vs {c_et.shape}")
    k = c_eeg.shape[0]
    if k < 2:
        raise LengthMismatchError(f"need >= 2 AOIs, got {k}")
    if not (np.all(np.isfinite(c_eeg)) and np.all(np.isfinite(c_et))):
        raise ValueError("score vectors must be finite")

    # Descending EEG score; equal scores keep ascending id order.
    order = sorted(range(k), key=lambda i: (-c_eeg[i], i))
    for rank, i in enumerate(order, start=1):
        if c_et[i] >= cfg.threshold:
            return FusionDecision(chosen_aoi=i + 1, mode="fused",
                                  c_eeg=c_eeg, c_et=c_et, rank_inspected=rank)
    if cfg.fallback_policy == "eeg-argmax":
        return FusionDecision(chosen_aoi=order[0] + 1, mode="fallback-eeg",
                              c_eeg=c_eeg, c_et=c_et, rank_inspected=k)
    return FusionDecision(chosen_aoi=None, mode="rejected",
                          c_eeg=c_eeg, c_et=c_et, rank_inspected=k)


def classify_trial(bundle: TrialBundle, model: GnbModel, layout: AoiLayout,
                   cfg: FusionConfig = FusionConfig()) -> FusionDecision:
    """Run both modality pipelines on one trial and fuse the results."""
    et = aoi_confidences(bundle.gaze, layout, denominator=cfg.et_denominator)
    event_scores = [
        (e.aoi_id, bayes_scores(model, bundle.features[i]))
        for i, e in enumerate(bundle.events)
    ]
    eeg = aggregate_trial(event_scores, layout.n_aois, confidence_mode=cfg.eeg_mode)
    return fuse(eeg.per_aoi, et.per_aoi, cfg)


@dataclass(frozen=True)
class TrialResult:
    """One classified trial together with its ground truth, if known."""

    trial: int
    truth: Optional[int]
    decision: FusionDecision

    @property
    def correct(self) -> Optional[bool]:
        if self.truth is None:
            return None
        return self.decision.chosen_aoi == self.truth
