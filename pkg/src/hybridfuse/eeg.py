"""Gaussian naive Bayes scoring of stimulus events.

The classifier is binary (target vs. non-target flash) with diagonal
covariance and works entirely in the log domain: at ~192 feature dimensions
the raw density products underflow double precision. Per-event scores turn
into a per-event target confidence, and the confidences of each AOI's
flashes aggregate into the per-AOI trial score vector the fusion stage
consumes.

Two confidence readings are provided. The "literal" form,
1 - max(S1, S2) / (S1 + S2), equals the losing class's normalized score and
is capped at 0.5; the "posterior" form, S1 / (S1 + S2), is the normalized
target posterior. Both reduce to stable sigmoid expressions of the
log-score difference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import DomainError

VARIANCE_FLOOR = 1e-9


class ShapeError(DomainError):
    """Epoch array does not match the configured channel/sample counts."""


class DimensionError(DomainError):
    """Feature dimension mismatch between model and data."""


class ClassMissingError(DomainError):
    """A training set lacks examples of one class."""


class MissingAoiError(DomainError):
    """A trial has no event for some AOI."""


@dataclass(frozen=True)
class FeatureConfig:
    """Shape contract of the generic epoch-to-feature extractor.

    An epoch is a (n_channels, n_samples) post-stimulus window; each channel
    is reduced to ``n_blocks`` block means (moving-average decimation), so
    the feature dimension is n_channels * n_blocks. Rate and window fields
    are recording metadata.
    """

    n_channels: int = 16
    n_samples: int = 204
    n_blocks: int = 12
    sample_rate_hz: float = 256.0
    window_ms: Tuple[float, float] = (0.0, 800.0)

    @property
    def n_dims(self) -> int:
        return self.n_channels * self.n_blocks

    def to_dict(self) -> dict:
        return {
            "n_channels": self.n_channels,
            "n_samples": self.n_samples,
            "n_blocks": self.n_blocks,
            "sample_rate_hz": self.sample_rate_hz,
            "window_ms": list(self.window_ms),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            n_channels=int(d["n_channels"]),
            n_samples=int(d["n_samples"]),
            n_blocks=int(d["n_blocks"]),
            sample_rate_hz=float(d["sample_rate_hz"]),
            window_ms=(float(d["window_ms"][0]), float(d["window_ms"][1])),
        )


@dataclass(frozen=True)
class FeatureVector:
    """One event's feature values plus a back-reference to its source event."""

    values: np.ndarray
    trial: Optional[int] = None
    event_idx: Optional[int] = None
    aoi_id: Optional[int] = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("feature values must be a finite 1-D vector")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def extract_features(epoch: np.ndarray, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Reduce a multichannel epoch to block means, concatenated per channel.

    ``epoch`` must be (cfg.n_channels, cfg.n_samples); the result has
    cfg.n_dims entries.
    """
    epoch = np.asarray(epoch, dtype=np.float64)
    if epoch.shape != (cfg.n_channels, cfg.n_samples):
        raise ShapeError(
            f"epoch shape {epoch.shape} != expected ({cfg.n_channels}, {cfg.n_samples})")
    blocks = [np.array_split(epoch[ch], cfg.n_blocks) for ch in range(cfg.n_channels)]
    return np.concatenate([[b.mean() for b in ch_blocks] for ch_blocks in blocks])


def _column_moments(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-column mean and population variance via correctly-rounded sums.

    math.fsum makes the accumulation independent of row order, so fitted
    models are bit-identical under any permutation of the training rows.
    """
    n = X.shape[0]
    mean = np.array([math.fsum(col) / n for col in X.T], dtype=np.float64)
    var = np.array([math.fsum((col - m) ** 2) / n
                    for col, m in zip(X.T, mean)], dtype=np.float64)
    return mean, var


@dataclass(frozen=True)
class Standardization:
    """Per-dimension shift/scale fitted on a training set."""

    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mean, dtype=np.float64)
        s = np.asarray(self.sd, dtype=np.float64)
        m.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "sd", s)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.sd

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardization":
        mean, var = _column_moments(features)
        sd = np.sqrt(var)
        # Constant dimensions keep their raw scale instead of dividing by ~0.
        sd = np.where(sd < 1e-12, 1.0, sd)
        return cls(mean=mean, sd=sd)


@dataclass(frozen=True)
class GnbModel:
    """Binary Gaussian naive Bayes model (target vs. non-target)."""

    prior_target: float
    prior_nontarget: float
    mean_target: np.ndarray
    mean_nontarget: np.ndarray
    var_target: np.ndarray
    var_nontarget: np.ndarray
    standardization: Optional[Standardization] = None
    feature_config: Optional[FeatureConfig] = None

    def __post_init__(self) -> None:
        if self.prior_target <= 0 or self.prior_nontarget <= 0:
            raise ValueError("priors must be positive")
        if abs(self.prior_target + self.prior_nontarget - 1.0) > 1e-12:
            raise ValueError("priors must sum to 1")
        for name in ("mean_target", "mean_nontarget", "var_target", "var_nontarget"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any(self.var_target < VARIANCE_FLOOR) or np.any(self.var_nontarget < VARIANCE_FLOOR):
            raise ValueError(f"variances must be >= {VARIANCE_FLOOR}")

    @property
    def n_dims(self) -> int:
        return self.mean_target.shape[0]


@dataclass(frozen=True)
class ScorePair:
    """Log-domain Bayesian scores of one event for (target, non-target)."""

    log_target: float
    log_nontarget: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.log_target) and math.isfinite(self.log_nontarget)):
            raise ValueError("log scores must be finite")

    @property
    def log_diff(self) -> float:
        return self.log_target - self.log_nontarget


def train_gnb(features: np.ndarray, is_target: np.ndarray,
              priors: Optional[Tuple[float, float]] = None,
              standardize: bool = False,
              feature_config: Optional[FeatureConfig] = None) -> GnbModel:
    """Fit per-class, per-dimension Gaussians.

    Means and variances use the population (N) denominator and are clamped
    below at the variance floor. Priors default to the empirical class
    frequencies; pass ``priors=(target, nontarget)`` to override. With
    ``standardize=True`` the moments are fitted on per-dimension
    standardized features and the shift/scale is stored on the model, so
    scoring remains self-contained.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(is_target, dtype=bool)
    if X.ndim != 2:
        raise DimensionError(f"features must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DimensionError(f"{X.shape[0]} feature rows but {y.shape} labels")
    n_target = int(y.sum())
    n_nontarget = int((~y).sum())
    if n_target < 2 or n_nontarget < 2:
        raise ClassMissingError(
            f"need >= 2 samples per class, got target={n_target} nontarget={n_nontarget}")

    standardization = None
    if standardize:
        standardization = Standardization.fit(X)
        X = standardization.apply(X)

    if priors is None:
        priors = (n_target / len(y), n_nontarget / len(y))
    pt, pn = float(priors[0]), float(priors[1])

    mean_t, var_t = _column_moments(X[y])
    mean_n, var_n = _column_moments(X[~y])
    return GnbModel(
        prior_target=pt,
        prior_nontarget=pn,
        mean_target=mean_t,
        mean_nontarget=mean_n,
        var_target=np.maximum(var_t, VARIANCE_FLOOR),
        var_nontarget=np.maximum(var_n, VARIANCE_FLOOR),
        standardization=standardization,
        feature_config=feature_config,
    )


_LOG_2PI = math.log(2.0 * math.pi)


def _log_gaussian_sum(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> float:
    return float(-0.5 * np.sum(_LOG_2PI + np.log(var) + (x - mean) ** 2 / var))


def bayes_scores(model: GnbModel, x: np.ndarray) -> ScorePair:
    """Log prior + log diagonal-Gaussian likelihood for both classes."""
    if isinstance(x, FeatureVector):
        x = x.values
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_dims,):
        raise DimensionError(f"feature shape {x.shape} != model dimension ({model.n_dims},)")
    if model.standardization is not None:
        x = model.standardization.apply(x)
    return ScorePair(
        log_target=math.log(model.prior_target)
        + _log_gaussian_sum(x, model.mean_target, model.var_target),
        log_nontarget=math.log(model.prior_nontarget)
        + _log_gaussian_sum(x, model.mean_nontarget, model.var_nontarget),
    )


def target_confidence(scores: ScorePair, mode: str = "literal") -> float:
    """Per-event target confidence from the two Bayesian scores.

    "literal": 1 - max(S1, S2)/(S1 + S2), the losing class's normalized
    score, in (0, 0.5]. "posterior": S1/(S1 + S2), the normalized target
    posterior, in (0, 1). Both are computed from the log-score difference,
    so they are invariant under common rescaling of the raw scores.
    """
    d = scores.log_diff
    if mode == "literal":
        return _sigmoid(-abs(d))
    if mode == "posterior":
        return _sigmoid(d)
    raise ValueError(f"unknown confidence mode {mode!r}")


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class TrialEegScores:
    """Per-AOI EEG confidence vector plus the per-event values behind it."""

    per_aoi: np.ndarray
    per_event: Tuple[Tuple[int, float], ...]  # (aoi_id, confidence) in event order

    def __post_init__(self) -> None:
        arr = np.asarray(self.per_aoi, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "per_aoi", arr)
        object.__setattr__(self, "per_event", tuple(self.per_event))


def aggregate_trial(event_scores: Sequence[Tuple[int, ScorePair]], n_aois: int,
                    mode: str = "mean", confidence_mode: str = "posterior") -> TrialEegScores:
    """Collapse per-event scores into one confidence per AOI.

    "mean" averages the per-event confidences of each AOI's flashes
    (confidence_mode selects literal vs. posterior). "logit-sum" adds the
    per-event log-score differences of each AOI and maps the total through
    the logistic function. Every AOI must have at least one event.
    """
    if mode not in ("mean", "logit-sum"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    conf_by_aoi: list[list[float]] = [[] for _ in range(n_aois)]
    diff_by_aoi: list[list[float]] = [[] for _ in range(n_aois)]
    per_event: list[Tuple[int, float]] = []
    for aoi_id, pair in event_scores:
        if not 1 <= aoi_id <= n_aois:
            raise MissingAoiError(f"event AOI id {aoi_id} outside 1..{n_aois}")
        conf = target_confidence(pair, confidence_mode)
        conf_by_aoi[aoi_id - 1].append(conf)
        diff_by_aoi[aoi_id - 1].append(pair.log_diff)
        per_event.append((aoi_id, conf))
    missing = [k + 1 for k, confs in enumerate(conf_by_aoi) if not confs]
    if missing:
        raise MissingAoiError(f"no event for AOIs {missing}")

    per_aoi = np.empty(n_aois, dtype=np.float64)
    for k in range(n_aois):
        if mode == "mean":
            per_aoi[k] = sum(conf_by_aoi[k]) / len(conf_by_aoi[k])
        else:
            per_aoi[k] = _sigmoid(sum(diff_by_aoi[k]))
    return TrialEegScores(per_aoi=per_aoi, per_event=tuple(per_event))
