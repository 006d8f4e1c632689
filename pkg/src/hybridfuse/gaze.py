"""Gaze analytics: per-AOI confidence scores, centroid, dispersion ellipse,
heatmap aggregation, and pupil statistics.

The AOI confidence of a trial is the fraction of its valid gaze points that
landed inside each word rectangle; samples where no eye was detected are
excluded from numerator and denominator alike. Points on screen but outside
every AOI still count toward the denominator (that is the literal reading of
the score definition), which is why the per-AOI vector sums to at most 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .core import AoiLayout, DomainError, GazeSample, mono_point, mono_pupil


class EmptyTrialError(DomainError):
    """A trial contains no usable gaze point."""


class InsufficientDataError(DomainError):
    """Too few points for the requested statistic."""


class DegenerateError(DomainError):
    """Point scatter is rank-deficient; no ellipse exists."""


class NoPupilDataError(DomainError):
    """No valid pupil sample in the requested period."""


@dataclass(frozen=True)
class EtConfidence:
    """Per-AOI gaze confidence vector for one trial.

    ``counts[k-1]`` is the number of valid points inside AOI k and
    ``n_used`` the number of valid points overall, so
    ``per_aoi = counts / n_used``. ``n_invalid`` counts dropped
    eye-not-detected samples.
    """

    per_aoi: np.ndarray
    counts: np.ndarray
    n_used: int
    n_invalid: int

    def __post_init__(self) -> None:
        per_aoi = np.asarray(self.per_aoi, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        per_aoi.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "per_aoi", per_aoi)
        object.__setattr__(self, "counts", counts)

    @property
    def is_empty(self) -> bool:
        return self.n_used == 0

    @property
    def n_outside(self) -> int:
        """Valid points that hit no AOI."""
        return self.n_used - int(self.counts.sum())


def aoi_confidences(gaze: Sequence[GazeSample], layout: AoiLayout,
                    denominator: str = "all-valid") -> EtConfidence:
    """Fraction of valid gaze points inside each AOI.

    ``denominator`` selects what counts as the total: "all-valid" (default)
    uses every sample with a detected eye, including off-screen ones;
    "on-screen" restricts the total to points within the screen bounds.
    Raises EmptyTrialError when no sample qualifies.
    """
    if denominator not in ("all-valid", "on-screen"):
        raise ValueError(f"unknown denominator mode {denominator!r}")
    counts = np.zeros(layout.n_aois, dtype=np.int64)
    n_used = 0
    n_invalid = 0
    for s in gaze:
        p = mono_point(s)
        if p is None:
            n_invalid += 1
            continue
        if denominator == "on-screen" and not (
                0 <= p[0] < layout.screen_w and 0 <= p[1] < layout.screen_h):
            n_invalid += 1
            continue
        n_used += 1
        hit = layout.aoi_at(p)
        if hit is not None:
            counts[hit - 1] += 1
    if n_used == 0:
        raise EmptyTrialError(f"no usable gaze point among {len(gaze)} samples")
    return EtConfidence(per_aoi=counts / n_used, counts=counts,
                        n_used=n_used, n_invalid=n_invalid)


def valid_points(gaze: Sequence[GazeSample]) -> np.ndarray:
    """(n, 2) array of the monocular points of all valid samples."""
    pts = [mono_point(s) for s in gaze]
    pts = [p for p in pts if p is not None]
    if not pts:
        return np.empty((0, 2), dtype=np.float64)
    return np.asarray(pts, dtype=np.float64)


def centroid(gaze: Sequence[GazeSample]) -> Tuple[float, float]:
    """Arithmetic mean of the valid monocular gaze points."""
    pts = valid_points(gaze)
    if pts.shape[0] == 0:
        raise EmptyTrialError("cannot compute centroid of an empty trial")
    c = pts.mean(axis=0)
    return (float(c[0]), float(c[1]))


def chi2_quantile_2dof(p: float, tol: float = 1e-12) -> float:
    """Quantile of the chi-square distribution with 2 degrees of freedom.

    Solves 1 - exp(-q/2) = p by bisection on the closed-form CDF, which is
    exact for 2 dof and avoids a stats-table dependency.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"coverage must be in (0, 1), got {p}")
    lo, hi = 0.0, 1.0
    while 1.0 - math.exp(-hi / 2.0) < p:
        hi *= 2.0
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if 1.0 - math.exp(-mid / 2.0) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


@dataclass(frozen=True)
class ConfidenceEllipse:
    """Gaussian-model dispersion ellipse of a gaze point cloud.

    Semi-axes are sqrt(q * eigenvalue) of the sample covariance, where q is
    the 2-dof chi-square quantile at the requested coverage, so the ellipse
    contains that probability mass under the fitted Gaussian.
    """

    center: Tuple[float, float]
    semi_axes: Tuple[float, float]      # (major, minor), px
    orientation: float                  # major-axis angle, radians in [0, pi)
    coverage: float

    @property
    def area(self) -> float:
        return math.pi * self.semi_axes[0] * self.semi_axes[1]

    def contains(self, p: Tuple[float, float]) -> bool:
        """True when ``p`` lies inside or on the ellipse boundary."""
        dx = p[0] - self.center[0]
        dy = p[1] - self.center[1]
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        u = (dx * c + dy * s) / self.semi_axes[0]
        v = (-dx * s + dy * c) / self.semi_axes[1]
        return u * u + v * v <= 1.0


def confidence_ellipse(gaze: Sequence[GazeSample], coverage: float = 0.95) -> ConfidenceEllipse:
    """Fit the coverage ellipse of the valid gaze points.

    Requires at least 3 valid points and a non-degenerate scatter.
    """
    pts = valid_points(gaze)
    if pts.shape[0] < 3:
        raise InsufficientDataError(f"ellipse needs >= 3 valid points, got {pts.shape[0]}")
    cov = np.cov(pts, rowvar=False)  # 2x2 sample covariance, N-1 denominator
    eigvals, eigvecs = np.linalg.eigh(cov)
    # eigh returns ascending eigenvalues; index 1 is the major axis.
    lam_minor, lam_major = float(eigvals[0]), float(eigvals[1])
    if lam_minor <= 0.0 or not math.isfinite(lam_minor):
        raise DegenerateError("gaze scatter is rank-deficient")
    q = chi2_quantile_2dof(coverage)
    major_vec = eigvecs[:, 1]
    angle = math.atan2(float(major_vec[1]), float(major_vec[0])) % math.pi
    c = pts.mean(axis=0)
    return ConfidenceEllipse(
        center=(float(c[0]), float(c[1])),
        semi_axes=(math.sqrt(q * lam_major), math.sqrt(q * lam_minor)),
        orientation=angle,
        coverage=coverage,
    )


@dataclass(frozen=True)
class HeatmapGrid:
    """Binned 2-D density of gaze points over the screen.

    ``density[row, col]`` covers the square bin at
    (col*bin_px, row*bin_px). Before smoothing the total mass equals the
    number of contributing points; smoothing conserves mass except for
    kernel truncation at the grid boundary.
    """

    bin_px: int
    density: np.ndarray
    n_points: int

    def __post_init__(self) -> None:
        d = np.asarray(self.density, dtype=np.float64)
        d.flags.writeable = False
        object.__setattr__(self, "density", d)

    @property
    def mass(self) -> float:
        return float(self.density.sum())

    @property
    def shape(self) -> Tuple[int, int]:
        return self.density.shape  # (rows, cols)


def heatmap(gaze: Sequence[GazeSample], screen_w: int, screen_h: int,
            bin_px: int = 20, smooth_sigma: float = 0.0) -> HeatmapGrid:
    """2-D histogram of the valid gaze points, optionally Gaussian-smoothed.

    Points outside the screen do not contribute. ``smooth_sigma`` is in
    pixels; the kernel is truncated at 3 sigma. An empty input yields a
    zero grid.
    """
    if bin_px < 1:
        raise ValueError(f"bin_px must be >= 1, got {bin_px}")
    n_cols = math.ceil(screen_w / bin_px)
    n_rows = math.ceil(screen_h / bin_px)
    grid = np.zeros((n_rows, n_cols), dtype=np.float64)
    pts = valid_points(gaze)
    n_in = 0
    for x, y in pts:
        if 0 <= x < screen_w and 0 <= y < screen_h:
            grid[int(y // bin_px), int(x // bin_px)] += 1.0
            n_in += 1
    if smooth_sigma > 0.0:
        grid = ndimage.gaussian_filter(
            grid, sigma=smooth_sigma / bin_px, mode="constant", truncate=3.0)
    return HeatmapGrid(bin_px=bin_px, density=grid, n_points=n_in)


@dataclass(frozen=True)
class PupilSummary:
    """Pupil diameter statistics split into trial and inter-trial periods."""

    trial_median: float
    trial_sd: float
    intertrial_median: float
    intertrial_sd: float
    per_trial_medians: Tuple[float, ...]


def _median_low(values: np.ndarray) -> float:
    """Median with the lower-middle convention for even counts.

    Deterministic across platforms; avoids the midpoint interpolation most
    libraries apply.
    """
    ordered = np.sort(values)
    return float(ordered[(len(ordered) - 1) // 2])


def pupil_summary(samples: Sequence[GazeSample],
                  trial_windows: Sequence[Tuple[int, int]]) -> PupilSummary:
    """Median/SD of pupil diameter inside vs. outside the trial windows.

    Windows are half-open [start, end) microsecond intervals and must be
    disjoint and sorted. The per-sample diameter is the mean of the present
    eyes; samples with no pupil reading are dropped.
    """
    for (s1, e1), (s2, _e2) in zip(trial_windows, trial_windows[1:]):
        if not (s1 < e1 <= s2):
            raise ValueError("trial windows must be disjoint and sorted")
    in_trial: list[float] = []
    per_window: list[list[float]] = [[] for _ in trial_windows]
    inter: list[float] = []
    for s in samples:
        d = mono_pupil(s)
        if d is None:
            continue
        for i, (start, end) in enumerate(trial_windows):
            if start <= s.t_us < end:
                in_trial.append(d)
                per_window[i].append(d)
                break
        else:
            inter.append(d)
    if not in_trial:
        raise NoPupilDataError("no valid pupil sample inside any trial window")
    if not inter:
        raise NoPupilDataError("no valid pupil sample between trials")
    trial_arr = np.asarray(in_trial)
    inter_arr = np.asarray(inter)
    return PupilSummary(
        trial_median=_median_low(trial_arr),
        trial_sd=float(trial_arr.std()),
        intertrial_median=_median_low(inter_arr),
        intertrial_sd=float(inter_arr.std()),
        per_trial_medians=tuple(
            _median_low(np.asarray(w)) if w else float("nan") for w in per_window),
    )
