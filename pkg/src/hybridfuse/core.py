"""Shared domain types and geometric predicates.

Everything downstream (analytics, classification, fusion, I/O) builds on the
types in this module. All types are immutable after construction and safe to
share across threads or async tasks.

Conventions used throughout the package:
  * timestamps are integer microseconds (no float drift between the 60 Hz
    gaze stream and the 256 Hz EEG stream),
  * screen coordinates are pixels with the origin at the top-left corner,
  * AOI rectangles are half-open: [x, x+w) x [y, y+h), so adjacent grid
    cells never double-count a gaze point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np


class DomainError(Exception):
    """Base class for all recoverable domain errors raised by this package."""


class LayoutError(DomainError):
    """A screen layout violates one of its invariants."""


class OverlapError(LayoutError):
    """Two AOI rectangles intersect."""


class BoundsError(LayoutError):
    """An AOI rectangle extends beyond the screen."""


class IdError(LayoutError):
    """AOI ids are not contiguous starting at 1."""


# Default paradigm words: seven selectable commands on a 2x4 grid, the
# eighth cell stays blank.
DEFAULT_WORDS: Tuple[str, ...] = ("Sim", "Não", "Tosse", "Ajuda", "Stop", "TV", "Sono")

DEFAULT_SCREEN_W = 1920
DEFAULT_SCREEN_H = 1080
DEFAULT_GUTTER_PX = 40

# Physiologically plausible pupil range in millimetres.
PUPIL_MIN_MM = 0.0
PUPIL_MAX_MM = 10.0


@dataclass(frozen=True)
class GazeSample:
    """One binocular gaze + pupil measurement.

    Either eye may be absent (tracker lost it); a present coordinate must be
    finite and a present pupil diameter must lie in (0, 10) mm.
    """

    t_us: int
    left: Optional[Tuple[float, float]] = None
    right: Optional[Tuple[float, float]] = None
    pupil_left: Optional[float] = None
    pupil_right: Optional[float] = None

    def __post_init__(self) -> None:
        for eye in (self.left, self.right):
            if eye is not None and not (math.isfinite(eye[0]) and math.isfinite(eye[1])):
                raise ValueError(f"non-finite gaze coordinate at t={self.t_us}")
        for d in (self.pupil_left, self.pupil_right):
            if d is not None and not (PUPIL_MIN_MM < d < PUPIL_MAX_MM):
                raise ValueError(f"pupil diameter {d} mm outside ({PUPIL_MIN_MM}, {PUPIL_MAX_MM})")


@dataclass(frozen=True)
class Aoi:
    """One selectable word and its screen rectangle."""

    id: int
    word: str
    x: float
    y: float
    w: float
    h: float

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def rect(self) -> Tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class AoiLayout:
    """Screen geometry plus the ordered list of word AOIs."""

    screen_w: int
    screen_h: int
    aois: Tuple[Aoi, ...]

    @property
    def n_aois(self) -> int:
        return len(self.aois)

    @property
    def words(self) -> Tuple[str, ...]:
        return tuple(a.word for a in self.aois)

    def aoi_by_id(self, aoi_id: int) -> Aoi:
        for a in self.aois:
            if a.id == aoi_id:
                return a
        raise IdError(f"no AOI with id {aoi_id}")

    def aoi_at(self, p: Tuple[float, float]) -> Optional[int]:
        """Id of the AOI containing point ``p``, or None.

        Rectangles of a valid layout are disjoint, so at most one can match.
        """
        for a in self.aois:
            if point_in_aoi(p, a.rect):
                return a.id
        return None


def validate_layout(layout: AoiLayout) -> AoiLayout:
    """Check all layout invariants; return the layout unchanged when valid.

    Raises IdError for non-contiguous ids, BoundsError when a rectangle
    exits the screen, OverlapError when two rectangles intersect.
    """
    if layout.n_aois < 2:
        raise IdError(f"need at least 2 AOIs, got {layout.n_aois}")
    ids = [a.id for a in layout.aois]
    if ids != list(range(1, layout.n_aois + 1)):
        raise IdError(f"AOI ids must be contiguous from 1, got {ids}")
    for a in layout.aois:
        if a.w <= 0 or a.h <= 0:
            raise BoundsError(f"AOI {a.id} has non-positive size {a.w}x{a.h}")
        if a.x < 0 or a.y < 0 or a.x + a.w > layout.screen_w or a.y + a.h > layout.screen_h:
            raise BoundsError(f"AOI {a.id} exits the {layout.screen_w}x{layout.screen_h} screen")
    for i, a in enumerate(layout.aois):
        for b in layout.aois[i + 1:]:
            if _rects_intersect(a.rect, b.rect):
                raise OverlapError(f"AOIs {a.id} and {b.id} overlap")
    return layout


def _rects_intersect(r1: Tuple[float, float, float, float],
                     r2: Tuple[float, float, float, float]) -> bool:
    # Half-open rectangles: sharing an edge is not an intersection.
    x1, y1, w1, h1 = r1
    x2, y2, w2, h2 = r2
    return x1 < x2 + w2 and x2 < x1 + w1 and y1 < y2 + h2 and y2 < y1 + h1


def default_layout(screen_w: int = DEFAULT_SCREEN_W,
                   screen_h: int = DEFAULT_SCREEN_H,
                   words: Sequence[str] = DEFAULT_WORDS,
                   gutter_px: int = DEFAULT_GUTTER_PX) -> AoiLayout:
    """Build the standard 2-row by 4-column word grid.

    Cells are laid out row-major; with seven words the bottom-right cell
    stays blank. Screen size and gutters are configuration, not claims
    about any particular hardware setup.
    """
    n_cols, n_rows = 4, 2
    cell_w = (screen_w - (n_cols + 1) * gutter_px) / n_cols
    cell_h = (screen_h - (n_rows + 1) * gutter_px) / n_rows
    aois = []
    for i, word in enumerate(words):
        row, col = divmod(i, n_cols)
        aois.append(Aoi(
            id=i + 1,
            word=word,
            x=gutter_px + col * (cell_w + gutter_px),
            y=gutter_px + row * (cell_h + gutter_px),
            w=cell_w,
            h=cell_h,
        ))
    return validate_layout(AoiLayout(screen_w=screen_w, screen_h=screen_h, aois=tuple(aois)))


def mono_point(s: GazeSample) -> Optional[Tuple[float, float]]:
    """Collapse a binocular sample to one point.

    Both eyes present: component-wise mean of the two coordinates. One eye
    present: that eye alone (monocular fallback keeps the sample usable).
    Neither: None.
    """
    if s.left is not None and s.right is not None:
        return ((s.left[0] + s.right[0]) / 2.0, (s.left[1] + s.right[1]) / 2.0)
    if s.left is not None:
        return s.left
    if s.right is not None:
        return s.right
    return None


def mono_pupil(s: GazeSample) -> Optional[float]:
    """Single pupil diameter for a sample: mean of the present eyes, or None."""
    if s.pupil_left is not None and s.pupil_right is not None:
        return (s.pupil_left + s.pupil_right) / 2.0
    if s.pupil_left is not None:
        return s.pupil_left
    return s.pupil_right


def point_in_aoi(p: Tuple[float, float], rect: Tuple[float, float, float, float]) -> bool:
    """Half-open containment test: x in [rx, rx+rw), y in [ry, ry+rh)."""
    x, y = p
    rx, ry, rw, rh = rect
    return rx <= x < rx + rw and ry <= y < ry + rh


@dataclass(frozen=True)
class StimulusEvent:
    """One flash of one word during a trial.

    ``is_target`` is the training label; it is None in free-use sessions
    where no ground truth exists.
    """

    t_us: int
    trial: int
    aoi_id: int
    is_target: Optional[bool] = None


@dataclass(frozen=True)
class TrialBundle:
    """Everything recorded for one trial.

    ``features`` holds one row per event, in event order, so row i belongs
    to ``events[i]``. ``window_us`` is the [start, end) interval of the
    trial; all timestamps must fall inside it.
    """

    trial: int
    window_us: Tuple[int, int]
    gaze: Tuple[GazeSample, ...]
    events: Tuple[StimulusEvent, ...]
    features: np.ndarray
    target_aoi: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "gaze", tuple(self.gaze))
        object.__setattr__(self, "events", tuple(self.events))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D (n_events, D), got shape {feats.shape}")
        if feats.shape[0] != len(self.events):
            raise ValueError(
                f"trial {self.trial}: {len(self.events)} events but {feats.shape[0]} feature rows")
        if not np.all(np.isfinite(feats)):
            raise ValueError(f"trial {self.trial}: non-finite feature values")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)

        start, end = self.window_us
        if start >= end:
            raise ValueError(f"trial {self.trial}: empty window {self.window_us}")
        prev_t = None
        for s in self.gaze:
            if not (start <= s.t_us < end):
                raise ValueError(f"trial {self.trial}: gaze t={s.t_us} outside window")
            if prev_t is not None and s.t_us <= prev_t:
                raise ValueError(f"trial {self.trial}: gaze timestamps not strictly increasing")
            prev_t = s.t_us
        counts: dict[int, int] = {}
        for e in self.events:
            if not (start <= e.t_us < end):
                raise ValueError(f"trial {self.trial}: event t={e.t_us} outside window")
            counts[e.aoi_id] = counts.get(e.aoi_id, 0) + 1
        if counts and len(set(counts.values())) != 1:
            raise ValueError(f"trial {self.trial}: unequal flash counts per AOI: {counts}")

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def repetitions(self) -> int:
        """Flashes per AOI (equal across AOIs by construction)."""
        if not self.events:
            return 0
        first = self.events[0].aoi_id
        return sum(1 for e in self.events if e.aoi_id == first)
