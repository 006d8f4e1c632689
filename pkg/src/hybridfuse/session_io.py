"""Session persistence, validation, and report export.

A session is a directory:

    manifest.json   metadata, trial windows, file references, ground truth
    layout.json     screen geometry and the word AOIs
    gaze.csv        t_us,lx_px,ly_px,rx_px,ry_px,lpupil_mm,rpupil_mm,lvalid,rvalid
    events.csv      t_us,trial,aoi_id,is_target
    features.csv    trial,event_idx,aoi_id,f_0..f_{D-1}

CSV files are UTF-8 with a header row, LF line endings and "." decimals;
absent values are empty fields. Reals are rendered with 17 significant
digits, which round-trips IEEE doubles exactly, so save -> load -> save is
byte-identical. JSON documents carry a "version" field and reject unknown
keys to catch format drift early.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .core import (Aoi, AoiLayout, DomainError, GazeSample, StimulusEvent,
                   TrialBundle, validate_layout)
from .eeg import FeatureConfig, GnbModel, Standardization
from .fusion import TrialResult
from .gaze import (ConfidenceEllipse, DegenerateError, EmptyTrialError,
                   HeatmapGrid, InsufficientDataError, NoPupilDataError,
                   PupilSummary, centroid, confidence_ellipse, heatmap,
                   pupil_summary)

FORMAT_VERSION = 1

GAZE_COLUMNS = ["t_us", "lx_px", "ly_px", "rx_px", "ry_px",
                "lpupil_mm", "rpupil_mm", "lvalid", "rvalid"]
EVENT_COLUMNS = ["t_us", "trial", "aoi_id", "is_target"]


class SchemaError(DomainError):
    """A file does not match the expected schema or value constraints."""


class CrossRefError(DomainError):
    """A reference between files (or to a file) cannot be resolved."""


class MonotonicityError(DomainError):
    """Timestamps in a stream are not strictly increasing."""


def fmt_real(x: float) -> str:
    """Render a real with 17 significant digits (exact double round-trip)."""
    return f"{x:.17g}"


def _parse_real(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise SchemaError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise SchemaError(f"{where}: non-finite value {text!r}")
    return v


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise SchemaError(f"{where}: not an integer: {text!r}") from None


@dataclass(frozen=True)
class SessionManifest:
    """Session metadata and the map of its on-disk parts."""

    session_id: str
    subject: str
    screen_w: int
    screen_h: int
    gaze_rate_hz: float
    eeg_rate_hz: float
    feature_dim: int
    trial_windows: Tuple[Tuple[int, int, int], ...]  # (trial, start_us, end_us)
    files: Dict[str, str] = field(default_factory=lambda: {
        "gaze": "gaze.csv", "events": "events.csv",
        "features": "features.csv", "layout": "layout.json"})
    targets: Optional[Dict[int, int]] = None  # trial -> target aoi_id

    def __post_init__(self) -> None:
        if self.gaze_rate_hz <= 0 or self.eeg_rate_hz <= 0:
            raise SchemaError("sample rates must be positive")
        prev_end = None
        prev_trial = None
        for trial, start, end in self.trial_windows:
            if start >= end:
                raise SchemaError(f"trial {trial}: empty window")
            if prev_end is not None and start < prev_end:
                raise SchemaError(f"trial {trial}: window overlaps the previous one")
            if prev_trial is not None and trial <= prev_trial:
                raise SchemaError(f"trial numbers must ascend, got {trial} after {prev_trial}")
            prev_end, prev_trial = end, trial

    def window_of(self, trial: int) -> Tuple[int, int]:
        for t, start, end in self.trial_windows:
            if t == trial:
                return (start, end)
        raise CrossRefError(f"no window for trial {trial}")


@dataclass(frozen=True)
class Session:
    """A fully loaded (or about to be saved) session.

    ``gaze`` is the complete stream including inter-trial samples; each
    bundle holds only the slice inside its own window.
    """

    manifest: SessionManifest
    layout: AoiLayout
    gaze: Tuple[GazeSample, ...]
    bundles: Tuple[TrialBundle, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gaze", tuple(self.gaze))
        object.__setattr__(self, "bundles", tuple(self.bundles))

    @property
    def windows(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((s, e) for _, s, e in self.manifest.trial_windows)


def _check_keys(doc: dict, allowed: Sequence[str], where: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")
    missing = set(allowed) - set(doc)
    if missing:
        raise SchemaError(f"{where}: missing fields {sorted(missing)}")


def save_layout(layout: AoiLayout, path: Path) -> None:
    doc = {
        "version": FORMAT_VERSION,
        "screen_w": layout.screen_w,
        "screen_h": layout.screen_h,
        "aois": [
            {"id": a.id, "word": a.word, "x": a.x, "y": a.y, "w": a.w, "h": a.h}
            for a in layout.aois
        ],
    }
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_layout(path: Path) -> AoiLayout:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: invalid JSON: {exc}") from None
    _check_keys(doc, ["version", "screen_w", "screen_h", "aois"], path.name)
    if doc["version"] != FORMAT_VERSION:
        raise SchemaError(f"{path.name}: unsupported version {doc['version']}")
    aois = []
    for item in doc["aois"]:
        _check_keys(item, ["id", "word", "x", "y", "w", "h"], f"{path.name} aoi")
        aois.append(Aoi(id=int(item["id"]), word=str(item["word"]),
                        x=float(item["x"]), y=float(item["y"]),
                        w=float(item["w"]), h=float(item["h"])))
    try:
        return validate_layout(AoiLayout(screen_w=int(doc["screen_w"]),
                                         screen_h=int(doc["screen_h"]),
                                         aois=tuple(aois)))
    except DomainError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path.name}: {exc}") from None


def _manifest_to_dict(m: SessionManifest) -> dict:
    return {
        "version": FORMAT_VERSION,
        "session_id": m.session_id,
        "subject": m.subject,
        "screen_w": m.screen_w,
        "screen_h": m.screen_h,
        "gaze_rate_hz": m.gaze_rate_hz,
        "eeg_rate_hz": m.eeg_rate_hz,
        "feature_dim": m.feature_dim,
        "trial_windows": [
            {"trial": t, "start_us": s, "end_us": e} for t, s, e in m.trial_windows
        ],
        "files": dict(m.files),
        "targets": ({str(k): v for k, v in sorted(m.targets.items())}
                    if m.targets is not None else None),
    }


def _manifest_from_dict(doc: dict, where: str) -> SessionManifest:
    _check_keys(doc, ["version", "session_id", "subject", "screen_w", "screen_h",
                      "gaze_rate_hz", "eeg_rate_hz", "feature_dim", "trial_windows",
                      "files", "targets"], where)
    if doc["version"] != FORMAT_VERSION:
        raise SchemaError(f"{where}: unsupported version {doc['version']}")
    windows = []
    for w in doc["trial_windows"]:
        _check_keys(w, ["trial", "start_us", "end_us"], f"{where} trial_windows")
        windows.append((int(w["trial"]), int(w["start_us"]), int(w["end_us"])))
    files = doc["files"]
    _check_keys(files, ["gaze", "events", "features", "layout"], f"{where} files")
    targets = doc["targets"]
    if targets is not None:
        targets = {int(k): int(v) for k, v in targets.items()}
    return SessionManifest(
        session_id=str(doc["session_id"]),
        subject=str(doc["subject"]),
        screen_w=int(doc["screen_w"]),
        screen_h=int(doc["screen_h"]),
        gaze_rate_hz=float(doc["gaze_rate_hz"]),
        eeg_rate_hz=float(doc["eeg_rate_hz"]),
        feature_dim=int(doc["feature_dim"]),
        trial_windows=tuple(windows),
        files={k: str(v) for k, v in files.items()},
        targets=targets,
    )


def _gaze_row(s: GazeSample) -> list:
    def pt(p, idx):
        return fmt_real(p[idx]) if p is not None else ""
    def pup(d):
        return fmt_real(d) if d is not None else ""
    return [
        str(s.t_us),
        pt(s.left, 0), pt(s.left, 1),
        pt(s.right, 0), pt(s.right, 1),
        pup(s.pupil_left), pup(s.pupil_right),
        "1" if s.left is not None else "0",
        "1" if s.right is not None else "0",
    ]


def _gaze_from_row(row: Sequence[str], line: int) -> GazeSample:
    where = f"gaze.csv line {line}"
    if len(row) != len(GAZE_COLUMNS):
        raise SchemaError(f"{where}: expected {len(GAZE_COLUMNS)} fields, got {len(row)}")
    t = _parse_int(row[0], where)
    lvalid, rvalid = row[7], row[8]
    if lvalid not in ("0", "1") or rvalid not in ("0", "1"):
        raise SchemaError(f"{where}: validity flags must be 0 or 1")

    def eye(flag: str, xs: str, ys: str, side: str):
        present = flag == "1"
        if present != (xs != "" and ys != ""):
            raise SchemaError(f"{where}: {side} validity flag disagrees with coordinates")
        if not present:
            if xs or ys:
                raise SchemaError(f"{where}: {side} marked invalid but has coordinates")
            return None
        return (_parse_real(xs, where), _parse_real(ys, where))

    def pupil(text: str):
        return _parse_real(text, where) if text else None

    try:
        return GazeSample(
            t_us=t,
            left=eye(lvalid, row[1], row[2], "left"),
            right=eye(rvalid, row[3], row[4], "right"),
            pupil_left=pupil(row[5]),
            pupil_right=pupil(row[6]),
        )
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def save_session(session: Session, path: Path) -> None:
    """Write a session directory; see the module docstring for the schema."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    m = session.manifest
    save_layout(session.layout, path / m.files["layout"])

    with (path / m.files["gaze"]).open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(GAZE_COLUMNS)
        for s in session.gaze:
            w.writerow(_gaze_row(s))

    with (path / m.files["events"]).open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for b in session.bundles:
            for e in b.events:
                flag = "" if e.is_target is None else ("1" if e.is_target else "0")
                w.writerow([str(e.t_us), str(e.trial), str(e.aoi_id), flag])

    with (path / m.files["features"]).open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["trial", "event_idx", "aoi_id"] +
                   [f"f_{d}" for d in range(m.feature_dim)])
        for b in session.bundles:
            for i, e in enumerate(b.events):
                w.writerow([str(b.trial), str(i), str(e.aoi_id)] +
                           [fmt_real(v) for v in b.features[i]])

    (path / "manifest.json").write_text(
        json.dumps(_manifest_to_dict(m), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")


def _read_csv(path: Path, columns: Sequence[str]) -> list:
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: missing header row") from None
        if header != list(columns):
            raise SchemaError(f"{path.name}: header {header} != expected {list(columns)}")
        return list(reader)


def load_session(path: Path) -> Session:
    """Load and fully validate a session directory.

    Gaze samples outside every trial window are kept on the session for
    inter-trial pupil analysis. Raises SchemaError, CrossRefError or
    MonotonicityError on malformed input.
    """
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise CrossRefError(f"no manifest.json in {path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest.json: invalid JSON: {exc}") from None
    manifest = _manifest_from_dict(doc, "manifest.json")

    for kind, name in manifest.files.items():
        if not (path / name).exists():
            raise CrossRefError(f"manifest references missing {kind} file {name!r}")
    layout = load_layout(path / manifest.files["layout"])
    if (layout.screen_w, layout.screen_h) != (manifest.screen_w, manifest.screen_h):
        raise SchemaError("manifest screen size disagrees with layout")

    gaze: list[GazeSample] = []
    prev_t = None
    for i, row in enumerate(_read_csv(path / manifest.files["gaze"], GAZE_COLUMNS), start=2):
        s = _gaze_from_row(row, i)
        if prev_t is not None and s.t_us <= prev_t:
            raise MonotonicityError(f"gaze.csv line {i}: t_us {s.t_us} not after {prev_t}")
        prev_t = s.t_us
        gaze.append(s)

    aoi_ids = {a.id for a in layout.aois}
    events: list[StimulusEvent] = []
    prev_t = None
    for i, row in enumerate(_read_csv(path / manifest.files["events"], EVENT_COLUMNS), start=2):
        where = f"events.csv line {i}"
        if len(row) != len(EVENT_COLUMNS):
            raise SchemaError(f"{where}: expected {len(EVENT_COLUMNS)} fields")
        t = _parse_int(row[0], where)
        trial = _parse_int(row[1], where)
        aoi_id = _parse_int(row[2], where)
        if aoi_id not in aoi_ids:
            raise CrossRefError(f"{where}: unknown AOI id {aoi_id}")
        if row[3] not in ("", "0", "1"):
            raise SchemaError(f"{where}: is_target must be blank, 0 or 1")
        is_target = None if row[3] == "" else row[3] == "1"
        if prev_t is not None and t <= prev_t:
            raise MonotonicityError(f"{where}: t_us {t} not after {prev_t}")
        prev_t = t
        events.append(StimulusEvent(t_us=t, trial=trial, aoi_id=aoi_id, is_target=is_target))

    feature_cols = ["trial", "event_idx", "aoi_id"] + \
                   [f"f_{d}" for d in range(manifest.feature_dim)]
    features: dict[Tuple[int, int], Tuple[int, np.ndarray]] = {}
    for i, row in enumerate(_read_csv(path / manifest.files["features"], feature_cols), start=2):
        where = f"features.csv line {i}"
        if len(row) != len(feature_cols):
            raise SchemaError(f"{where}: expected {len(feature_cols)} fields")
        key = (_parse_int(row[0], where), _parse_int(row[1], where))
        if key in features:
            raise CrossRefError(f"{where}: duplicate feature row for trial/event {key}")
        aoi_id = _parse_int(row[2], where)
        values = np.array([_parse_real(v, where) for v in row[3:]], dtype=np.float64)
        features[key] = (aoi_id, values)

    bundles = []
    known_trials = set()
    for trial, start, end in manifest.trial_windows:
        known_trials.add(trial)
        trial_events = [e for e in events if e.trial == trial]
        for e in trial_events:
            if not (start <= e.t_us < end):
                raise SchemaError(f"trial {trial}: event at t={e.t_us} outside its window")
        rows = []
        for idx, e in enumerate(trial_events):
            if (trial, idx) not in features:
                raise CrossRefError(f"trial {trial}: no feature row for event {idx}")
            f_aoi, values = features[(trial, idx)]
            if f_aoi != e.aoi_id:
                raise CrossRefError(
                    f"trial {trial} event {idx}: features AOI {f_aoi} != event AOI {e.aoi_id}")
            rows.append(values)
        extra = [k for k in features if k[0] == trial and k[1] >= len(trial_events)]
        if extra:
            raise CrossRefError(f"trial {trial}: feature rows {extra} without events")
        target = manifest.targets.get(trial) if manifest.targets else None
        if target is not None and target not in aoi_ids:
            raise CrossRefError(f"trial {trial}: target AOI {target} not in layout")
        for e in trial_events:
            if target is not None and e.is_target is not None:
                if e.is_target != (e.aoi_id == target):
                    raise SchemaError(
                        f"trial {trial}: is_target flag disagrees with ground truth")
        try:
            bundles.append(TrialBundle(
                trial=trial,
                window_us=(start, end),
                gaze=tuple(s for s in gaze if start <= s.t_us < end),
                events=tuple(trial_events),
                features=(np.vstack(rows) if rows
                          else np.empty((0, manifest.feature_dim), dtype=np.float64)),
                target_aoi=target,
            ))
        except ValueError as exc:
            raise SchemaError(str(exc)) from None

    orphans = {e.trial for e in events} - known_trials
    if orphans:
        raise CrossRefError(f"events reference trials without windows: {sorted(orphans)}")
    orphan_feats = {k[0] for k in features} - known_trials
    if orphan_feats:
        raise CrossRefError(f"feature rows reference unknown trials: {sorted(orphan_feats)}")

    return Session(manifest=manifest, layout=layout, gaze=tuple(gaze), bundles=tuple(bundles))


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def save_model(model: GnbModel, path: Path) -> None:
    """Serialize a trained model as a versioned JSON document."""
    doc = {
        "version": FORMAT_VERSION,
        "D": model.n_dims,
        "priors": {"target": model.prior_target, "nontarget": model.prior_nontarget},
        "means": {"target": model.mean_target.tolist(),
                  "nontarget": model.mean_nontarget.tolist()},
        "variances": {"target": model.var_target.tolist(),
                      "nontarget": model.var_nontarget.tolist()},
        "feature_config": (model.feature_config.to_dict()
                           if model.feature_config is not None else None),
        "standardization": (None if model.standardization is None else {
            "mean": model.standardization.mean.tolist(),
            "sd": model.standardization.sd.tolist(),
        }),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path: Path) -> GnbModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: invalid JSON: {exc}") from None
    where = path.name
    _check_keys(doc, ["version", "D", "priors", "means", "variances",
                      "feature_config", "standardization"], where)
    if doc["version"] != FORMAT_VERSION:
        raise SchemaError(f"{where}: unsupported version {doc['version']}")
    dim = int(doc["D"])
    _check_keys(doc["priors"], ["target", "nontarget"], f"{where} priors")
    _check_keys(doc["means"], ["target", "nontarget"], f"{where} means")
    _check_keys(doc["variances"], ["target", "nontarget"], f"{where} variances")

    def vec(values, label: str) -> np.ndarray:
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (dim,):
            raise SchemaError(f"{where}: {label} length {arr.shape} != D={dim}")
        return arr

    std = doc["standardization"]
    if std is not None:
        _check_keys(std, ["mean", "sd"], f"{where} standardization")
        std = Standardization(mean=vec(std["mean"], "standardization mean"),
                              sd=vec(std["sd"], "standardization sd"))
    fc = doc["feature_config"]
    if fc is not None:
        fc = FeatureConfig.from_dict(fc)
    try:
        return GnbModel(
            prior_target=float(doc["priors"]["target"]),
            prior_nontarget=float(doc["priors"]["nontarget"]),
            mean_target=vec(doc["means"]["target"], "target mean"),
            mean_nontarget=vec(doc["means"]["nontarget"], "nontarget mean"),
            var_target=vec(doc["variances"]["target"], "target variance"),
            var_nontarget=vec(doc["variances"]["nontarget"], "nontarget variance"),
            standardization=std,
            feature_config=fc,
        )
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# Report export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionAnalytics:
    """Per-trial gaze analytics of one session."""

    ellipses: Dict[int, Optional[ConfidenceEllipse]]
    centroids: Dict[int, Optional[Tuple[float, float]]]
    pupil: Optional[PupilSummary]
    heatmap: HeatmapGrid


def compute_session_analytics(session: Session, coverage: float = 0.95,
                              bin_px: int = 20, smooth_sigma: float = 20.0) -> SessionAnalytics:
    """Ellipse + centroid per trial, pupil split, and the session heatmap."""
    ellipses: Dict[int, Optional[ConfidenceEllipse]] = {}
    centroids: Dict[int, Optional[Tuple[float, float]]] = {}
    for b in session.bundles:
        try:
            ellipses[b.trial] = confidence_ellipse(b.gaze, coverage)
        except (DegenerateError, InsufficientDataError, EmptyTrialError):
            ellipses[b.trial] = None
        try:
            centroids[b.trial] = centroid(b.gaze)
        except EmptyTrialError:
            centroids[b.trial] = None
    try:
        pupil = pupil_summary(session.gaze, session.windows)
    except NoPupilDataError:
        pupil = None
    grid = heatmap(session.gaze, session.manifest.screen_w, session.manifest.screen_h,
                   bin_px=bin_px, smooth_sigma=smooth_sigma)
    return SessionAnalytics(ellipses=ellipses, centroids=centroids, pupil=pupil, heatmap=grid)


def export_report(results: Sequence[TrialResult], analytics: SessionAnalytics,
                  layout: AoiLayout, out_dir: Path) -> dict:
    """Write the per-session report files; returns the summary dict.

    Produces decisions.csv, scores_et.csv, scores_eeg.csv, ellipse.csv,
    pupil.csv, summary.json and overlay.svg under ``out_dir``.
    """
    if not results:
        raise DomainError("no decisions to export")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_aois = layout.n_aois

    with (out_dir / "decisions.csv").open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["trial", "chosen", "truth", "mode", "correct"])
        for r in results:
            w.writerow([
                str(r.trial),
                "" if r.decision.chosen_aoi is None else str(r.decision.chosen_aoi),
                "" if r.truth is None else str(r.truth),
                r.decision.mode,
                "" if r.correct is None else ("1" if r.correct else "0"),
            ])

    for name, attr in (("scores_et.csv", "c_et"), ("scores_eeg.csv", "c_eeg")):
        with (out_dir / name).open("w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["trial"] + [f"aoi_{k}" for k in range(1, n_aois + 1)])
            for r in results:
                w.writerow([str(r.trial)] + [fmt_real(v) for v in getattr(r.decision, attr)])

    with (out_dir / "ellipse.csv").open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["trial", "center_x_px", "center_y_px", "semi_major_px",
                    "semi_minor_px", "angle_rad", "area_px2"])
        for trial in sorted(analytics.ellipses):
            e = analytics.ellipses[trial]
            if e is None:
                w.writerow([str(trial), "", "", "", "", "", ""])
            else:
                w.writerow([str(trial), fmt_real(e.center[0]), fmt_real(e.center[1]),
                            fmt_real(e.semi_axes[0]), fmt_real(e.semi_axes[1]),
                            fmt_real(e.orientation), fmt_real(e.area)])

    with (out_dir / "pupil.csv").open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["trial", "median_mm"])
        if analytics.pupil is not None:
            for i, med in enumerate(analytics.pupil.per_trial_medians, start=1):
                w.writerow([str(i), "" if math.isnan(med) else fmt_real(med)])

    scored = [r for r in results if r.truth is not None]
    n_correct = sum(1 for r in scored if r.correct)
    summary = {
        "version": FORMAT_VERSION,
        "n_trials": len(results),
        "n_scored": len(scored),
        "n_correct": n_correct,
        "accuracy": (n_correct / len(scored)) if scored else None,
        "pupil": (None if analytics.pupil is None else {
            "trial_median_mm": analytics.pupil.trial_median,
            "trial_sd_mm": analytics.pupil.trial_sd,
            "intertrial_median_mm": analytics.pupil.intertrial_median,
            "intertrial_sd_mm": analytics.pupil.intertrial_sd,
        }),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    (out_dir / "overlay.svg").write_text(
        _overlay_svg(results, analytics, layout), encoding="utf-8")
    return summary


def _color_scale(v: float, rgb: Tuple[int, int, int]) -> str:
    """Blend white toward ``rgb`` by fraction v in [0, 1]."""
    v = min(max(v, 0.0), 1.0)
    r = round(255 + (rgb[0] - 255) * v)
    g = round(255 + (rgb[1] - 255) * v)
    b = round(255 + (rgb[2] - 255) * v)
    return f"rgb({r},{g},{b})"


def _overlay_svg(results: Sequence[TrialResult], analytics: SessionAnalytics,
                 layout: AoiLayout) -> str:
    """Heatmap + ellipse overlay plus the two trial-by-AOI score colormaps.

    The EEG colormap is rendered on a log10 scale to keep contrast between
    near-1 and near-0 confidences visible.
    """
    scale = 0.5
    sw, sh = layout.screen_w * scale, layout.screen_h * scale
    cell = 24
    matrix_w = layout.n_aois * cell + 60
    width = int(sw + 2 * matrix_w + 80)
    height = int(max(sh + 40, len(results) * cell + 100))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect x="20" y="20" width="{sw:.1f}" height="{sh:.1f}" '
        f'fill="#111" stroke="#444"/>',
    ]
    grid = analytics.heatmap
    peak = grid.density.max()
    if peak > 0:
        b = grid.bin_px * scale
        rows, cols = grid.shape
        for iy in range(rows):
            for ix in range(cols):
                v = grid.density[iy, ix]
                if v <= 0:
                    continue
                parts.append(
                    f'<rect x="{20 + ix * b:.2f}" y="{20 + iy * b:.2f}" '
                    f'width="{b:.2f}" height="{b:.2f}" fill="#ff8800" '
                    f'fill-opacity="{0.85 * v / peak:.4f}"/>')
    for a in layout.aois:
        parts.append(
            f'<rect x="{20 + a.x * scale:.1f}" y="{20 + a.y * scale:.1f}" '
            f'width="{a.w * scale:.1f}" height="{a.h * scale:.1f}" '
            f'fill="none" stroke="#8899aa"/>')
        cx, cy = a.center
        parts.append(
            f'<text x="{20 + cx * scale:.1f}" y="{20 + cy * scale:.1f}" fill="#cccccc" '
            f'font-size="14" text-anchor="middle">{a.word}</text>')
    for trial in sorted(analytics.ellipses):
        e = analytics.ellipses[trial]
        if e is None:
            continue
        cx, cy = 20 + e.center[0] * scale, 20 + e.center[1] * scale
        deg = math.degrees(e.orientation)
        parts.append(
            f'<ellipse cx="{cx:.2f}" cy="{cy:.2f}" rx="{e.semi_axes[0] * scale:.2f}" '
            f'ry="{e.semi_axes[1] * scale:.2f}" transform="rotate({deg:.2f} {cx:.2f} {cy:.2f})" '
            f'fill="none" stroke="#00ccff"/>')
        c = analytics.centroids.get(trial)
        if c is not None:
            parts.append(
                f'<text x="{20 + c[0] * scale:.2f}" y="{20 + c[1] * scale:.2f}" fill="#00ccff" '
                f'font-size="12" text-anchor="middle">X</text>')

    def matrix(x0: float, title: str, values, color, transform=None) -> None:
        parts.append(f'<text x="{x0}" y="40" fill="#222" font-size="13">{title}</text>')
        vals = [[transform(v) if transform else v for v in row] for row in values]
        flat = [v for row in vals for v in row]
        lo, hi = min(flat), max(flat)
        span = (hi - lo) or 1.0
        for r, row in enumerate(vals):
            parts.append(
                f'<text x="{x0 - 6}" y="{64 + r * cell + cell / 2:.0f}" fill="#222" '
                f'font-size="10" text-anchor="end">{results[r].trial}</text>')
            for kk, v in enumerate(row):
                parts.append(
                    f'<rect x="{x0 + kk * cell}" y="{50 + r * cell}" width="{cell}" '
                    f'height="{cell}" fill="{_color_scale((v - lo) / span, color)}" '
                    f'stroke="#dddddd"/>')

    mx = sw + 60
    matrix(mx, "gaze score per AOI",
           [r.decision.c_et for r in results], (20, 60, 200))
    # Confidences can reach 0 exactly; keep the log argument positive.
    matrix(mx + matrix_w, "EEG score per AOI (log10)",
           [r.decision.c_eeg for r in results], (200, 30, 30),
           transform=lambda v: math.log10(max(v, 1e-12)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
