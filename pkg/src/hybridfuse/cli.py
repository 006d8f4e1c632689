"""Command-line surface for the whole pipeline.

Subcommands: simulate, train, classify, analyze, report, serve. Exit code
0 on success, 1 on a domain error (bad data, bad config values), 2 on a
usage error (argparse). The HYBRIDFUSE_DATA_DIR environment variable
overrides the default session root used when paths are not given.
"""
from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import DomainError, default_layout
from .eeg import train_gnb
from .fusion import FusionConfig, TrialResult, classify_trial
from .gaze import (EmptyTrialError, InsufficientDataError, DegenerateError,
                   NoPupilDataError, aoi_confidences, confidence_ellipse,
                   heatmap, pupil_summary)
from .server import ServeConfig, serve
from .session_io import (Session, compute_session_analytics, export_report,
                         load_layout, load_model, load_session, save_model)
from .simulate import SimConfig, synth_session


def data_root() -> Path:
    return Path(os.environ.get("HYBRIDFUSE_DATA_DIR", "sessions"))


def _resolve_session(arg: str) -> Path:
    p = Path(arg)
    if (p / "manifest.json").exists():
        return p
    return data_root() / arg


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {text}")
    return v


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _nonneg(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _priors(text: str) -> Tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("priors must be two comma-separated numbers")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numbers: {text!r}") from None


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=_fraction, default=0.85,
                   help="minimum gaze confidence to accept an EEG candidate")
    p.add_argument("--eeg-mode", choices=("posterior", "literal"), default="posterior",
                   help="per-event confidence reading")
    p.add_argument("--fallback", choices=("eeg-argmax", "reject"), default="eeg-argmax",
                   help="policy when no candidate passes the gaze gate")
    p.add_argument("--denominator", choices=("all-valid", "on-screen"), default="all-valid",
                   help="gaze confidence denominator")


def _fusion_from_args(args: argparse.Namespace) -> FusionConfig:
    return FusionConfig(threshold=args.threshold, eeg_mode=args.eeg_mode,
                        fallback_policy=args.fallback, et_denominator=args.denominator)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridfuse",
        description="Gaze + EEG hybrid speller pipeline: simulate, train, "
                    "classify, analyze, report, serve.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic session directories")
    p.add_argument("--out", type=Path, default=None,
                   help="output root (default: data root)")
    p.add_argument("--subjects", type=int, default=5)
    p.add_argument("--trials", type=int, default=9, help="trials per subject")
    p.add_argument("--aois", type=int, default=7)
    p.add_argument("--repetitions", type=int, default=10, help="flashes per AOI per trial")
    p.add_argument("--gaze-sigma", type=_positive, default=40.0,
                   help="gaze dispersion around the attended word, px")
    p.add_argument("--gaze-p", type=_fraction, default=0.9,
                   help="probability a gaze sample is on the attended word")
    p.add_argument("--eeg-sep", type=_nonneg, default=3.0,
                   help="standardized target/non-target feature separation")
    p.add_argument("--pupil-baseline", type=_positive, default=3.1552, help="mm")
    p.add_argument("--pupil-trial", type=_positive, default=3.2945, help="mm")
    p.add_argument("--pupil-noise", type=_nonneg, default=0.05, help="mm sd")
    p.add_argument("--invalid-p", type=_fraction, default=0.0,
                   help="probability a gaze sample is eye-not-detected")
    p.add_argument("--flash-ms", type=_positive, default=100.0)
    p.add_argument("--isi-ms", type=_nonneg, default=75.0)
    p.add_argument("--intertrial-ms", type=_nonneg, default=3000.0)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="fit the event classifier on sessions")
    p.add_argument("sessions", nargs="+", help="session directories (or names under the data root)")
    p.add_argument("--model", type=Path, required=True, help="output model JSON path")
    p.add_argument("--priors", type=_priors, default=None,
                   help="override class priors as 'target,nontarget'")
    p.add_argument("--raw", action="store_true",
                   help="skip per-dimension feature standardization")

    p = sub.add_parser("classify", help="decide every trial of the given sessions")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--model", type=Path, required=True)
    _add_fusion_flags(p)
    p.add_argument("--report", type=Path, default=None,
                   help="also export a report directory per session under this root")

    p = sub.add_parser("analyze", help="gaze analytics of one session")
    p.add_argument("session")
    p.add_argument("what", choices=("gaze", "ellipse", "pupil", "heatmap"))
    p.add_argument("--coverage", type=_fraction, default=0.95)
    p.add_argument("--bin-px", type=int, default=20)
    p.add_argument("--smooth", type=_nonneg, default=20.0, help="heatmap smoothing sigma, px")
    p.add_argument("--denominator", choices=("all-valid", "on-screen"), default="all-valid")

    p = sub.add_parser("report", help="classify one session and export the full report")
    p.add_argument("session")
    p.add_argument("--model", type=Path, required=True)
    _add_fusion_flags(p)
    p.add_argument("--out", type=Path, default=None,
                   help="report directory (default: <data root>/reports/<session id>)")

    p = sub.add_parser("serve", help="run the live trial service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765, help="0 picks a free port")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--layout", type=Path, default=None,
                   help="layout JSON (default: the standard 7-word grid)")
    _add_fusion_flags(p)
    p.add_argument("--trials", type=int, default=7, help="trials per live session")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--flash-ms", type=_positive, default=100.0)
    p.add_argument("--isi-ms", type=_nonneg, default=75.0)
    p.add_argument("--eeg-sep", type=_nonneg, default=6.0,
                   help="scripted live EEG separation (no amplifier attached)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record", type=Path, default=None,
                   help="root for recorded live sessions (default: <data root>/live)")
    p.add_argument("--once", action="store_true",
                   help="exit after the first client disconnects")
    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = SimConfig(
        subjects=args.subjects,
        trials_per_subject=args.trials,
        n_aois=args.aois,
        repetitions=args.repetitions,
        gaze_sigma_px=args.gaze_sigma,
        gaze_on_target_p=args.gaze_p,
        eeg_separation=args.eeg_sep,
        pupil_baseline_mm=args.pupil_baseline,
        pupil_trial_mm=args.pupil_trial,
        pupil_noise_sd_mm=args.pupil_noise,
        gaze_invalid_p=args.invalid_p,
        flash_ms=args.flash_ms,
        isi_ms=args.isi_ms,
        intertrial_ms=args.intertrial_ms,
        feature_dim=args.feature_dim,
        seed=args.seed,
    )
    out = args.out if args.out is not None else data_root()
    for path in synth_session(cfg, out):
        print(path)
    return 0


def _load_sessions(names: Sequence[str]) -> List[Session]:
    return [load_session(_resolve_session(n)) for n in names]


def _training_matrix(sessions: Sequence[Session]) -> Tuple[np.ndarray, np.ndarray]:
    rows: List[np.ndarray] = []
    labels: List[bool] = []
    for sess in sessions:
        for b in sess.bundles:
            for i, e in enumerate(b.events):
                label = e.is_target
                if label is None:
                    if b.target_aoi is None:
                        raise DomainError(
                            f"session {sess.manifest.session_id} trial {b.trial} "
                            "has no ground truth to train on")
                    label = e.aoi_id == b.target_aoi
                rows.append(b.features[i])
                labels.append(label)
    if not rows:
        raise DomainError("no events in the given sessions")
    try:
        x = np.vstack(rows)
    except ValueError:
        raise DomainError("feature dimensions differ across sessions") from None
    return x, np.asarray(labels, dtype=bool)


def cmd_train(args: argparse.Namespace) -> int:
    sessions = _load_sessions(args.sessions)
    x, y = _training_matrix(sessions)
    model = train_gnb(x, y, priors=args.priors, standardize=not args.raw)
    args.model.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.model)
    print(f"trained on {x.shape[0]} events ({int(y.sum())} target, "
          f"{int((~y).sum())} non-target), D={x.shape[1]} -> {args.model}")
    return 0


def _classify_session(sess: Session, model, cfg: FusionConfig) -> List[TrialResult]:
    return [
        TrialResult(trial=b.trial, truth=b.target_aoi,
                    decision=classify_trial(b, model, sess.layout, cfg))
        for b in sess.bundles
    ]


def _subject_line(sess: Session, results: Sequence[TrialResult]) -> str:
    scored = [r for r in results if r.truth is not None]
    n_correct = sum(1 for r in scored if r.correct)
    modes = [r.decision.mode for r in results]
    tally = (f"fused={modes.count('fused')} "
             f"fallback={modes.count('fallback-eeg')} rejected={modes.count('rejected')}")
    if scored:
        pct = 100.0 * n_correct / len(scored)
        return (f"{sess.manifest.session_id}: {n_correct}/{len(scored)} correct "
                f"({pct:.1f}%) {tally}")
    return f"{sess.manifest.session_id}: {len(results)} trials, no ground truth, {tally}"


def cmd_classify(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    cfg = _fusion_from_args(args)
    total_scored = 0
    total_correct = 0
    for name in args.sessions:
        sess = load_session(_resolve_session(name))
        results = _classify_session(sess, model, cfg)
        print(_subject_line(sess, results))
        scored = [r for r in results if r.truth is not None]
        total_scored += len(scored)
        total_correct += sum(1 for r in scored if r.correct)
        if args.report is not None:
            analytics = compute_session_analytics(sess)
            export_report(results, analytics, sess.layout,
                          args.report / sess.manifest.session_id)
    if len(args.sessions) > 1 and total_scored:
        pct = 100.0 * total_correct / total_scored
        print(f"overall: {total_correct}/{total_scored} correct ({pct:.1f}%)")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    sess = load_session(_resolve_session(args.session))
    if args.what == "gaze":
        words = [a.word for a in sess.layout.aois]
        print("trial  " + "  ".join(f"{w:>8s}" for w in words) + "    used invalid")
        for b in sess.bundles:
            try:
                et = aoi_confidences(b.gaze, sess.layout, denominator=args.denominator)
            except EmptyTrialError:
                print(f"{b.trial:5d}  (no usable gaze)")
                continue
            cells = "  ".join(f"{v:8.4f}" for v in et.per_aoi)
            print(f"{b.trial:5d}  {cells}  {et.n_used:6d} {et.n_invalid:7d}")
    elif args.what == "ellipse":
        print("trial  center_x  center_y  semi_major  semi_minor  angle_deg      area")
        for b in sess.bundles:
            try:
                e = confidence_ellipse(b.gaze, coverage=args.coverage)
            except (InsufficientDataError, DegenerateError) as exc:
                print(f"{b.trial:5d}  ({exc})")
                continue
            print(f"{b.trial:5d}  {e.center[0]:8.1f}  {e.center[1]:8.1f}  "
                  f"{e.semi_axes[0]:10.1f}  {e.semi_axes[1]:10.1f}  "
                  f"{np.degrees(e.orientation):9.1f}  {e.area:8.0f}")
    elif args.what == "pupil":
        try:
            p = pupil_summary(sess.gaze, sess.windows)
        except NoPupilDataError as exc:
            raise DomainError(str(exc)) from None
        print(f"trial median      {p.trial_median:.4f} mm (sd {p.trial_sd:.4f})")
        print(f"intertrial median {p.intertrial_median:.4f} mm (sd {p.intertrial_sd:.4f})")
        print(f"difference        {p.trial_median - p.intertrial_median:.4f} mm")
    else:
        grid = heatmap(sess.gaze, sess.manifest.screen_w, sess.manifest.screen_h,
                       bin_px=args.bin_px, smooth_sigma=args.smooth)
        rows, cols = grid.shape
        iy, ix = np.unravel_index(int(np.argmax(grid.density)), grid.density.shape)
        print(f"grid {rows}x{cols} at {grid.bin_px} px/bin, {grid.n_points} points")
        print(f"peak bin ({int(ix)},{int(iy)}) = pixel rect "
              f"[{int(ix) * grid.bin_px},{int(iy) * grid.bin_px}]+{grid.bin_px}px, "
              f"density {grid.density[iy, ix]:.3f}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    sess = load_session(_resolve_session(args.session))
    model = load_model(args.model)
    results = _classify_session(sess, model, _fusion_from_args(args))
    analytics = compute_session_analytics(sess)
    out = args.out if args.out is not None else \
        data_root() / "reports" / sess.manifest.session_id
    summary = export_report(results, analytics, sess.layout, out)
    print(_subject_line(sess, results))
    if summary["accuracy"] is not None:
        print(f"accuracy {summary['accuracy']:.4f} -> {out}")
    else:
        print(f"no ground truth -> {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    layout = load_layout(args.layout) if args.layout is not None else default_layout()
    record = args.record if args.record is not None else data_root() / "live"
    cfg = ServeConfig(
        model=model,
        layout=layout,
        fusion=_fusion_from_args(args),
        trials=args.trials,
        repetitions=args.repetitions,
        flash_ms=args.flash_ms,
        isi_ms=args.isi_ms,
        eeg_separation=args.eeg_sep,
        seed=args.seed,
        record_dir=record,
    )
    try:
        asyncio.run(serve(cfg, host=args.host, port=args.port, once=args.once))
    except KeyboardInterrupt:
        pass
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "classify": cmd_classify,
    "analyze": cmd_analyze,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
