"""Hybrid gaze + EEG speller pipeline.

Fuses eye-tracking confidence with an EEG event classifier to decide which
word of an on-screen grid a user attends to, with synthetic data
generation, session persistence, analytics, a CLI, and a live service.
"""
from .core import (Aoi, AoiLayout, BoundsError, DomainError, GazeSample,
                   IdError, LayoutError, OverlapError, StimulusEvent,
                   TrialBundle, DEFAULT_WORDS, default_layout, mono_point,
                   mono_pupil, validate_layout)
from .gaze import (ConfidenceEllipse, DegenerateError, EmptyTrialError,
                   EtConfidence, HeatmapGrid, InsufficientDataError,
                   NoPupilDataError, PupilSummary, aoi_confidences, centroid,
                   chi2_quantile_2dof, confidence_ellipse, heatmap,
                   pupil_summary)
from .eeg import (ClassMissingError, DimensionError, FeatureConfig,
                  FeatureVector, GnbModel, MissingAoiError, ScorePair,
                  ShapeError, Standardization, TrialEegScores,
                  aggregate_trial, bayes_scores, extract_features,
                  target_confidence, train_gnb)
from .fusion import (FusionConfig, FusionDecision, LengthMismatchError,
                     TrialResult, classify_trial, fuse)
from .simulate import (InfeasibleError, SimConfig, make_sequence, sim_layout,
                       synth_session, synth_subject, synth_trial)
from .session_io import (CrossRefError, MonotonicityError, SchemaError,
                         Session, SessionAnalytics, SessionManifest,
                         compute_session_analytics, export_report,
                         load_layout, load_model, load_session, save_layout,
                         save_model, save_session)
from .server import LiveServer, LiveSessionState, ServeConfig, serve

__version__ = "0.1.0"

__all__ = [
    "Aoi", "AoiLayout", "BoundsError", "DomainError", "GazeSample", "IdError",
    "LayoutError", "OverlapError", "StimulusEvent", "TrialBundle",
    "DEFAULT_WORDS", "default_layout", "mono_point", "mono_pupil",
    "validate_layout",
    "ConfidenceEllipse", "DegenerateError", "EmptyTrialError", "EtConfidence",
    "HeatmapGrid", "InsufficientDataError", "NoPupilDataError", "PupilSummary",
    "aoi_confidences", "centroid", "chi2_quantile_2dof", "confidence_ellipse",
    "heatmap", "pupil_summary",
    "ClassMissingError", "DimensionError", "FeatureConfig", "FeatureVector",
    "GnbModel", "MissingAoiError", "ScorePair", "ShapeError",
    "Standardization", "TrialEegScores", "aggregate_trial", "bayes_scores",
    "extract_features", "target_confidence", "train_gnb",
    "FusionConfig", "FusionDecision", "LengthMismatchError", "TrialResult",
    "classify_trial", "fuse",
    "InfeasibleError", "SimConfig", "make_sequence", "sim_layout",
    "synth_session", "synth_subject", "synth_trial",
    "CrossRefError", "MonotonicityError", "SchemaError", "Session",
    "SessionAnalytics", "SessionManifest", "compute_session_analytics",
    "export_report", "load_layout", "load_model", "load_session",
    "save_layout", "save_model", "save_session",
    "LiveServer", "LiveSessionState", "ServeConfig", "serve",
    "__version__",
]
