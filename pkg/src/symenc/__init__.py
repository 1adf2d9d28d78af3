"""Encode symbolic music as piano rolls, token sequences and note graphs."""

from .errors import (
    DecodeError,
    EmptyPiece,
    FixtureMissing,
    ParseError,
    SymencError,
    UnsupportedCombination,
    UnsupportedFormat,
    ZeroVariance,
)
from .graph import GraphConfig, NoteGraph, build_graph, to_homogeneous
from .matrix import MatrixConfig, PianoRoll, build_roll
from .midi import parse_smf, read_midi
from .model import FeatureLevel, Modality, NoteEvent, PedalEvent, PieceDoc, canonicalize, validate
from .musicxml import parse_musicxml, read_musicxml
from .segmentation import SplitPlan, Window, leakage_audit, make_folds, segment, slice_window

__version__ = "0.1.0"

__all__ = [
    "DecodeError", "EmptyPiece", "FeatureLevel", "FixtureMissing", "GraphConfig", "MatrixConfig",
    "Modality", "NoteEvent", "NoteGraph", "ParseError", "PedalEvent", "PianoRoll", "PieceDoc",
    "SplitPlan", "SymencError", "UnsupportedCombination", "UnsupportedFormat", "Window", "ZeroVariance",
    "build_graph", "build_roll", "canonicalize", "leakage_audit", "make_folds", "parse_musicxml",
    "parse_smf", "read_midi", "read_musicxml", "segment", "slice_window", "to_homogeneous", "validate",
]
