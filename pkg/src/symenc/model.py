"""In-memory model of a piece: notes, pedals and score context.

Performance times are seconds, score times are beats (quarter note = 1.0).
The unit is implied by the modality and never mixed inside a document.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyPiece


class Modality(str, Enum):
    PERFORMANCE = "performance"
    SCORE = "score"


class FeatureLevel(str, Enum):
    BASIC = "basic"
    ADVANCED = "advanced"


ARTICULATIONS = ("staccato", "accent", "tenuto")
PEDAL_KINDS = ("sustain", "sostenuto", "una_corda")

# ordinal scale used for score dynamics; absent markings stay None
DYNAMIC_LEVELS = {"ppp": 0, "pp": 1, "p": 2, "mp": 3, "mf": 4, "f": 5, "ff": 6, "fff": 7}

# fallback when a document does not declare its smallest time step
DEFAULT_QUANTUM = {Modality.PERFORMANCE: 1e-3, Modality.SCORE: 1.0 / 480}

# nominal window lengths: 60 s for performances, 120 beats for scores
WINDOW_LENGTH = {Modality.PERFORMANCE: 60.0, Modality.SCORE: 120.0}

# integer time grid used by the encoders: 1 ns, or 1e-9 beat
TICKS_PER_UNIT = 10**9


@dataclass(frozen=True)
class NoteEvent:
    pitch: int
    onset: float
    duration: float
    velocity: int | None = None
    voice: int | None = None
    measure_index: int | None = None
    articulation_flags: frozenset = frozenset()
    dynamic_level: int | None = None
    grace: bool = False
    staff: int | None = None
    part: int | None = None

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class PedalEvent:
    kind: str
    onset: float
    duration: float

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class PieceDoc:
    modality: Modality
    notes: tuple = ()
    pedals: tuple = ()
    time_signatures: tuple = ()  # (measure_index, numerator, denominator)
    key_signatures: tuple = ()  # (measure_index, fifths)
    piece_id: str = ""
    labels: dict = field(default_factory=dict)
    quantum: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "modality", Modality(self.modality))
        object.__setattr__(self, "notes", tuple(self.notes))
        object.__setattr__(self, "pedals", tuple(self.pedals))
        object.__setattr__(self, "time_signatures", tuple(tuple(t) for t in self.time_signatures))
        object.__setattr__(self, "key_signatures", tuple(tuple(k) for k in self.key_signatures))

    @property
    def is_score(self) -> bool:
        return self.modality is Modality.SCORE

    @property
    def effective_quantum(self) -> float:
        return self.quantum if self.quantum else DEFAULT_QUANTUM[self.modality]

    @property
    def end_time(self) -> float:
        """Largest note offset; 0.0 for an empty document."""
        return max((n.offset for n in self.notes), default=0.0)

    def replace(self, **changes) -> "PieceDoc":
        return dataclasses.replace(self, **changes)

    def arrays(self) -> dict[str, np.ndarray]:
        """Column view of the notes, used by the numeric encoders."""
        notes = self.notes
        return {
            "pitch": np.array([n.pitch for n in notes], dtype=np.int64),
            "onset": np.array([n.onset for n in notes], dtype=np.float64),
            "duration": np.array([n.duration for n in notes], dtype=np.float64),
            "velocity": np.array([n.velocity or 0 for n in notes], dtype=np.int64),
            "voice": np.array([n.voice or 0 for n in notes], dtype=np.int64),
        }


def to_ticks(values) -> np.ndarray:
    """Map seconds/beats onto the integer encoder grid."""
    return np.rint(np.asarray(values, dtype=np.float64) * TICKS_PER_UNIT).astype(np.int64)


def _sort_key(note: NoteEvent):
    return (note.onset, note.pitch, -note.duration)


def canonicalize(doc: PieceDoc) -> PieceDoc:
    """Return the canonical form of ``doc``.

    Non-positive durations are clamped to the document quantum, exact
    duplicates (pitch, onset, duration) are dropped and notes are sorted by
    onset, then pitch, then longer duration first. Score notes without a
    voice get voice 1.
    """
    if not doc.notes:
        raise EmptyPiece(f"piece {doc.piece_id!r} has no notes")
    quantum = doc.effective_quantum
    seen = set()
    notes = []
    for note in doc.notes:
        if not note.duration > 0:
            note = dataclasses.replace(note, duration=quantum)
        if doc.is_score and note.voice is None:
            note = dataclasses.replace(note, voice=1)
        key = (note.pitch, note.onset, note.duration)
        if key in seen:
            continue
        seen.add(key)
        notes.append(note)
    notes.sort(key=_sort_key)
    pedals = sorted(doc.pedals, key=lambda p: (p.onset, PEDAL_KINDS.index(p.kind), p.duration))
    return doc.replace(
        notes=tuple(notes),
        pedals=tuple(pedals),
        time_signatures=tuple(sorted(doc.time_signatures)),
        key_signatures=tuple(sorted(doc.key_signatures)),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int | None
    detail: str = ""

    def __str__(self):
        return f"{self.kind}@{self.index}" if self.index is not None else self.kind


def validate(doc: PieceDoc) -> list[Violation]:
    """Report every invariant violation; an empty list means the doc is valid."""
    out = []
    score = doc.is_score
    prev_key = None
    for i, n in enumerate(doc.notes):
        if not 0 <= n.pitch <= 127:
            out.append(Violation("PitchOutOfRange", i, f"pitch={n.pitch}"))
        if not n.duration > 0:
            out.append(Violation("NonPositiveDuration", i, f"duration={n.duration}"))
        if score:
            if n.velocity is not None:
                out.append(Violation("ModalityFieldMismatch", i, "score note has velocity"))
            if n.voice is None or n.voice < 1:
                out.append(Violation("VoiceOutOfRange", i, f"voice={n.voice}"))
        else:
            if n.voice is not None or n.measure_index is not None:
                out.append(Violation("ModalityFieldMismatch", i, "performance note has score fields"))
            if n.velocity is None or not 1 <= n.velocity <= 127:
                out.append(Violation("VelocityOutOfRange", i, f"velocity={n.velocity}"))
        if n.dynamic_level is not None and not 0 <= n.dynamic_level <= 7:
            out.append(Violation("DynamicOutOfRange", i, f"dynamic_level={n.dynamic_level}"))
        unknown = set(n.articulation_flags) - set(ARTICULATIONS)
        if unknown:
            out.append(Violation("UnknownArticulation", i, ",".join(sorted(unknown))))
        key = _sort_key(n)
        if prev_key is not None and key < prev_key:
            out.append(Violation("UnsortedNotes", i))
        prev_key = key
    for i, p in enumerate(doc.pedals):
        if score:
            out.append(Violation("ModalityFieldMismatch", i, "score document has pedals"))
        if p.kind not in PEDAL_KINDS:
            out.append(Violation("UnknownPedal", i, p.kind))
        if not p.duration > 0:
            out.append(Violation("NonPositivePedalDuration", i))
    if not score and (doc.time_signatures or doc.key_signatures):
        out.append(Violation("ModalityFieldMismatch", None, "performance document has signatures"))
    return out


# -- JSON ---------------------------------------------------------------------

def _note_to_json(n: NoteEvent) -> dict:
    return {
        "pitch": n.pitch,
        "onset": n.onset,
        "duration": n.duration,
        "velocity": n.velocity,
        "voice": n.voice,
        "measure_index": n.measure_index,
        "articulation_flags": sorted(n.articulation_flags),
        "dynamic_level": n.dynamic_level,
        "grace": n.grace,
        "staff": n.staff,
        "part": n.part,
    }


def doc_to_dict(doc: PieceDoc) -> dict:
    return {
        "modality": doc.modality.value,
        "piece_id": doc.piece_id,
        "notes": [_note_to_json(n) for n in doc.notes],
        "pedals": [{"kind": p.kind, "onset": p.onset, "duration": p.duration} for p in doc.pedals],
        "time_signatures": [list(t) for t in doc.time_signatures],
        "key_signatures": [list(k) for k in doc.key_signatures],
        "labels": dict(doc.labels),
        "quantum": doc.quantum,
    }


def doc_from_dict(data: dict) -> PieceDoc:
    notes = [
        NoteEvent(
            pitch=int(n["pitch"]),
            onset=float(n["onset"]),
            duration=float(n["duration"]),
            velocity=n.get("velocity"),
            voice=n.get("voice"),
            measure_index=n.get("measure_index"),
            articulation_flags=frozenset(n.get("articulation_flags", ())),
            dynamic_level=n.get("dynamic_level"),
            grace=bool(n.get("grace", False)),
            staff=n.get("staff"),
            part=n.get("part"),
        )
        for n in data.get("notes", ())
    ]
    pedals = [PedalEvent(p["kind"], float(p["onset"]), float(p["duration"])) for p in data.get("pedals", ())]
    return PieceDoc(
        modality=Modality(data["modality"]),
        notes=notes,
        pedals=pedals,
        time_signatures=[tuple(t) for t in data.get("time_signatures", ())],
        key_signatures=[tuple(k) for k in data.get("key_signatures", ())],
        piece_id=data.get("piece_id", ""),
        labels=dict(data.get("labels", {})),
        quantum=data.get("quantum"),
    )


def dumps(doc: PieceDoc) -> str:
    return json.dumps(doc_to_dict(doc), indent=1)


def loads(text: str) -> PieceDoc:
    return doc_from_dict(json.loads(text))


def notes_in(doc: PieceDoc, start: float, end: float) -> list[NoteEvent]:
    """Notes whose onset lies in ``[start, end)``."""
    return [n for n in doc.notes if start <= n.onset < end]

