import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from symenc.errors import EmptyPiece
from symenc.model import (Modality, NoteEvent, PedalEvent, PieceDoc, canonicalize, dumps, loads,
                          notes_in, to_ticks, validate)


def perf(*notes, **kw):
    return PieceDoc(Modality.PERFORMANCE, notes, **kw)


def note(pitch, onset, duration=1.0, velocity=64, **kw):
    return NoteEvent(pitch=pitch, onset=onset, duration=duration, velocity=velocity, **kw)


def test_canonicalize_sorts_by_onset_then_pitch():
    doc = canonicalize(perf(note(64, 1.0), note(60, 0.0)))
    assert [(n.pitch, n.onset) for n in doc.notes] == [(60, 0.0), (64, 1.0)]


def test_canonicalize_drops_exact_duplicates():
    doc = canonicalize(perf(note(60, 0.0), note(60, 0.0)))
    assert len(doc.notes) == 1


def test_zero_duration_clamped_to_quantum():
    doc = PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 0.0, voice=1)], quantum=1 / 480)
    assert canonicalize(doc).notes[0].duration == pytest.approx(1 / 480)


def test_equal_onset_and_pitch_longer_first():
    doc = canonicalize(perf(note(60, 0.0, 1.0), note(60, 0.0, 2.0)))
    assert [n.duration for n in doc.notes] == [2.0, 1.0]


def test_score_voice_defaults_to_one():
    doc = canonicalize(PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 1.0)]))
    assert doc.notes[0].voice == 1


def test_empty_piece_rejected():
    with pytest.raises(EmptyPiece):
        canonicalize(perf())


def test_validate_reports_problems():
    assert validate(canonicalize(perf(note(60, 0.0)))) == []
    assert [str(v) for v in validate(perf(note(200, 0.0)))] == ["PitchOutOfRange@0"]
    bad = PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 1.0, velocity=80, voice=1)])
    assert [str(v) for v in validate(bad)] == ["ModalityFieldMismatch@0"]


def test_validate_flags_pedals_on_scores_and_unsorted_notes():
    score = PieceDoc(Modality.SCORE, [NoteEvent(60, 0.0, 1.0, voice=1)], pedals=[PedalEvent("sustain", 0, 1)])
    assert any(v.kind == "ModalityFieldMismatch" for v in validate(score))
    assert any(v.kind == "UnsortedNotes" for v in validate(perf(note(60, 1.0), note(60, 0.0))))


def test_offset_is_onset_plus_duration():
    n = note(60, 0.1, 0.2)
    assert n.offset == 0.1 + 0.2


def test_json_roundtrip_keeps_fields():
    doc = canonicalize(PieceDoc(
        Modality.SCORE,
        [NoteEvent(60, 0.5, 1 / 3, voice=2, measure_index=0, articulation_flags=frozenset({"accent"}),
                   dynamic_level=3, grace=True, staff=1, part=0)],
        time_signatures=[(0, 3, 4)], key_signatures=[(0, -2)], piece_id="x", labels={"composer": "a"},
    ))
    text = dumps(doc)
    assert set(json.loads(text)) >= {"modality", "piece_id", "notes", "pedals", "time_signatures",
                                     "key_signatures", "labels"}
    assert loads(text) == doc


def test_notes_in_half_open():
    doc = canonicalize(perf(note(60, 0.0), note(62, 1.0), note(64, 2.0)))
    assert [n.pitch for n in notes_in(doc, 1.0, 2.0)] == [62]


def test_to_ticks_grid():
    assert to_ticks([0.5, 1e-9]).tolist() == [500_000_000, 1]


notes_strategy = st.lists(
    st.builds(
        note,
        st.integers(0, 127),
        st.floats(0, 100, allow_nan=False).map(lambda x: round(x, 3)),
        st.floats(-1, 5, allow_nan=False).map(lambda x: round(x, 3)),
        st.integers(1, 127),
    ),
    min_size=1, max_size=40,
)


@given(notes_strategy)
def test_canonicalize_idempotent_and_valid(notes):
    doc = canonicalize(perf(*notes))
    assert canonicalize(doc) == doc
    assert validate(doc) == []
