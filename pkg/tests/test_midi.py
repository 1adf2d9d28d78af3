import struct
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symenc.errors import IngestWarning, ParseError
from symenc.midi import TempoMap, parse_smf, ticks_to_seconds
from symenc.testing import random_performance, write_smf, write_smf_ticks


def track(events: bytes) -> bytes:
    body = events + b"\x00\xff\x2f\x00"
    return b"MThd" + struct.pack(">IHHH", 6, 0, 1, 480) + b"MTrk" + struct.pack(">I", len(body)) + body


def test_single_note_default_tempo():
    doc = parse_smf(write_smf_ticks([(0, 480, 60, 80)]))
    (n,) = doc.notes
    assert (n.pitch, n.onset, n.duration, n.velocity) == (60, 0.0, 0.5, 80)


def test_tempo_event_halves_duration():
    doc = parse_smf(write_smf_ticks([(0, 480, 60, 80)], tempos=[(0, 250_000)]))
    assert doc.notes[0].duration == 0.25


def test_empty_bytes_raise():
    with pytest.raises(ParseError):
        parse_smf(b"")


def test_truncated_chunk_reports_offset():
    data = write_smf_ticks([(0, 480, 60, 80)])
    with pytest.raises(ParseError) as info:
        parse_smf(data[:-3])
    assert info.value.offset is not None


def test_ticks_to_seconds_examples():
    plain = TempoMap(480)
    assert ticks_to_seconds(0, plain) == 0.0
    assert ticks_to_seconds(960, plain) == 1.0
    assert ticks_to_seconds(480, TempoMap(480, [(240, 250_000)])) == 0.375


def test_velocity_zero_note_on_is_note_off_and_running_status():
    # note-on 60 v=80, then running-status note-on 60 v=0 after 480 ticks
    doc = parse_smf(track(b"\x00\x90\x3c\x50" + b"\x83\x60\x3c\x00"))
    assert [(n.pitch, n.duration) for n in doc.notes] == [(60, 0.5)]


def test_overlapping_same_pitch_pairs_fifo():
    events = (b"\x00\x90\x3c\x50"  # on v80 at 0
              b"\x83\x60\x90\x3c\x28"  # on v40 at 480
              b"\x83\x60\x80\x3c\x00"  # off at 960 closes the first
              b"\x83\x60\x80\x3c\x00")  # off at 1440 closes the second
    doc = parse_smf(track(events))
    assert [(n.onset, n.duration, n.velocity) for n in doc.notes] == [(0.0, 1.0, 80), (0.5, 1.0, 40)]


def test_dangling_note_closed_at_track_end_with_warning():
    events = b"\x00\x90\x3c\x50" + b"\x83\x60\xb0\x07\x64"
    with pytest.warns(IngestWarning):
        doc = parse_smf(track(events))
    assert doc.notes[0].duration == 0.5


def test_pedal_threshold_and_kinds():
    data = write_smf_ticks([(0, 1920, 60, 80)], pedals=[(64, 0, 480), (66, 480, 960), (67, 960, 1920)])
    doc = parse_smf(data)
    assert [(p.kind, p.onset, p.duration) for p in doc.pedals] == [
        ("sustain", 0.0, 0.5), ("sostenuto", 0.5, 0.5), ("una_corda", 1.0, 1.0)]


def test_format1_tracks_merge():
    def chunk(events):
        body = events + b"\x00\xff\x2f\x00"
        return b"MTrk" + struct.pack(">I", len(body)) + body

    tempo = chunk(b"\x00\xff\x51\x03" + (250_000).to_bytes(3, "big"))
    notes = chunk(b"\x00\x91\x40\x50\x83\x60\x81\x40\x00")
    data = b"MThd" + struct.pack(">IHHH", 6, 1, 2, 480) + tempo + notes
    (n,) = parse_smf(data).notes
    assert (n.pitch, n.duration) == (64, 0.25)


@given(st.lists(st.integers(0, 100_000), min_size=2, max_size=20),
       st.lists(st.tuples(st.integers(0, 50_000), st.integers(100_000, 2_000_000)), max_size=5))
def test_ticks_to_seconds_monotone(ticks, changes):
    tmap = TempoMap(480, changes)
    values = [ticks_to_seconds(t, tmap) for t in sorted(ticks)]
    assert values == sorted(values)


@given(st.integers(0, 2**31))
def test_writer_roundtrip_within_one_ns(seed):
    rng = np.random.default_rng(seed)
    # timing on the tick grid of 480 tpq at 120 bpm
    doc = random_performance(rng, 30, span=10.0, grid=1 / 960, pedals=False)
    back = parse_smf(write_smf(doc))
    assert len(back.notes) == len(doc.notes)
    for a, b in zip(doc.notes, back.notes):
        assert a.pitch == b.pitch and a.velocity == b.velocity
        assert abs(a.onset - b.onset) <= 1e-9 and abs(a.offset - b.offset) <= 1e-9


def _naive_pairs(notes):
    events = []
    for on, off, pitch, _ in notes:
        events += [(on, 1, pitch), (off, 0, pitch)]
    open_, count = {}, 0
    for _, kind, pitch in sorted(events):
        if kind:
            open_[pitch] = open_.get(pitch, 0) + 1
        elif open_.get(pitch):
            open_[pitch] -= 1
            count += 1
    return count


@given(st.lists(st.tuples(st.integers(0, 5000), st.integers(1, 2000), st.integers(40, 44), st.integers(1, 127)),
                min_size=1, max_size=40))
def test_note_count_matches_event_scan(raw):
    notes = [(on, on + d, p, v) for on, d, p, v in raw]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        doc = parse_smf(write_smf_ticks(notes), piece_id="x")
    expected = _naive_pairs(notes)
    # canonicalize drops exact duplicates, the scan does not
    dupes = len(notes) - len({(on, off, p) for on, off, p, _ in notes})
    assert expected - dupes <= len(doc.notes) <= expected
