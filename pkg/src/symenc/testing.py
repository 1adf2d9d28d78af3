"""Synthetic inputs for tests, verification suites and benchmarks.

``write_smf`` is a minimal Standard MIDI File writer (format 0) used to
round-trip documents through the parser; it is not a general MIDI exporter.
"""

from __future__ import annotations

import struct
from fractions import Fraction

import numpy as np

from .model import ARTICULATIONS, Modality, NoteEvent, PedalEvent, PieceDoc, canonicalize

PEDAL_CC = {"sustain": 64, "sostenuto": 66, "una_corda": 67}


def _varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def seconds_to_ticks(seconds: float, ticks_per_quarter: int = 480, tempo: int = 500_000) -> int:
    """Nearest tick under a constant tempo (microseconds per quarter)."""
    return int(round(Fraction(seconds).limit_denominator(10**9) * ticks_per_quarter * 10**6 / tempo))


def write_smf(doc: PieceDoc, ticks_per_quarter: int = 480, tempo: int = 500_000,
              tempo_changes=(), channel: int = 0) -> bytes:
    """Encode a performance as a format-0 SMF at a constant tempo.

    Times are rounded to the nearest tick. ``tempo_changes`` is an optional
    list of ``(tick, microseconds_per_quarter)`` written verbatim; note
    times are still converted with ``tempo``, so only pass it for files
    whose timing is given in ticks (see :func:`write_smf_ticks`).
    """
    notes = [(seconds_to_ticks(n.onset, ticks_per_quarter, tempo),
              seconds_to_ticks(n.offset, ticks_per_quarter, tempo), n.pitch, n.velocity or 64)
             for n in doc.notes]
    pedals = [(PEDAL_CC[p.kind], seconds_to_ticks(p.onset, ticks_per_quarter, tempo),
               seconds_to_ticks(p.offset, ticks_per_quarter, tempo)) for p in doc.pedals]
    tempos = [(0, tempo)] + list(tempo_changes)
    return write_smf_ticks(notes, ticks_per_quarter, tempos, pedals, channel)


def write_smf_ticks(notes, ticks_per_quarter: int = 480, tempos=((0, 500_000),), pedals=(),
                    channel: int = 0) -> bytes:
    """Format-0 SMF from ``(on_tick, off_tick, pitch, velocity)`` tuples."""
    events = []  # (tick, order, bytes); offs sort before ons at equal ticks
    for tick, value in tempos:
        events.append((tick, 0, b"\xff\x51\x03" + value.to_bytes(3, "big")))
    for cc, on, off in pedals:
        events.append((on, 2, bytes([0xB0 | channel, cc, 127])))
        events.append((off, 1, bytes([0xB0 | channel, cc, 0])))
    for i, (on, off, pitch, vel) in enumerate(notes):
        events.append((on, 3, bytes([0x90 | channel, pitch, vel])))
        events.append((off, 1, bytes([0x80 | channel, pitch, 0])))
    events.sort(key=lambda e: (e[0], e[1]))
    body = bytearray()
    last = 0
    for tick, _, data in events:
        body += _varlen(tick - last) + data
        last = tick
    body += b"\x00\xff\x2f\x00"
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, ticks_per_quarter)
    return header + b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


# -- random documents ---------------------------------------------------------

def random_performance(rng: np.random.Generator, n_notes: int = 50, span: float = 30.0,
                       grid: float = 0.001, chord_prob: float = 0.2, legato_prob: float = 0.2,
                       pedals: bool = True, piece_id: str = "") -> PieceDoc:
    """Performance with times on a ``grid``-second lattice.

    Some notes share an onset with the previous note (chords) or start
    exactly where an earlier note ends (legato), so equality predicates get
    exercised. Same-pitch notes never overlap, as on a real keyboard.
    """
    steps = int(round(span / grid))
    notes = []
    busy: dict[int, list] = {}
    attempts = 0
    while len(notes) < n_notes and attempts < 20 * n_notes:
        attempts += 1
        r = rng.random()
        if notes and r < chord_prob:
            on = notes[int(rng.integers(len(notes)))][0]
        elif notes and r < chord_prob + legato_prob:
            on = notes[int(rng.integers(len(notes)))][1]
        else:
            on = int(rng.integers(0, steps))
        off = on + int(rng.integers(1, max(2, int(2.0 / grid))))
        pitch = int(rng.integers(21, 109))
        if any(a < off and on < b for a, b in busy.get(pitch, ())):
            continue
        busy.setdefault(pitch, []).append((on, off))
        notes.append((on, off, pitch, int(rng.integers(1, 128))))
    events = [NoteEvent(pitch=p, onset=on * grid, duration=(off - on) * grid, velocity=v)
              for on, off, p, v in notes]
    pedal_events = []
    if pedals:
        for kind in ("sustain", "sostenuto", "una_corda"):
            t = int(rng.integers(0, steps // 4 + 1))
            while t < steps and rng.random() < 0.7:
                length = int(rng.integers(1, max(2, steps // 8)))
                pedal_events.append(PedalEvent(kind, t * grid, length * grid))
                t += length + int(rng.integers(1, max(2, steps // 8)))
    return canonicalize(PieceDoc(Modality.PERFORMANCE, events, pedal_events, piece_id=piece_id, quantum=grid))


def random_score(rng: np.random.Generator, n_notes: int = 50, measures: int = 12,
                 time_signatures=((4, 4), (3, 4), (6, 8)), subdivision: int = 12,
                 max_voice: int = 4, piece_id: str = "") -> PieceDoc:
    """Score with onsets on a ``1/subdivision`` beat lattice.

    Measures follow a random walk over ``time_signatures`` (changes happen
    at measure starts); measure indices, voices, articulations, dynamics
    and grace flags are filled in consistently.
    """
    sigs = [time_signatures[int(rng.integers(len(time_signatures)))]]
    table = [(0, *sigs[0])]
    for m in range(1, measures):
        if rng.random() < 0.2:
            sig = time_signatures[int(rng.integers(len(time_signatures)))]
            if sig != sigs[-1]:
                table.append((m, *sig))
            sigs.append(sig)
        else:
            sigs.append(sigs[-1])
    lengths = [Fraction(4 * n, d) for n, d in sigs]
    starts = [Fraction(0)]
    for length in lengths[:-1]:
        starts.append(starts[-1] + length)
    total = starts[-1] + lengths[-1]
    steps = int(total * subdivision)
    notes = []
    for _ in range(n_notes):
        r = rng.random()
        if notes and r < 0.25:
            on = notes[int(rng.integers(len(notes)))][0]
        elif notes and r < 0.45:
            on = notes[int(rng.integers(len(notes)))][1]
            if on >= steps:
                on = int(rng.integers(0, steps))
        else:
            on = int(rng.integers(0, steps))
        dur = int(rng.integers(1, 4 * subdivision + 1))
        notes.append((on, on + dur))
    events = []
    for on, off in notes:
        onset = Fraction(on, subdivision)
        measure = max(i for i, s in enumerate(starts) if s <= onset)
        flags = frozenset(a for a in ARTICULATIONS if rng.random() < 0.1)
        dyn = int(rng.integers(0, 8)) if rng.random() < 0.3 else None
        events.append(NoteEvent(
            pitch=int(rng.integers(21, 109)), onset=float(onset), duration=(off - on) / subdivision,
            voice=int(rng.integers(1, max_voice + 1)), measure_index=measure,
            articulation_flags=flags, dynamic_level=dyn, grace=bool(rng.random() < 0.03),
            staff=int(rng.integers(1, 3)), part=0,
        ))
    keys = [(0, int(rng.integers(-7, 8)))]
    if measures > 4 and rng.random() < 0.5:
        keys.append((int(rng.integers(1, measures)), int(rng.integers(-7, 8))))
    return canonicalize(PieceDoc(Modality.SCORE, events, time_signatures=table, key_signatures=keys,
                                 piece_id=piece_id, quantum=1.0 / subdivision))
