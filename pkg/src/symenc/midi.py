"""Standard MIDI File (format 0/1) reader producing performance documents."""

from __future__ import annotations

import bisect
import struct
import warnings
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import IngestWarning, ParseError, UnsupportedFormat
from .model import Modality, NoteEvent, PedalEvent, PieceDoc, canonicalize

DEFAULT_TEMPO = 500_000  # microseconds per quarter note
PEDAL_CONTROLLERS = {64: "sustain", 66: "sostenuto", 67: "una_corda"}
PEDAL_THRESHOLD = 64


@dataclass
class TempoMap:
    ticks_per_quarter: int
    entries: list = field(default_factory=list)  # (tick, microseconds_per_quarter)

    def __post_init__(self):
        if self.ticks_per_quarter <= 0:
            raise ValueError("ticks_per_quarter must be positive")
        latest = {}
        for tick, tempo in self.entries:
            latest[int(tick)] = int(tempo)
        if 0 not in latest:
            latest[0] = DEFAULT_TEMPO
        self.entries = sorted(latest.items())
        self._ticks = [t for t, _ in self.entries]
        # exact elapsed time (in microseconds * ticks_per_quarter) at each entry
        self._elapsed = [Fraction(0)]
        for (t0, us), (t1, _) in zip(self.entries, self.entries[1:]):
            self._elapsed.append(self._elapsed[-1] + Fraction((t1 - t0) * us, self.ticks_per_quarter))

    def exact_seconds(self, tick: int) -> Fraction:
        i = bisect.bisect_right(self._ticks, tick) - 1
        t0, us = self.entries[i]
        micro = self._elapsed[i] + Fraction((tick - t0) * us, self.ticks_per_quarter)
        return micro / 1_000_000

    @property
    def min_seconds_per_tick(self) -> float:
        return min(us for _, us in self.entries) / 1e6 / self.ticks_per_quarter


def ticks_to_seconds(tick: int, tempo_map: TempoMap) -> float:
    """Seconds elapsed at ``tick``, rounded to the nearest nanosecond."""
    if tick < 0:
        raise ValueError("tick must be non-negative")
    return round(tempo_map.exact_seconds(tick) * 1_000_000_000) / 1e9


def _read_varlen(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= end:
            raise ParseError("truncated variable-length quantity", offset=pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise ParseError("variable-length quantity longer than 4 bytes", offset=pos)


# channel message data lengths by status high nibble
_DATA_BYTES = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _read_track(data: bytes, start: int, end: int, track: int):
    """Yield ``(tick, track, seq, kind, payload)`` events of one MTrk chunk."""
    events = []
    pos, tick, status, seq = start, 0, None, 0
    while pos < end:
        delta, pos = _read_varlen(data, pos, end)
        tick += delta
        if pos >= end:
            raise ParseError("event truncated after delta time", offset=pos)
        byte = data[pos]
        if byte == 0xFF:
            if pos + 2 > end:
                raise ParseError("truncated meta event", offset=pos)
            mtype = data[pos + 1]
            length, pos = _read_varlen(data, pos + 2, end)
            if pos + length > end:
                raise ParseError("meta event overruns track", offset=pos)
            payload = data[pos:pos + length]
            pos += length
            if mtype == 0x51 and length == 3:
                events.append((tick, track, seq, "tempo", int.from_bytes(payload, "big")))
            elif mtype == 0x2F:
                events.append((tick, track, seq, "end", None))
                seq += 1
                break
            seq += 1
            continue
        if byte in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos + 1, end)
            pos += length
            if pos > end:
                raise ParseError("sysex overruns track", offset=pos)
            status = None
            continue
        if byte & 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise ParseError("data byte without running status", offset=pos)
        kind = status & 0xF0
        n = _DATA_BYTES.get(kind)
        if n is None:
            raise ParseError(f"unsupported status byte 0x{status:02X}", offset=pos)
        if pos + n > end:
            raise ParseError("channel message truncated", offset=pos)
        d = data[pos:pos + n]
        pos += n
        channel = status & 0x0F
        if kind == 0x90 and d[1] > 0:
            events.append((tick, track, seq, "on", (channel, d[0], d[1])))
        elif kind == 0x80 or kind == 0x90:
            events.append((tick, track, seq, "off", (channel, d[0])))
        elif kind == 0xB0 and d[0] in PEDAL_CONTROLLERS:
            events.append((tick, track, seq, "cc", (channel, d[0], d[1])))
        seq += 1
    return events, tick


def parse_smf(data: bytes, piece_id: str = "") -> PieceDoc:
    """Parse a Standard MIDI File into a canonical performance document.

    Note-ons are paired with note-offs per (channel, pitch) in FIFO order;
    a note-on with velocity 0 counts as note-off. Sustain (CC64),
    sostenuto (CC66) and una corda (CC67) are on while the controller
    value is >= 64. Notes still sounding when their track ends are closed
    there and an :class:`IngestWarning` is issued.
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise ParseError("missing MThd header", offset=0)
    (hlen,) = struct.unpack(">I", data[4:8])
    if hlen < 6 or 8 + hlen > len(data):
        raise ParseError(f"bad header length {hlen}", offset=4)
    fmt, ntracks, division = struct.unpack(">HHH", data[8:14])
    if fmt == 2:
        raise UnsupportedFormat("SMF format 2 is not supported")
    if fmt not in (0, 1):
        raise ParseError(f"unknown SMF format {fmt}", offset=8)
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise ParseError("ticks per quarter must be positive", offset=12)

    pos = 8 + hlen
    events, track_end, track = [], [], 0
    while pos < len(data) and track < ntracks:
        if pos + 8 > len(data):
            raise ParseError("truncated chunk header", offset=pos)
        ctype = data[pos:pos + 4]
        (clen,) = struct.unpack(">I", data[pos + 4:pos + 8])
        body = pos + 8
        if body + clen > len(data):
            raise ParseError(f"chunk length {clen} overruns file", offset=pos + 4)
        if ctype == b"MTrk":
            evs, last_tick = _read_track(data, body, body + clen, track)
            events.extend(evs)
            track_end.append(last_tick)
            track += 1
        pos = body + clen
    if track < ntracks:
        warnings.warn(f"header declares {ntracks} tracks, found {track}", IngestWarning, stacklevel=2)

    events.sort(key=lambda e: (e[0], e[1], e[2]))
    tempo_map = TempoMap(division, [(e[0], e[4]) for e in events if e[3] == "tempo"])

    sec = {}

    def seconds(tick):
        if tick not in sec:
            sec[tick] = ticks_to_seconds(tick, tempo_map)
        return sec[tick]

    open_notes = defaultdict(deque)  # (channel, pitch) -> deque[(tick, velocity, track)]
    pedal_on = {}  # (channel, controller) -> (tick, track)
    raw_notes, raw_pedals = [], []
    for tick, trk, _, kind, payload in events:
        if kind == "on":
            ch, pitch, vel = payload
            open_notes[(ch, pitch)].append((tick, vel, trk))
        elif kind == "off":
            queue = open_notes.get(payload)
            if queue:
                on_tick, vel, _ = queue.popleft()
                raw_notes.append((payload[1], on_tick, tick, vel))
        elif kind == "cc":
            ch, cc, value = payload
            key = (ch, cc)
            if value >= PEDAL_THRESHOLD and key not in pedal_on:
                pedal_on[key] = (tick, trk)
            elif value < PEDAL_THRESHOLD and key in pedal_on:
                on_tick, _ = pedal_on.pop(key)
                raw_pedals.append((PEDAL_CONTROLLERS[cc], on_tick, tick))

    dangling = 0
    for (ch, pitch), queue in open_notes.items():
        for on_tick, vel, trk in queue:
            raw_notes.append((pitch, on_tick, max(track_end[trk], on_tick), vel))
            dangling += 1
    if dangling:
        warnings.warn(f"{dangling} note(s) left open; closed at end of track", IngestWarning, stacklevel=2)
    for (ch, cc), (on_tick, trk) in pedal_on.items():
        raw_pedals.append((PEDAL_CONTROLLERS[cc], on_tick, max(track_end[trk], on_tick)))

    notes = []
    for pitch, on_tick, off_tick, vel in raw_notes:
        on = seconds(on_tick)
        notes.append(NoteEvent(pitch=pitch, onset=on, duration=seconds(off_tick) - on, velocity=vel))
    pedals = []
    for kind, on_tick, off_tick in raw_pedals:
        if off_tick > on_tick:
            on = seconds(on_tick)
            pedals.append(PedalEvent(kind, on, seconds(off_tick) - on))

    doc = PieceDoc(
        modality=Modality.PERFORMANCE,
        notes=notes,
        pedals=pedals,
        piece_id=piece_id,
        quantum=tempo_map.min_seconds_per_tick,
    )
    return canonicalize(doc)


def read_midi(path, piece_id: str | None = None) -> PieceDoc:
    from pathlib import Path

    path = Path(path)
    return parse_smf(path.read_bytes(), piece_id=piece_id if piece_id is not None else path.stem)
