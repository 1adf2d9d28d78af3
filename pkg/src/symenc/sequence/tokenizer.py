"""Tokenize documents under MIDILike, REMI and CPWord grammars, and back.

Grammars (one token group per note, in canonical note order):

* MIDILike (performances only): ``[Velocity] NoteOn`` at the onset and
  ``NoteOff`` at the offset, with ``TimeShift`` tokens between events.
* REMI: ``Bar`` per bar (empty bars included), then per note
  ``[Position] [Velocity|Voice] Pitch Duration``; ``Position`` is omitted
  when unchanged. Score bars may be followed by ``TimeSig`` and ``KeySig``
  at change points.
* CPWord: one tuple per bar, per position change and per note, with
  ``Ignore_*`` fillers in slots that do not apply.

Performance bars are pseudo-bars of ``QuantSpec.perf_bar_seconds``.
"""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DecodeError, QuantizationWarning, UnsupportedCombination
from ..model import FeatureLevel, Modality, NoteEvent, PieceDoc, to_ticks
from .vocab import BOS, EOS, PAD, Scheme, Vocabulary, fmt


@dataclass
class TokenSequence:
    ids: list
    scheme: Scheme
    modality: Modality
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ids)

    @property
    def nbytes(self) -> int:
        """In-memory size as int32 ids (tuples count every slot)."""
        if self.ids and isinstance(self.ids[0], (tuple, list)):
            return 4 * len(self.ids) * len(self.ids[0])
        return 4 * len(self.ids)


def _nearest(bins: np.ndarray, value: float) -> int:
    i = int(np.searchsorted(bins, value))
    if i == 0:
        return 0
    if i >= bins.shape[0]:
        return bins.shape[0] - 1
    return i if bins[i] - value < value - bins[i - 1] else i - 1


class _Clamps:
    def __init__(self):
        self.count = 0

    def report(self, piece_id):
        if self.count:
            warnings.warn(f"{piece_id or 'piece'}: {self.count} value(s) clamped to the quantization range",
                          QuantizationWarning, stacklevel=3)


def _grid_ticks(vocab: Vocabulary) -> int:
    return int(to_ticks(vocab.quant.grid))


def _to_grid(values, grid_ns: int) -> np.ndarray:
    ticks = to_ticks(values)
    return (ticks + grid_ns // 2) // grid_ns


@dataclass
class _Placed:
    bar: int
    pos: int
    pitch: int
    value: int | None  # velocity or voice
    duration: str


class _ScoreBars:
    """Bar grid in position units, driven by time signatures per bar index."""

    def __init__(self, time_signatures, quant):
        self.quant = quant
        self.changes = {m: (n, d) for m, n, d in time_signatures}
        self.starts = [0]
        self.sigs = [self.changes.get(0, (4, 4))]

    def _extend(self):
        num, den = self.sigs[-1]
        self.starts.append(self.starts[-1] + self.quant.bar_positions(num, den))
        self.sigs.append(self.changes.get(len(self.starts) - 1, self.sigs[-1]))

    def locate(self, position: int) -> tuple[int, int]:
        while self.starts[-1] <= position:
            self._extend()
        bar = bisect.bisect_right(self.starts, position) - 1
        return bar, position - self.starts[bar]


def _place_notes(doc: PieceDoc, vocab: Vocabulary, clamps: _Clamps) -> list[_Placed]:
    q = vocab.quant
    advanced = vocab.feature_level is FeatureLevel.ADVANCED
    notes = doc.notes
    out = []
    if doc.is_score:
        bars = _ScoreBars(doc.time_signatures, q)
        dur_bins = np.asarray(q.score_duration_bins)
        for n in notes:
            position = int(np.floor(n.onset * q.positions_per_quarter + 0.5))
            bar, pos = bars.locate(position)
            value = None
            if advanced:
                value = n.voice or 1
                if value > q.max_voice:
                    clamps.count += 1
                    value = q.max_voice
            out.append(_Placed(bar, pos, n.pitch, value, _duration(dur_bins, n.duration, clamps)))
        return out
    grid_ns = _grid_ticks(vocab)
    onsets = _to_grid([n.onset for n in notes], grid_ns)
    per_bar = q.perf_positions
    dur_bins = np.asarray(q.duration_bins)
    for n, on in zip(notes, onsets):
        value = q.velocity_value(q.velocity_bin(n.velocity or 64)) if advanced else None
        if advanced and not 1 <= (n.velocity or 0) <= 127:
            clamps.count += 1
        out.append(_Placed(int(on // per_bar), int(on % per_bar), n.pitch, value,
                           _duration(dur_bins, n.duration, clamps)))
    return out


def _duration(bins: np.ndarray, value: float, clamps: _Clamps) -> str:
    if value > bins[-1]:
        clamps.count += 1
    return f"Duration_{fmt(bins[_nearest(bins, value)])}"


def _value_token(vocab: Vocabulary, value) -> str:
    return f"Voice_{value}" if vocab.modality is Modality.SCORE else f"Velocity_{value}"


def _signature_tokens(doc: PieceDoc, vocab: Vocabulary):
    """Map bar index -> [TimeSig token or None, KeySig token or None].

    Only changes are emitted; the running state starts at 4/4 and no
    accidentals, matching the decoder's initial state.
    """
    out = {}
    current = (4, 4)
    for m, n, d in sorted(doc.time_signatures):
        token = f"TimeSig_{n}/{d}"
        if token not in vocab:
            raise UnsupportedCombination(f"time signature {n}/{d} is not in the vocabulary")
        if (n, d) != current:
            out.setdefault(m, [None, None])[0] = token
            current = (n, d)
    fifths_now = 0
    for m, fifths in sorted(doc.key_signatures):
        fifths = max(-7, min(7, fifths))
        if fifths != fifths_now:
            out.setdefault(m, [None, None])[1] = f"KeySig_{fifths}"
            fifths_now = fifths
    return out


def tokenize(doc: PieceDoc, vocab: Vocabulary) -> TokenSequence:
    """Encode ``doc`` with the scheme, quantization and level bound to ``vocab``."""
    if doc.modality is not vocab.modality:
        raise UnsupportedCombination(f"{vocab.modality.value} vocabulary cannot encode a {doc.modality.value}")
    if vocab.scheme is Scheme.MIDILIKE and doc.is_score:
        raise UnsupportedCombination("MIDILike tokenization is not defined for scores")
    clamps = _Clamps()
    if vocab.scheme is Scheme.MIDILIKE:
        ids = _tokenize_midilike(doc, vocab, clamps)
    elif vocab.scheme is Scheme.REMI:
        ids = _tokenize_remi(doc, vocab, clamps)
    else:
        ids = _tokenize_cpword(doc, vocab, clamps)
    clamps.report(doc.piece_id)
    return TokenSequence(ids, vocab.scheme, vocab.modality)


def _tokenize_midilike(doc, vocab, clamps):
    q = vocab.quant
    grid_ns = _grid_ticks(vocab)
    advanced = vocab.feature_level is FeatureLevel.ADVANCED
    on = _to_grid([n.onset for n in doc.notes], grid_ns)
    off = _to_grid([n.offset for n in doc.notes], grid_ns)
    off = np.maximum(off, on + 1)
    events = []
    for i, n in enumerate(doc.notes):
        events.append((int(on[i]), 1, i, n))
        events.append((int(off[i]), 0, i, n))
    # offs before ons at equal time; equal kinds keep note order (FIFO)
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    shift_ticks = q.time_shift_ticks
    shift_ids = [vocab.id(f"TimeShift_{fmt(b)}") for b in q.time_shift_bins]
    ids = [BOS]
    cursor = 0
    for time, kind, _, n in events:
        delta = time - cursor
        while delta > 0:
            j = int(np.searchsorted(shift_ticks, delta, side="right")) - 1
            ids.append(shift_ids[j])
            delta -= int(shift_ticks[j])
        cursor = time
        if kind == 1:
            if advanced:
                if not 1 <= (n.velocity or 0) <= 127:
                    clamps.count += 1
                ids.append(vocab.id(f"Velocity_{q.velocity_value(q.velocity_bin(n.velocity or 64))}"))
            ids.append(vocab.id(f"NoteOn_{n.pitch}"))
        else:
            ids.append(vocab.id(f"NoteOff_{n.pitch}"))
    ids.append(EOS)
    return ids


def _tokenize_remi(doc, vocab, clamps):
    placed = _place_notes(doc, vocab, clamps)
    sigs = _signature_tokens(doc, vocab) if doc.is_score else {}
    ids = [BOS]
    bar, pos = -1, None
    for p in placed:
        while bar < p.bar:
            bar += 1
            ids.append(vocab.id("Bar"))
            for token in sigs.get(bar, ()):
                if token:
                    ids.append(vocab.id(token))
            pos = None
        if p.pos != pos:
            ids.append(vocab.id(f"Position_{p.pos}"))
            pos = p.pos
        if p.value is not None:
            ids.append(vocab.id(_value_token(vocab, p.value)))
        ids.append(vocab.id(f"Pitch_{p.pitch}"))
        ids.append(vocab.id(p.duration))
    ids.append(EOS)
    return ids


def _tokenize_cpword(doc, vocab, clamps):
    slots = vocab.slots
    ignore = {s: vocab.id(f"Ignore_{s}") for s in slots if s != "Family"}
    width = len(slots)

    def tuple_of(**filled):
        return tuple(filled.get(s, ignore.get(s)) for s in slots)

    placed = _place_notes(doc, vocab, clamps)
    sigs = _signature_tokens(doc, vocab) if doc.is_score else {}
    metric, note = vocab.id("Family_Metric"), vocab.id("Family_Note")
    out = [(BOS,) * width]
    bar, pos = -1, None
    value_slot = slots[4] if len(slots) > 4 and slots[4] in ("Velocity", "Voice") else None
    for p in placed:
        while bar < p.bar:
            bar += 1
            extra = {}
            ts, ks = sigs.get(bar, (None, None))
            if ts:
                extra["TimeSig"] = vocab.id(ts)
            if ks:
                extra["KeySig"] = vocab.id(ks)
            out.append(tuple_of(Family=metric, Bar=vocab.id("Bar"), **extra))
            pos = None
        if p.pos != pos:
            out.append(tuple_of(Family=metric, Position=vocab.id(f"Position_{p.pos}")))
            pos = p.pos
        fields = {"Family": note, "Pitch": vocab.id(f"Pitch_{p.pitch}"), "Duration": vocab.id(p.duration)}
        if value_slot:
            fields[value_slot] = vocab.id(_value_token(vocab, p.value))
        out.append(tuple_of(**fields))
    out.append((EOS,) * width)
    return out


# -- decoding -----------------------------------------------------------------

def _value_of(token: str) -> str:
    return token.split("_", 1)[1]


def _strip_frame(items, is_special_bos, is_special_eos):
    if not items or not is_special_bos(items[0]):
        raise DecodeError("sequence must start with BOS", 0)
    end = None
    for i, item in enumerate(items):
        if is_special_eos(item):
            end = i
            break
    if end is None:
        raise DecodeError("missing EOS", len(items))
    return end


class _Decoder:
    """Shared state for REMI and CPWord decoding."""

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self.q = vocab.quant
        self.score = vocab.modality is Modality.SCORE
        self.bar = -1
        self.pos = None
        self.notes = []
        self.time_sigs = []
        self.key_sigs = []
        self.sig = (4, 4)
        self.bar_start = 0  # score bars, in positions

    def new_bar(self):
        if self.score and self.bar >= 0:
            self.bar_start += self.q.bar_positions(*self.sig)
        self.bar += 1
        self.pos = None

    def time_sig(self, token, index):
        if self.bar < 0:
            raise DecodeError("TimeSig before first Bar", index)
        num, den = (int(x) for x in _value_of(token).split("/"))
        self.sig = (num, den)
        self.time_sigs.append((self.bar, num, den))

    def key_sig(self, token, index):
        if self.bar < 0:
            raise DecodeError("KeySig before first Bar", index)
        self.key_sigs.append((self.bar, int(_value_of(token))))

    def position(self, token, index):
        if self.bar < 0:
            raise DecodeError("Position before first Bar", index)
        self.pos = int(_value_of(token))

    def note(self, pitch, value, duration, index):
        if self.pos is None:
            raise DecodeError("note without Position", index)
        dur = float(_value_of(duration))
        if self.score:
            onset = (self.bar_start + self.pos) / self.q.positions_per_quarter
            self.notes.append(NoteEvent(pitch=pitch, onset=onset, duration=dur,
                                        voice=value or 1, measure_index=self.bar))
        else:
            onset = (self.bar * self.q.perf_positions + self.pos) * self.q.grid
            self.notes.append(NoteEvent(pitch=pitch, onset=onset, duration=dur,
                                        velocity=value or 64))

    def doc(self, piece_id=""):
        return _finish(self.vocab, self.notes, piece_id, self.time_sigs, self.key_sigs)


def _finish(vocab, notes, piece_id="", time_sigs=(), key_sigs=()):
    notes = sorted(notes, key=lambda n: (n.onset, n.pitch, -n.duration))
    return PieceDoc(modality=vocab.modality, notes=notes, piece_id=piece_id,
                    time_signatures=time_sigs, key_signatures=key_sigs)


def detokenize(seq: TokenSequence, vocab: Vocabulary, piece_id: str = "") -> PieceDoc:
    """Decode a token sequence back to a document (times on the token grid).

    Raises :class:`DecodeError` with the offending position for
    ungrammatical input.
    """
    if seq.scheme is not vocab.scheme:
        raise ValueError(f"sequence scheme {seq.scheme.value} does not match vocabulary {vocab.scheme.value}")
    if vocab.scheme is Scheme.MIDILIKE:
        return _detok_midilike(list(seq.ids), vocab, piece_id)
    if vocab.scheme is Scheme.REMI:
        return _detok_remi(list(seq.ids), vocab, piece_id)
    return _detok_cpword([tuple(t) for t in seq.ids], vocab, piece_id)


def _check_id(vocab, token_id, index):
    if not 0 <= token_id < len(vocab):
        raise DecodeError(f"unknown token id {token_id}", index)


def _detok_midilike(ids, vocab, piece_id):
    end = _strip_frame(ids, lambda t: t == BOS, lambda t: t == EOS)
    q = vocab.quant
    advanced = vocab.feature_level is FeatureLevel.ADVANCED
    cursor = 0
    velocity = None
    open_notes: dict[int, list] = {}
    notes = []
    for i in range(1, end):
        tid = ids[i]
        _check_id(vocab, tid, i)
        token, family = vocab.token(tid), vocab.family(tid)
        if family == "TimeShift":
            cursor += int(round(float(_value_of(token)) / q.grid))
        elif family == "Velocity":
            velocity = int(_value_of(token))
        elif family == "NoteOn":
            if advanced and velocity is None:
                raise DecodeError("NoteOn without preceding Velocity", i)
            open_notes.setdefault(int(_value_of(token)), []).append((cursor, velocity or 64))
            velocity = None
        elif family == "NoteOff":
            pitch = int(_value_of(token))
            queue = open_notes.get(pitch)
            if not queue:
                raise DecodeError(f"NoteOff_{pitch} without matching NoteOn", i)
            start, vel = queue.pop(0)
            notes.append(NoteEvent(pitch=pitch, onset=start * q.grid,
                                   duration=(cursor - start) * q.grid, velocity=vel))
        else:
            raise DecodeError(f"unexpected {token}", i)
        if family != "Velocity" and velocity is not None:
            raise DecodeError("Velocity not followed by NoteOn", i)
    if any(open_notes.values()):
        raise DecodeError("NoteOn never closed", end)
    _check_tail(ids, end)
    return _finish(vocab, notes, piece_id)


def _check_tail(items, end, pad=PAD):
    for j in range(end + 1, len(items)):
        if items[j] != pad:
            raise DecodeError("tokens after EOS", j)


def _detok_remi(ids, vocab, piece_id):
    end = _strip_frame(ids, lambda t: t == BOS, lambda t: t == EOS)
    dec = _Decoder(vocab)
    advanced = vocab.feature_level is FeatureLevel.ADVANCED
    value = None
    pitch = None
    for i in range(1, end):
        tid = ids[i]
        _check_id(vocab, tid, i)
        token, family = vocab.token(tid), vocab.family(tid)
        if pitch is not None and family != "Duration":
            raise DecodeError("Pitch not followed by Duration", i)
        if pitch is None and value is not None and family != "Pitch":
            raise DecodeError(f"{vocab.token(ids[i - 1])} not followed by Pitch", i)
        if family == "Bar":
            dec.new_bar()
        elif family == "TimeSig":
            dec.time_sig(token, i)
        elif family == "KeySig":
            dec.key_sig(token, i)
        elif family == "Position":
            dec.position(token, i)
        elif family in ("Velocity", "Voice"):
            value = int(_value_of(token))
        elif family == "Pitch":
            if advanced and value is None:
                raise DecodeError("Pitch without preceding Velocity/Voice", i)
            pitch = int(_value_of(token))
        elif family == "Duration":
            if pitch is None:
                raise DecodeError("Duration without Pitch", i)
            dec.note(pitch, value, token, i)
            pitch = value = None
        else:
            raise DecodeError(f"unexpected {token}", i)
    if pitch is not None or value is not None:
        raise DecodeError("incomplete note at end of sequence", end)
    _check_tail(ids, end)
    return dec.doc(piece_id)


def _detok_cpword(tuples, vocab, piece_id):
    slots = vocab.slots
    width = len(slots)
    end = _strip_frame(tuples, lambda t: t == (BOS,) * width, lambda t: t == (EOS,) * width)
    dec = _Decoder(vocab)
    ignore = {s: vocab.id(f"Ignore_{s}") for s in slots if s != "Family"}
    metric, note = vocab.id("Family_Metric"), vocab.id("Family_Note")
    for i in range(1, end):
        t = tuples[i]
        if len(t) != width:
            raise DecodeError(f"tuple has {len(t)} slots, expected {width}", i)
        for slot, tid in zip(slots, t):
            _check_id(vocab, tid, i)
            if vocab.family(tid) != slot:
                raise DecodeError(f"{vocab.token(tid)} in {slot} slot", i)
        f = dict(zip(slots, t))
        if f["Family"] == metric:
            if f["Bar"] != ignore["Bar"]:
                dec.new_bar()
                if "TimeSig" in f and f["TimeSig"] != ignore["TimeSig"]:
                    dec.time_sig(vocab.token(f["TimeSig"]), i)
                if "KeySig" in f and f["KeySig"] != ignore["KeySig"]:
                    dec.key_sig(vocab.token(f["KeySig"]), i)
            elif f["Position"] != ignore["Position"]:
                dec.position(vocab.token(f["Position"]), i)
            else:
                raise DecodeError("metric tuple without Bar or Position", i)
        elif f["Family"] == note:
            if f["Pitch"] == ignore["Pitch"] or f["Duration"] == ignore["Duration"]:
                raise DecodeError("note tuple missing Pitch or Duration", i)
            value = None
            for s in ("Velocity", "Voice"):
                if s in f:
                    if f[s] == ignore[s]:
                        raise DecodeError(f"note tuple missing {s}", i)
                    value = int(_value_of(vocab.token(f[s])))
            dec.note(int(_value_of(vocab.token(f["Pitch"]))), value, vocab.token(f["Duration"]), i)
        else:
            raise DecodeError("tuple has no Family token", i)
    _check_tail(tuples, end, pad=(PAD,) * width)
    return dec.doc(piece_id)


def sequence_record(piece_id: str, window, seq: TokenSequence) -> dict:
    """One JSON Lines record for a (piece, window) token sequence."""
    return {
        "piece_id": piece_id,
        "window": window,
        "scheme": seq.scheme.value,
        "ids": [list(t) for t in seq.ids] if seq.scheme is Scheme.CPWORD else list(seq.ids),
    }
